import numpy as np
import pytest

from causal_zigzag.oracle import enumerate_mecs


@pytest.fixture(scope="session")
def catalogs():
    return {n: enumerate_mecs(n) for n in range(1, 5)}


@pytest.fixture(scope="session")
def small_cpdags(catalogs):
    return [g for n in range(1, 5) for g in catalogs[n].cpdags]


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

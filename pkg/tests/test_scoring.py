import math

import numpy as np
import pytest

from causal_zigzag.graph import PDAG, mcs_extension, random_cpdag
from causal_zigzag.operators import INSERT, InvalidOperatorError, apply_operator, insert, list_operators
from causal_zigzag.scoring import (
    BicScore,
    DataMatrix,
    ScoreCache,
    ScoreError,
    TargetDistribution,
    cpdag_log_score,
    local_bic,
    operator_log_delta,
)
from causal_zigzag.synthetic import synthetic_dataset


def lstsq_bic(x, parents, values, penalty):
    """Independent reference: explicit least squares with an intercept column."""
    N = values.shape[0]
    X = np.column_stack([np.ones(N)] + [values[:, p] for p in parents])
    beta, *_ = np.linalg.lstsq(X, values[:, x], rcond=None)
    rss = float(np.sum((values[:, x] - X @ beta) ** 2))
    return -N / 2 * math.log(rss / N) - penalty * (len(parents) + 1) * math.log(N) / 2


@pytest.fixture(scope="module")
def data():
    d, _ = synthetic_dataset(6, 500, 0.5, seed=7)
    return d


def test_local_bic_matches_lstsq(data):
    for x, parents in [(0, []), (3, [1]), (5, [0, 2, 4]), (1, [0, 2, 3, 4, 5])]:
        assert local_bic(x, parents, data, 2.0) == pytest.approx(lstsq_bic(x, parents, data.values, 2.0), rel=1e-10)


def test_local_bic_empty_parents(data):
    var = data.values[:, 2].var()
    expect = -data.N / 2 * math.log(var) - math.log(data.N) / 2
    assert local_bic(2, [], data, 1.0) == pytest.approx(expect, rel=1e-12)


def test_independent_parent_penalised():
    rng = np.random.default_rng(3)
    d = DataMatrix(rng.standard_normal((10000, 2)))
    assert local_bic(0, [1], d, 1.0) < local_bic(0, [], d, 1.0)


def test_column_scaling_shifts_by_constant(data):
    c = 3.7
    v = data.values.copy()
    v[:, 1] *= c
    scaled = DataMatrix(v)
    shift = -data.N / 2 * math.log(c ** 2)
    for parents in ([], [0], [2, 3]):
        assert local_bic(1, parents, scaled, 1.0) - local_bic(1, parents, data, 1.0) == pytest.approx(shift, rel=1e-9)


def test_singular_regression():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(50)
    d = DataMatrix(np.column_stack([a, a, rng.standard_normal(50)]))
    with pytest.raises(ScoreError):
        local_bic(0, [1], d, 1.0)
    with pytest.raises(ValueError):
        local_bic(0, [0], d, 1.0)


def test_small_sample_warns():
    with pytest.warns(UserWarning):
        DataMatrix(np.random.default_rng(0).standard_normal((3, 4)))


def test_score_equivalence(catalogs, data):
    score = BicScore(data, 1.0)
    for n in range(1, 5):
        sub = DataMatrix(data.values[:, :n])
        sc = BicScore(sub, 1.0)
        t = TargetDistribution.scored(sc)
        for c, members in zip(catalogs[n].cpdags, catalogs[n].members):
            s = cpdag_log_score(c, t)
            for m in members:
                assert sc.dag_score(m) == pytest.approx(s, rel=1e-9)
    assert score.penalty == 1.0


def test_uniform_target_zero():
    t = TargetDistribution.uniform()
    g = PDAG.from_edges(3, undirected=[(0, 1)])
    assert cpdag_log_score(g, t) == 0.0
    assert operator_log_delta(g, insert(0, 2), t) == 0.0
    assert t.log_mass(g) == 0.0


def test_empty_graph_score(data):
    t = TargetDistribution.scored(BicScore(data, 1.0))
    assert cpdag_log_score(PDAG(6), t) == pytest.approx(sum(local_bic(v, [], data) for v in range(6)), rel=1e-12)


def test_insert_delta_direct(data):
    sc = BicScore(data, 1.0)
    t = TargetDistribution.scored(sc)
    d = operator_log_delta(PDAG(6), insert(0, 1), t)
    assert d == sc.local(1, 0b1) - sc.local(1, 0)


def test_delta_matches_recomputation(catalogs, data):
    for n in range(2, 5):
        t = TargetDistribution.scored(BicScore(DataMatrix(data.values[:, :n]), 1.0))
        for g in catalogs[n].cpdags:
            base = cpdag_log_score(g, t)
            for op in list_operators(g):
                full = cpdag_log_score(apply_operator(g, op), t) - base
                assert operator_log_delta(g, op, t) == pytest.approx(full, rel=1e-9, abs=1e-9)


def test_delta_random_n6(data, rng):
    t = TargetDistribution.scored(BicScore(data, 1.5))
    done = 0
    while done < 200:
        g = random_cpdag(6, 0.4, rng)
        ops = list(list_operators(g))
        op = ops[rng.integers(len(ops))]
        full = cpdag_log_score(apply_operator(g, op), t) - cpdag_log_score(g, t)
        assert operator_log_delta(g, op, t) == pytest.approx(full, rel=1e-9, abs=1e-9)
        done += 1


def test_delta_rejects_invalid(data):
    t = TargetDistribution.scored(BicScore(data))
    g = PDAG.from_edges(6, undirected=[(0, 1)])
    with pytest.raises(InvalidOperatorError):
        operator_log_delta(g, insert(0, 1), t)


def test_cache_transparency(data, rng):
    sc = BicScore(data, 1.0)
    on, off = ScoreCache(True), ScoreCache(False)
    t = TargetDistribution.scored(sc)
    for _ in range(20):
        g = random_cpdag(6, 0.4, rng)
        assert cpdag_log_score(g, t, on) == cpdag_log_score(g, t, off)
        for op in list(list_operators(g))[:10]:
            assert operator_log_delta(g, op, t, on) == operator_log_delta(g, op, t, off)
    assert on.hits > 0 and len(off) == 0


def test_csv_roundtrip(tmp_path, data):
    path = tmp_path / "d.csv"
    data.to_csv(path)
    back = DataMatrix.from_csv(path)
    assert back.names == data.names
    np.testing.assert_array_equal(back.values, data.values)


@pytest.mark.parametrize("text", ["a,b\n1,2\n3\n", "a,b\n1,\n", "a,b\n1,x\n", ""])
def test_csv_rejects_bad_input(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        DataMatrix.from_csv(path)


def test_callable_score_target(catalogs):
    vals = {c: float(i) for i, c in enumerate(catalogs[3].cpdags)}
    t = TargetDistribution.scored(vals.__getitem__, 2.0)
    g = catalogs[3].cpdags[0]
    op = next(iter(list_operators(g, INSERT)))
    assert operator_log_delta(g, op, t) == vals[apply_operator(g, op)] - vals[g]
    assert t.log_mass(catalogs[3].cpdags[4]) == 8.0


def test_target_validation():
    with pytest.raises(ValueError):
        TargetDistribution("scored")
    with pytest.raises(ValueError):
        TargetDistribution("uniform", beta=-1.0)
    with pytest.raises(ValueError):
        BicScore(DataMatrix(np.random.default_rng(0).standard_normal((20, 3))), penalty=0.0)

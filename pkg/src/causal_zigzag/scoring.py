"""Markov-equivalent scores and target distributions over CPDAGs.

The Gaussian BIC is decomposable: a DAG's score is a sum of local scores of
(vertex, parent set) pairs, and Insert/Delete operators change exactly one
local term. Local scores are memoised in a :class:`ScoreCache`.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graph import PDAG, bits, mcs_extension, to_mask
from .operators import INSERT, InvalidOperatorError, Operator, apply_operator, operator_violation

RIDGE = 1e-10


class ScoreError(ArithmeticError):
    """A local regression could not be evaluated."""


class DataMatrix:
    """Observations (rows) of ``p`` variables (columns) with precomputed summaries."""

    def __init__(self, values, names: Sequence[str] | None = None):
        x = np.asarray(values, dtype=float)
        if x.ndim != 2:
            raise ValueError("data must be a 2-d array of shape (N, p)")
        if not np.all(np.isfinite(x)):
            raise ValueError("data contains missing or non-finite values")
        self.values = np.asfortranarray(x)
        self.N, self.p = x.shape
        self.names = list(names) if names is not None else [f"X{i}" for i in range(self.p)]
        if len(self.names) != self.p:
            raise ValueError("number of names does not match number of columns")
        self.mean = x.mean(axis=0)
        centered = x - self.mean
        # centred Gram matrix; regression on an intercept is implicit
        self.gram = centered.T @ centered
        self.var = np.diag(self.gram) / self.N
        if self.N < self.p + 1:
            warnings.warn(f"N={self.N} < p+1={self.p + 1}: BIC regressions are ill-posed", stacklevel=2)

    @classmethod
    def from_csv(cls, path) -> "DataMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty file")
        header, body = rows[0], [r for r in rows[1:] if r]
        values = []
        for i, row in enumerate(body, 2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
            try:
                values.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path}:{i}: missing or non-numeric value") from None
        return cls(np.array(values, dtype=float).reshape(len(values), len(header)), header)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for row in self.values:
                w.writerow([repr(float(v)) for v in row])


def local_bic(x: int, parents, data: DataMatrix, penalty: float = 1.0) -> float:
    """Gaussian BIC of regressing column ``x`` on ``parents`` plus an intercept.

    ``-(N/2) log(RSS/N) - penalty * (|parents| + 1) * log(N) / 2``.
    """
    idx = sorted(parents)
    if x in idx:
        raise ValueError("a vertex cannot be its own parent")
    S = data.gram
    rss = S[x, x]
    if idx:
        spp = S[np.ix_(idx, idx)]
        spx = S[idx, x]
        try:
            L = np.linalg.cholesky(spp)
        except np.linalg.LinAlgError:
            try:
                L = np.linalg.cholesky(spp + RIDGE * np.eye(len(idx)))
            except np.linalg.LinAlgError:
                raise ScoreError(f"singular regression of {x} on {idx}") from None
        z = np.linalg.solve(L, spx)
        rss = rss - z @ z
    if not rss > 0:
        raise ScoreError(f"non-positive residual sum of squares for {x} on {idx}")
    n = data.N
    return -0.5 * n * math.log(rss / n) - penalty * (len(idx) + 1) * math.log(n) / 2


class ScoreCache:
    """Memo of local scores keyed by ``(vertex, parent bitmask)``."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._store: dict[tuple[int, int], float] = {}
        self.hits = 0
        self.misses = 0

    def lookup(self, key, compute: Callable[[], float]) -> float:
        if not self.enabled:
            self.misses += 1
            return compute()
        try:
            value = self._store[key]
        except KeyError:
            self.misses += 1
            value = self._store[key] = compute()
            return value
        self.hits += 1
        return value

    def __len__(self) -> int:
        return len(self._store)


class BicScore:
    """Decomposable Gaussian BIC over a data matrix."""

    decomposable = True

    def __init__(self, data: DataMatrix, penalty: float = 1.0):
        if not penalty > 0:
            raise ValueError("penalty must be positive")
        self.data = data
        self.penalty = penalty

    def local(self, x: int, parents: int, cache: ScoreCache | None = None) -> float:
        """Local score of ``x`` with parent bitmask ``parents``."""
        if cache is None:
            return local_bic(x, bits(parents), self.data, self.penalty)
        return cache.lookup((x, parents), lambda: local_bic(x, bits(parents), self.data, self.penalty))

    def dag_score(self, dag: PDAG, cache: ScoreCache | None = None) -> float:
        return sum(self.local(v, dag.pa[v], cache) for v in range(dag.n))


@dataclass
class TargetDistribution:
    """Unnormalised law ``pi(g) = exp(beta * s(g))`` over CPDAGs.

    ``score`` is either a decomposable scorer (``BicScore``) or any callable
    mapping a CPDAG to a real number.
    """

    kind: str = "uniform"
    score: object = None
    beta: float = 1.0
    cache: ScoreCache = field(default_factory=ScoreCache, repr=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "scored"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.kind == "scored" and self.score is None:
            raise ValueError("a scored target needs a score")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")

    @classmethod
    def uniform(cls) -> "TargetDistribution":
        return cls("uniform")

    @classmethod
    def scored(cls, score, beta: float = 1.0) -> "TargetDistribution":
        return cls("scored", score, beta)

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform" or self.beta == 0

    def log_mass(self, g: PDAG, cache: ScoreCache | None = None) -> float:
        if self.is_uniform:
            return 0.0
        return self.beta * cpdag_log_score(g, self, cache)

    def describe(self) -> dict:
        out = {"kind": self.kind, "beta": self.beta}
        if isinstance(self.score, BicScore):
            out["score"] = "bic"
            out["penalty"] = self.score.penalty
        return out


def cpdag_log_score(g: PDAG, target: TargetDistribution, cache: ScoreCache | None = None) -> float:
    """Score ``s(g)`` of a CPDAG (0 for the uniform target)."""
    if target.kind == "uniform":
        return 0.0
    score = target.score
    if getattr(score, "decomposable", False):
        cache = target.cache if cache is None else cache
        return score.dag_score(mcs_extension(g), cache)
    return float(score(g))


def operator_log_delta(
    g: PDAG,
    op: Operator,
    target: TargetDistribution,
    cache: ScoreCache | None = None,
    check: bool = True,
) -> float:
    """``s(apply_operator(g, op)) - s(g)`` from the single changed local score."""
    if check:
        reason = operator_violation(g, op)
        if reason is not None:
            raise InvalidOperatorError(op, reason)
    if target.kind == "uniform":
        return 0.0
    score = target.score
    if not getattr(score, "decomposable", False):
        return float(score(apply_operator(g, op, check=False))) - float(score(g))
    cache = target.cache if cache is None else cache
    x, y = op.x, op.y
    na = g.ne[y] & g.adj(x)
    bx = 1 << x
    if op.kind == INSERT:
        base = g.pa[y] | na | to_mask(op.subset)
        return score.local(y, base | bx, cache) - score.local(y, base, cache)
    base = (g.pa[y] | (na & ~to_mask(op.subset))) & ~bx
    return score.local(y, base, cache) - score.local(y, base | bx, cache)

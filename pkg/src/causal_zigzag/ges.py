"""Greedy equivalence search: a forward pass of Inserts, then a backward pass of Deletes."""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import PDAG
from .operators import DELETE, INSERT, Operator, apply_operator, list_operators
from .scoring import BicScore, DataMatrix, ScoreCache, TargetDistribution, cpdag_log_score, operator_log_delta

THRESHOLD = 1e-10
FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class GesStep:
    graph: PDAG  # state after the move
    op: Operator
    delta: float
    phase: str


@dataclass
class GesTrajectory:
    start: PDAG
    steps: list[GesStep] = field(default_factory=list)
    start_score: float = 0.0
    evaluations: int = 0

    @property
    def final(self) -> PDAG:
        return self.steps[-1].graph if self.steps else self.start

    @property
    def score(self) -> float:
        return self.start_score + sum(s.delta for s in self.steps)

    def states(self) -> list[PDAG]:
        return [self.start] + [s.graph for s in self.steps]

    def phase(self, name: str) -> list[GesStep]:
        return [s for s in self.steps if s.phase == name]

    def __len__(self) -> int:
        return len(self.steps)


def best_operator(g: PDAG, kind: str, target: TargetDistribution, cache=None) -> tuple[Operator | None, float, int]:
    """Operator of ``kind`` with the largest score delta; ties go to the smallest operator."""
    best, best_delta, evals = None, -float("inf"), 0
    for op in sorted(list_operators(g, kind)):
        d = operator_log_delta(g, op, target, cache, check=False)
        evals += 1
        if d > best_delta:
            best, best_delta = op, d
    return best, best_delta, evals


def ges_run(data: DataMatrix | None = None, penalty: float = 1.0, start: PDAG | None = None,
            score=None, cache: ScoreCache | None = None, threshold: float = THRESHOLD) -> GesTrajectory:
    """Two-phase greedy search; ``score`` overrides the BIC built from ``data`` and ``penalty``."""
    if score is None:
        if data is None:
            raise ValueError("ges_run needs data or a score")
        score = BicScore(data, penalty)
    target = TargetDistribution.scored(score, 1.0)
    cache = cache if cache is not None else target.cache
    if start is None:
        start = PDAG(data.p if data is not None else 0)
    traj = GesTrajectory(start, start_score=cpdag_log_score(start, target, cache))
    g = start
    for kind, phase in ((INSERT, FORWARD), (DELETE, BACKWARD)):
        while True:
            op, delta, evals = best_operator(g, kind, target, cache)
            traj.evaluations += evals
            if op is None or not delta > threshold:
                break
            g = apply_operator(g, op, check=False)
            traj.steps.append(GesStep(g, op, delta, phase))
    return traj

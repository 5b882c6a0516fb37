"""Continuous-time jump processes over CPDAGs.

Two processes share one engine:

* the Zanella process, a locally balanced reversible walk over all Insert
  and Delete moves;
* the Causal Zig-Zag process, lifted by a direction: in direction +1 it only
  inserts, in direction -1 it only deletes, and it turns at the positive
  part of the rate imbalance between the two directions.

All rates live in the log domain. For the uniform target the operators
need not be listed: counts give the total rate and a move is drawn with the
uniform operator sampler.
"""

from __future__ import annotations

import enum
import json
import math
from array import array
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ._rng import make_rng
from .graph import PDAG, format_graph, parse_graph
from .operators import (
    DELETE,
    INSERT,
    Operator,
    apply_operator,
    count_operators,
    list_operators,
    sample_operator_uniform,
)
from .scoring import ScoreCache, TargetDistribution, cpdag_log_score, operator_log_delta

ZANELLA = "zanella"
ZIGZAG = "zigzag"
TURN = "turn"
START = "start"


class StuckError(RuntimeError):
    """The total jump rate of a state is zero."""


class Balancing(enum.Enum):
    """Balancing functions with ``g(t) = t g(1/t)``, evaluated as ``u -> log g(exp(u))``."""

    SQRT = "sqrt"
    MIN_ONE = "minone"
    RATIO = "ratio"

    def log_g(self, u):
        u = np.asarray(u, dtype=float)
        if self is Balancing.SQRT:
            out = 0.5 * u
        elif self is Balancing.MIN_ONE:
            out = np.minimum(u, 0.0)
        else:
            out = -np.logaddexp(0.0, -u)
        return out if out.ndim else float(out)


def balancing(name) -> Balancing:
    return name if isinstance(name, Balancing) else Balancing(name)


class LiftedState(NamedTuple):
    graph: PDAG
    direction: int


def _logsumexp(a) -> float:
    if len(a) == 0:
        return -math.inf
    m = float(np.max(a))
    if m == -math.inf:
        return m
    return m + math.log(float(np.sum(np.exp(np.asarray(a) - m))))


def _log_positive_diff(la: float, lb: float) -> float:
    """``log((exp(la) - exp(lb))^+)``."""
    if la <= lb:
        return -math.inf
    if lb == -math.inf:
        return la
    return la + math.log1p(-math.exp(lb - la))


@dataclass
class RateTable:
    """Outgoing jump rates of one state: operator moves plus an optional turn."""

    ops: list[Operator]
    log_rates: np.ndarray
    log_turn: float = -math.inf

    @property
    def rates(self) -> np.ndarray:
        return np.exp(self.log_rates)

    @property
    def turn_rate(self) -> float:
        return math.exp(self.log_turn)

    @property
    def log_total(self) -> float:
        return _logsumexp(np.append(self.log_rates, self.log_turn))

    @property
    def total(self) -> float:
        return math.exp(self.log_total)

    def draw(self, rng) -> Operator | None:
        """Gumbel-max draw of the next event; ``None`` means a turn."""
        logits = np.append(self.log_rates, self.log_turn)
        i = int(np.argmax(logits + rng.gumbel(size=logits.size)))
        return None if i == len(self.ops) else self.ops[i]


def _all_log_rates(g: PDAG, target: TargetDistribution, g_fn: Balancing, cache) -> tuple[list, np.ndarray]:
    ops = list(list_operators(g))
    if target.is_uniform:
        return ops, np.full(len(ops), g_fn.log_g(0.0))
    deltas = np.array([operator_log_delta(g, op, target, cache, check=False) for op in ops])
    return ops, np.asarray(g_fn.log_g(target.beta * deltas), dtype=float).reshape(-1)


def zanella_rates(g: PDAG, target: TargetDistribution, g_fn=Balancing.SQRT, cache: ScoreCache | None = None) -> RateTable:
    """Rates ``g(pi(eta) / pi(g))`` for every valid operator; no turn."""
    ops, lr = _all_log_rates(g, target, balancing(g_fn), cache)
    if not ops:
        raise StuckError("state has no valid operators")
    return RateTable(ops, lr)


def zigzag_rates(state, target: TargetDistribution, g_fn=Balancing.SQRT, cache: ScoreCache | None = None) -> RateTable:
    """Lifted rates: moves in the current direction plus the turn rate.

    The turn rate is the positive part of (total rate of the opposite
    direction) minus (total rate of the current direction).
    """
    g, d = state
    ops, lr = _all_log_rates(g, target, balancing(g_fn), cache)
    is_ins = np.array([op.kind == INSERT for op in ops], dtype=bool)
    same = is_ins if d == +1 else ~is_ins
    l_same = _logsumexp(lr[same])
    l_opp = _logsumexp(lr[~same])
    table = RateTable([op for op, s in zip(ops, same) if s], lr[same], _log_positive_diff(l_opp, l_same))
    if table.log_total == -math.inf:
        raise StuckError("lifted state has zero total rate")
    return table


class _UniformMoves:
    """Implicit rate table for the uniform target, backed by operator counts."""

    def __init__(self, g: PDAG, direction: int | None, log_g1: float):
        self.graph = g
        self.counts = count_operators(g)
        ins, dels = self.counts.insert_total, self.counts.delete_total
        lins = math.log(ins) + log_g1 if ins else -math.inf
        ldel = math.log(dels) + log_g1 if dels else -math.inf
        if direction is None:
            self.kind = None
            self.log_move = math.log(ins + dels) + log_g1 if ins + dels else -math.inf
            self.log_turn = -math.inf
        elif direction == +1:
            self.kind = INSERT
            self.log_move = lins
            self.log_turn = _log_positive_diff(ldel, lins)
        else:
            self.kind = DELETE
            self.log_move = ldel
            self.log_turn = _log_positive_diff(lins, ldel)
        self.log_total = _logsumexp([self.log_move, self.log_turn])

    def draw(self, rng) -> Operator | None:
        if self.log_turn > -math.inf:
            logits = np.array([self.log_move, self.log_turn])
            if int(np.argmax(logits + rng.gumbel(size=2))) == 1:
                return None
        return sample_operator_uniform(self.graph, rng, self.kind, self.counts)


class _ExplicitMoves:
    def __init__(self, table: RateTable):
        self.table = table
        self.log_total = table.log_total

    def draw(self, rng) -> Operator | None:
        return self.table.draw(rng)


class JumpProcess:
    """Simulation engine for one chain.

    ``memo`` keeps the rate table of every visited state and the result of
    every applied operator; worthwhile when the state space is small enough
    to be revisited (defaults to on for ``n <= 6``).
    """

    def __init__(self, kind: str, target: TargetDistribution, g_fn=Balancing.SQRT,
                 cache: ScoreCache | None = None, memo: bool | None = None):
        if kind not in (ZANELLA, ZIGZAG):
            raise ValueError(f"unknown sampler kind {kind!r}")
        self.kind = kind
        self.target = target
        self.g_fn = balancing(g_fn)
        self.cache = cache if cache is not None else ScoreCache()
        self.memo = memo
        self._moves: dict = {}
        self._applied: dict = {}
        self._scores: dict = {}

    def _use_memo(self, g: PDAG) -> bool:
        return self.memo if self.memo is not None else g.n <= 6

    def rates(self, state: LiftedState) -> RateTable:
        if self.kind == ZANELLA:
            return zanella_rates(state.graph, self.target, self.g_fn, self.cache)
        return zigzag_rates(state, self.target, self.g_fn, self.cache)

    def moves(self, state: LiftedState):
        g, d = state
        key = (g, d if self.kind == ZIGZAG else 0)
        memo = self._use_memo(g)
        if memo and key in self._moves:
            return self._moves[key]
        if self.target.is_uniform:
            m = _UniformMoves(g, d if self.kind == ZIGZAG else None, self.g_fn.log_g(0.0))
        else:
            m = _ExplicitMoves(self.rates(state))
        if m.log_total == -math.inf:
            raise StuckError("state has zero total rate")
        if memo:
            self._moves[key] = m
        return m

    def apply(self, g: PDAG, op: Operator) -> PDAG:
        if not self._use_memo(g):
            return apply_operator(g, op, check=False)
        key = (g, op)
        nxt = self._applied.get(key)
        if nxt is None:
            nxt = self._applied[key] = apply_operator(g, op, check=False)
        return nxt

    def log_score(self, g: PDAG) -> float:
        if self.target.kind == "uniform":
            return 0.0
        if not self._use_memo(g):
            return cpdag_log_score(g, self.target, self.cache)
        s = self._scores.get(g)
        if s is None:
            s = self._scores[g] = cpdag_log_score(g, self.target, self.cache)
        return s

    def step(self, state: LiftedState, rng) -> tuple[float, LiftedState, Operator | None]:
        """Holding time, next state and the operator taken (``None`` for a turn)."""
        m = self.moves(state)
        log_hold = math.log(rng.standard_exponential()) - m.log_total
        hold = math.exp(log_hold) if log_hold < 709.0 else math.inf
        op = m.draw(rng)
        if op is None:
            return hold, LiftedState(state.graph, -state.direction), None
        return hold, LiftedState(self.apply(state.graph, op), state.direction), op


def step(state, rates: RateTable, rng, process: JumpProcess | None = None) -> tuple[float, LiftedState]:
    """One jump from an explicit rate table: ``(Exp(total) holding time, next state)``."""
    state = LiftedState(*state)
    if rates.log_total == -math.inf:
        raise StuckError("state has zero total rate")
    hold = float(rng.standard_exponential()) / rates.total
    op = rates.draw(rng)
    if op is None:
        return hold, LiftedState(state.graph, -state.direction)
    nxt = process.apply(state.graph, op) if process else apply_operator(state.graph, op, check=False)
    return hold, LiftedState(nxt, state.direction)


# -- traces ----------------------------------------------------------------


class StateSummary(NamedTuple):
    time: float
    graph: PDAG
    edges: int
    logscore: float
    direction: int


@dataclass
class Trace:
    """Jump times and visited states of one chain; event 0 is the start state."""

    header: dict
    times: array = field(default_factory=lambda: array("d"))
    kinds: list = field(default_factory=list)
    ops: list = field(default_factory=list)
    graphs: list = field(default_factory=list)
    dirs: array = field(default_factory=lambda: array("b"))
    edges: array = field(default_factory=lambda: array("l"))
    logscores: array = field(default_factory=lambda: array("d"))
    end_time: float = 0.0

    def append(self, t, kind, op, graph, direction, logscore):
        self.times.append(t)
        self.kinds.append(kind)
        self.ops.append(op)
        self.graphs.append(graph)
        self.dirs.append(direction)
        self.edges.append(graph.num_edges)
        self.logscores.append(logscore)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def num_jumps(self) -> int:
        return len(self.times) - 1

    def summary(self, i: int) -> StateSummary:
        return StateSummary(self.times[i], self.graphs[i], self.edges[i], self.logscores[i], self.dirs[i])

    def holding_times(self) -> np.ndarray:
        t = np.append(np.frombuffer(self.times, dtype=float), self.end_time)
        return np.diff(t)

    def occupation(self, burn_in: float = 0.0) -> dict[PDAG, float]:
        """Fraction of time spent in each CPDAG after time ``burn_in``."""
        return occupation(self.graphs, np.frombuffer(self.times, dtype=float), self.end_time, burn_in)

    def move_states(self) -> list[PDAG]:
        """Graphs entered by operator moves, starting with the start graph."""
        return [self.graphs[0]] + [g for g, k in zip(self.graphs[1:], self.kinds[1:]) if k != TURN]

    # -- serialisation --

    def write_jsonl(self, fh, names=None, stride: int | None = None) -> None:
        stride = stride or self.header.get("stride", 100)
        head = dict(self.header)
        head["jumps"] = self.num_jumps
        head["end_time"] = self.end_time if math.isfinite(self.end_time) else None
        head["start"] = format_graph(self.graphs[0], names)
        head["names"] = list(names) if names is not None else [str(v) for v in range(self.graphs[0].n)]
        fh.write(json.dumps({"header": head}) + "\n")
        last = len(self) - 1
        for i in range(1, len(self)):
            op = self.ops[i]
            rec = {
                "t": self.times[i],
                "kind": self.kinds[i],
                "x": op.x if op else None,
                "y": op.y if op else None,
                "set": list(op.subset) if op else None,
                "edges": self.edges[i],
                "logscore": self.logscores[i],
                "dir": self.dirs[i],
            }
            if i % stride == 0 or i == last:
                rec["graph"] = format_graph(self.graphs[i], names)
            fh.write(json.dumps(rec) + "\n")


def occupation(graphs, times, end_time: float, burn_in: float = 0.0) -> dict:
    """Time-weighted occupation of ``graphs[i]`` over ``[times[i], times[i+1])`` after ``burn_in``."""
    t = np.asarray(times, dtype=float)
    nxt = np.append(t[1:], end_time)
    lo = np.maximum(t, burn_in)
    w = np.clip(nxt - lo, 0.0, None)
    w = np.where(np.isnan(w), 0.0, w)
    if np.isinf(w).any():
        # an absorbing final state carries all the mass
        w = np.isinf(w).astype(float)
    total = w.sum()
    occ: dict = {}
    for g, wi in zip(graphs, w):
        if wi > 0:
            occ[g] = occ.get(g, 0.0) + wi
    if total > 0:
        occ = {g: v / total for g, v in occ.items()}
    return occ


def read_trace(fh) -> tuple[Trace, list[str]]:
    """Rebuild a trace from JSONL by replaying its operators from the start graph.

    Recorded graph snapshots are checked against the replay.
    """
    lines = iter(fh)
    head = json.loads(next(lines))["header"]
    start, names = parse_graph(head["start"])
    names = head.get("names") or names
    if len(names) < start.n:
        raise ValueError("trace header names fewer vertices than its start graph")
    start = PDAG(len(names), start.ne + [0] * (len(names) - start.n),
                 start.pa + [0] * (len(names) - start.n), start.ch + [0] * (len(names) - start.n))
    start_dir = head.get("start_direction", 1)
    tr = Trace(head)
    tr.append(0.0, START, None, start, start_dir if head.get("kind") == ZIGZAG else 0, head.get("start_logscore", 0.0))
    g, memo = start, {}
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        op = None
        if rec["kind"] != TURN:
            op = Operator(rec["kind"], rec["x"], rec["y"], tuple(rec["set"]))
            key = (g, op)
            if key not in memo:
                memo[key] = apply_operator(g, op)
            g = memo[key]
        if "graph" in rec:
            snap, _ = parse_graph(rec["graph"])
            if format_graph(snap) != format_graph(g):
                raise ValueError(f"event {i}: replayed graph differs from recorded snapshot")
        if g.num_edges != rec["edges"]:
            raise ValueError(f"event {i}: replayed edge count differs from recorded count")
        tr.append(rec["t"], rec["kind"], op, g, rec["dir"], rec["logscore"])
    end = head.get("end_time")
    tr.end_time = math.inf if end is None else end
    return tr, names


# -- driver ----------------------------------------------------------------


def run(
    kind: str,
    start: PDAG,
    target: TargetDistribution | None = None,
    g_fn=Balancing.SQRT,
    max_jumps: int | None = None,
    max_time: float | None = None,
    seed=0,
    start_direction: int = +1,
    stride: int = 100,
    until: Callable[[StateSummary], bool] | None = None,
    memo: bool | None = None,
    cache: ScoreCache | None = None,
) -> Trace:
    """Simulate a chain from ``start`` until a stop criterion; deterministic given ``seed``.

    ``until`` stops the chain at the first state satisfying the predicate.
    For Zanella runs the recorded direction is 0.
    """
    if max_jumps is None and max_time is None and until is None:
        raise ValueError("a stop criterion is required")
    target = target or TargetDistribution.uniform()
    proc = JumpProcess(kind, target, g_fn, cache, memo)
    rng = make_rng(seed)
    d = start_direction if kind == ZIGZAG else 0
    if kind == ZIGZAG and d not in (-1, 1):
        raise ValueError("start direction must be +1 or -1")
    header = {
        "kind": kind,
        "n": start.n,
        "target": target.describe(),
        "g_fn": proc.g_fn.value,
        "beta": target.beta,
        "penalty": getattr(target.score, "penalty", None),
        "seed": seed if isinstance(seed, (int, type(None))) else str(seed),
        "start_direction": d,
        "stride": stride,
    }
    trace = Trace(header)
    state = LiftedState(start, d)
    s0 = proc.log_score(start)
    header["start_logscore"] = s0
    trace.append(0.0, START, None, start, d, s0)
    t = 0.0
    if until is not None and until(trace.summary(0)):
        trace.end_time = t
        return trace
    jumps = 0
    while max_jumps is None or jumps < max_jumps:
        hold, nxt, op = proc.step(state, rng)
        if max_time is not None and t + hold > max_time:
            t = max_time
            break
        t += hold
        if math.isinf(t):
            break
        state = nxt
        jumps += 1
        trace.append(t, op.kind if op else TURN, op, state.graph, state.direction, proc.log_score(state.graph))
        if until is not None and until(trace.summary(len(trace) - 1)):
            break
    trace.end_time = t
    return trace


def first_hitting_time(trace: Trace, predicate: Callable[[StateSummary], bool]) -> float | None:
    """Earliest jump time whose state satisfies ``predicate``."""
    for i in range(len(trace)):
        s = trace.summary(i)
        if predicate(s):
            return s.time
    return None

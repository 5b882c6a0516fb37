"""Brute-force ground truth for small graphs.

Everything here deliberately avoids the fast paths: graphs are handled as
plain Python sets, operators are validated straight from their textual
conditions, completion goes through sink elimination and Meek's rules, and
stationarity is checked by dense linear algebra over the full state space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations

import numpy as np
from scipy.sparse.csgraph import connected_components

from .graph import PDAG, dag_to_cpdag, skeleton, v_structures
from .operators import DELETE, INSERT, Operator, apply_operator

MAX_ENUMERATION_N = 5


class CompletionError(ValueError):
    """A PDAG admits no consistent extension."""


# -- set-based graph view --------------------------------------------------


class _SetGraph:
    def __init__(self, n, directed=(), undirected=()):
        self.n = n
        self.directed = set(directed)
        self.undirected = {frozenset(e) for e in undirected}

    @classmethod
    def of(cls, g: PDAG) -> "_SetGraph":
        return cls(g.n, g.directed_edges(), g.undirected_edges())

    def to_pdag(self) -> PDAG:
        return PDAG.from_edges(self.n, self.directed, [tuple(sorted(e)) for e in self.undirected])

    def adjacent(self, u, v):
        return (u, v) in self.directed or (v, u) in self.directed or frozenset((u, v)) in self.undirected

    def ne(self, v):
        return {u for e in self.undirected if v in e for u in e if u != v}

    def pa(self, v):
        return {u for (u, w) in self.directed if w == v}

    def ch(self, v):
        return {w for (u, w) in self.directed if u == v}


def _powerset(items):
    items = sorted(items)
    return chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))


def _clique(sg: _SetGraph, vertices) -> bool:
    return all(sg.adjacent(a, b) for a, b in combinations(vertices, 2))


def _semi_directed_path_avoiding(sg: _SetGraph, y, x, blocked) -> bool:
    """Is there a path y ... x without edges pointing towards y, avoiding ``blocked``?"""
    stack, seen = [y], {y}
    while stack:
        v = stack.pop()
        for u in sg.ne(v) | sg.ch(v):
            if u == x:
                return True
            if u not in seen and u not in blocked:
                seen.add(u)
                stack.append(u)
    return False


# -- enumeration -----------------------------------------------------------


def enumerate_dags(n: int):
    """All labelled DAGs on ``n`` vertices, by recursion over vertex pairs."""
    pairs = list(combinations(range(n), 2))
    pa = [set() for _ in range(n)]

    def reaches(src, dst):
        # is there a directed path src -> ... -> dst
        stack, seen = [dst], {dst}
        while stack:
            v = stack.pop()
            if v == src:
                return True
            for p in pa[v]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return False

    def rec(i):
        if i == len(pairs):
            yield PDAG.from_edges(n, [(p, v) for v in range(n) for p in pa[v]])
            return
        u, v = pairs[i]
        yield from rec(i + 1)
        for a, b in ((u, v), (v, u)):
            if not reaches(b, a):
                pa[b].add(a)
                yield from rec(i + 1)
                pa[b].discard(a)

    yield from rec(0)


@dataclass
class MecCatalog:
    """All Markov equivalence classes on ``n`` labelled vertices."""

    n: int
    cpdags: list[PDAG]
    members: list[list[PDAG]]
    index: dict[PDAG, int] = field(repr=False)

    @property
    def class_sizes(self) -> list[int]:
        return [len(m) for m in self.members]

    @property
    def num_dags(self) -> int:
        return sum(self.class_sizes)

    def __len__(self) -> int:
        return len(self.cpdags)


def enumerate_mecs(n: int) -> MecCatalog:
    """Enumerate DAGs, group them by (skeleton, v-structures) and complete each group.

    Two independent groupings must agree: the structural key, and the CPDAG
    computed by ``dag_to_cpdag`` for every member.
    """
    if not 0 <= n <= MAX_ENUMERATION_N:
        raise ValueError(f"enumeration supports 0 <= n <= {MAX_ENUMERATION_N}")
    groups: dict[tuple, list[PDAG]] = {}
    for dag in enumerate_dags(n):
        groups.setdefault((skeleton(dag), v_structures(dag)), []).append(dag)
    by_cpdag: dict[PDAG, list[PDAG]] = {}
    for members in groups.values():
        completed = {dag_to_cpdag(d) for d in members}
        if len(completed) != 1:
            raise AssertionError("members of one structural class complete differently")
        c = completed.pop()
        if c in by_cpdag:
            raise AssertionError("two structural classes complete to the same CPDAG")
        by_cpdag[c] = members
    cpdags = sorted(by_cpdag, key=lambda c: (c.num_edges, c.key()))
    members = [by_cpdag[c] for c in cpdags]
    return MecCatalog(n, cpdags, members, {c: i for i, c in enumerate(cpdags)})


# -- naive completion ------------------------------------------------------


def meek_completion(n: int, skel, vstructs) -> PDAG:
    """CPDAG from a skeleton and v-structure set by closing under Meek's rules 1-3."""
    directed = set()
    for a, b, c in vstructs:
        directed.add((a, b))
        directed.add((c, b))
    undirected = {frozenset(e) for e in skel} - {frozenset(e) for e in directed}
    sg = _SetGraph(n, directed, undirected)
    changed = True
    while changed:
        changed = False
        for e in list(sg.undirected):
            for b, c in (tuple(e), tuple(e)[::-1]):
                # orient b -> c?
                r1 = any(not sg.adjacent(a, c) for a in sg.pa(b))
                r2 = any((b, a) in sg.directed and (a, c) in sg.directed for a in range(n))
                pc = [a for a in sg.pa(c) if frozenset((a, b)) in sg.undirected]
                r3 = any(not sg.adjacent(p, q) for p, q in combinations(pc, 2))
                if r1 or r2 or r3:
                    sg.undirected.discard(e)
                    sg.directed.add((b, c))
                    changed = True
                    break
    return sg.to_pdag()


def naive_cpdag(dag: PDAG) -> PDAG:
    return meek_completion(dag.n, skeleton(dag), v_structures(dag))


def consistent_extension(g: PDAG) -> PDAG:
    """Sink-elimination extension of a PDAG; CompletionError if none exists."""
    sg = _SetGraph.of(g)
    remaining = set(range(g.n))
    out = set(sg.directed)
    while remaining:
        for v in sorted(remaining):
            if sg.ch(v) & remaining:
                continue
            ne_v = sg.ne(v) & remaining
            adj_v = (ne_v | sg.pa(v)) & remaining
            if all(sg.adjacent(u, w) for u in ne_v for w in adj_v if w != u):
                break
        else:
            raise CompletionError("PDAG has no consistent extension")
        for u in ne_v:
            out.add((u, v))
            sg.undirected.discard(frozenset((u, v)))
        sg.directed = {e for e in sg.directed if v not in e}
        sg.undirected = {e for e in sg.undirected if v not in e}
        remaining.discard(v)
    return PDAG.from_edges(g.n, out)


def operator_pdag(g: PDAG, op: Operator) -> PDAG:
    """Local edit of an operator before completion."""
    sg = _SetGraph.of(g)
    x, y = op.x, op.y
    if op.kind == INSERT:
        sg.directed.add((x, y))
        for t in op.subset:
            sg.undirected.discard(frozenset((t, y)))
            sg.directed.add((t, y))
    else:
        sg.directed.discard((x, y))
        sg.undirected.discard(frozenset((x, y)))
        for h in op.subset:
            for u in (x, y):
                if frozenset((u, h)) in sg.undirected:
                    sg.undirected.discard(frozenset((u, h)))
                    sg.directed.add((u, h))
    return sg.to_pdag()


def naive_apply(g: PDAG, op: Operator) -> PDAG:
    """Apply an operator the classical way: local edit, extension, completion."""
    return naive_cpdag(consistent_extension(operator_pdag(g, op)))


def is_completed(g: PDAG) -> bool:
    try:
        return naive_cpdag(consistent_extension(g)) == g
    except CompletionError:
        return False


def class_members(g: PDAG) -> list[PDAG]:
    """All DAGs in the class of the CPDAG ``g``, by orienting its undirected edges every way."""
    und = g.undirected_edges()
    target = (skeleton(g), v_structures(g))
    out = []
    for flips in range(1 << len(und)):
        edges = g.directed_edges() + [
            (v, u) if flips >> i & 1 else (u, v) for i, (u, v) in enumerate(und)
        ]
        d = PDAG.from_edges(g.n, edges)
        try:
            consistent_extension(d)
        except CompletionError:
            continue
        if (skeleton(d), v_structures(d)) == target:
            out.append(d)
    return out


# -- operators from definitions --------------------------------------------


def brute_force_operators(g: PDAG) -> list[Operator]:
    """All valid operators, found by testing every candidate against the textual conditions."""
    sg = _SetGraph.of(g)
    ops = []
    for x in range(g.n):
        for y in range(g.n):
            if x == y:
                continue
            ne_y = sg.ne(y)
            na = {t for t in ne_y if sg.adjacent(t, x)}
            if not sg.adjacent(x, y):
                cands = {t for t in ne_y if not sg.adjacent(t, x)}
                for T in _powerset(cands):
                    s = na | set(T)
                    if _clique(sg, s) and not _semi_directed_path_avoiding(sg, y, x, s):
                        ops.append(Operator(INSERT, x, y, tuple(T)))
            elif frozenset((x, y)) in sg.undirected or (x, y) in sg.directed:
                for H in _powerset(na):
                    if _clique(sg, na - set(H)):
                        ops.append(Operator(DELETE, x, y, tuple(H)))
    return ops


def local_moves(g: PDAG, catalog: MecCatalog) -> tuple[set[PDAG], set[PDAG]]:
    """Classes reachable by one edge insertion / deletion on some member DAG."""
    up, down = set(), set()
    for dag in catalog.members[catalog.index[g]]:
        for u in range(g.n):
            for v in range(g.n):
                if u == v:
                    continue
                if dag.has_directed(u, v):
                    d = dag.copy()
                    d.remove_edge(u, v)
                    down.add(dag_to_cpdag(d))
                elif not dag.is_adjacent(u, v):
                    d = dag.copy()
                    d.add_directed(u, v)
                    try:
                        consistent_extension(d)
                    except CompletionError:
                        continue
                    up.add(dag_to_cpdag(d))
    return up, down


# -- exact stationarity ----------------------------------------------------


def lifted_states(catalog: MecCatalog) -> list[tuple[PDAG, int]]:
    return [(c, d) for c in catalog.cpdags for d in (+1, -1)]


def generator_matrix(kind: str, target, g_fn, catalog: MecCatalog, corrupt_turn: float = 0.0,
                     corrupt_insert: float = 1.0):
    """Dense generator over the catalog (Zanella) or catalog x {+1, -1} (Zig-Zag).

    Returns ``(Q, states, pi)`` with ``pi`` the claimed stationary law. A
    nonzero ``corrupt_turn`` is added to the turn rate of every ``+1`` state
    (negative control; adding it symmetrically would keep pi stationary), and
    Insert rates are multiplied by ``corrupt_insert``.
    """
    from .samplers import zanella_rates, zigzag_rates
    from .scoring import ScoreCache

    cache = ScoreCache()
    logm = np.array([target.log_mass(c, cache) for c in catalog.cpdags])
    base = np.exp(logm - logm.max())
    base /= base.sum()
    if kind == "zanella":
        states = list(catalog.cpdags)
        pos = {c: i for i, c in enumerate(states)}
        pi = base
    elif kind == "zigzag":
        states = lifted_states(catalog)
        pos = {s: i for i, s in enumerate(states)}
        pi = np.repeat(base / 2, 2)
    else:
        raise ValueError(f"unknown sampler kind {kind!r}")
    Q = np.zeros((len(states), len(states)))
    for i, s in enumerate(states):
        if kind == "zanella":
            table = zanella_rates(s, target, g_fn, cache)
            graph, d = s, None
        else:
            graph, d = s
            table = zigzag_rates((graph, d), target, g_fn, cache)
        for op, r in zip(table.ops, table.rates):
            nxt = apply_operator(graph, op, check=False)
            j = pos[nxt] if d is None else pos[(nxt, d)]
            Q[i, j] += r * corrupt_insert if op.kind == "insert" else r
        if d is not None:
            Q[i, pos[(graph, -d)]] += table.turn_rate + (corrupt_turn if d == +1 else 0.0)
        Q[i, i] -= Q[i].sum() - Q[i, i]
    return Q, states, pi


def exact_stationarity_check(kind: str, target, g_fn, n: int = 3, catalog=None, corrupt_turn: float = 0.0,
                             corrupt_insert: float = 1.0) -> float:
    """``max |pi Q|`` for the exact generator; zero up to rounding when pi is stationary."""
    catalog = catalog or enumerate_mecs(n)
    Q, _, pi = generator_matrix(kind, target, g_fn, catalog, corrupt_turn, corrupt_insert)
    return float(np.abs(pi @ Q).max())


def strongly_connected(Q: np.ndarray) -> bool:
    adj = (Q > 0).astype(int)
    np.fill_diagonal(adj, 0)
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return ncomp == 1


# -- report ----------------------------------------------------------------


def verification_report(n_max: int = 3, seed: int = 0, random_targets: int = 3) -> dict:
    """Compare the fast operator layer and the samplers' generators with the oracles."""
    from .operators import count_operators, list_operators
    from .samplers import Balancing
    from .scoring import TargetDistribution

    report: dict = {"catalogs": {}, "operators": {}, "stationarity": {}}
    ok = True
    for n in range(1, n_max + 1):
        cat = enumerate_mecs(n)
        report["catalogs"][str(n)] = {"classes": len(cat), "dags": cat.num_dags}
        checked = apply_mismatch = list_mismatch = count_mismatch = 0
        for g in cat.cpdags:
            ops = sorted(list_operators(g))
            brute = sorted(brute_force_operators(g))
            list_mismatch += ops != brute
            count_mismatch += count_operators(g).total != len(brute)
            for op in ops:
                checked += 1
                apply_mismatch += apply_operator(g, op) != naive_apply(g, op)
        report["operators"][str(n)] = {"checked": checked, "apply_mismatches": apply_mismatch,
                                       "list_mismatches": list_mismatch, "count_mismatches": count_mismatch}
        ok &= not (apply_mismatch or list_mismatch or count_mismatch)
    cat3 = enumerate_mecs(3)
    rng = np.random.default_rng(seed)
    targets = [("uniform", TargetDistribution.uniform())]
    for i in range(random_targets):
        vals = {c: float(v) for c, v in zip(cat3.cpdags, rng.normal(0, 2, len(cat3)))}
        targets.append((f"random{i}", TargetDistribution.scored(vals.__getitem__, 1.0)))
    for g_fn in Balancing:
        for kind in ("zanella", "zigzag"):
            worst = max(exact_stationarity_check(kind, t, g_fn, catalog=cat3) for _, t in targets)
            report["stationarity"][f"{kind}/{g_fn.value}"] = worst
            ok &= worst < 1e-10
    Q, _, _ = generator_matrix("zigzag", TargetDistribution.uniform(), Balancing.SQRT, cat3)
    report["zigzag_irreducible"] = strongly_connected(Q)
    ok &= report["zigzag_irreducible"]
    report["ok"] = bool(ok)
    return report

"""Insert and Delete operators on CPDAGs.

Validity tests, application through a prefix-constrained MCS extension,
and counting, listing and uniform sampling of all locally valid operators
of a CPDAG.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from ._rng import randbelow
from .graph import (
    PDAG,
    NotChordalError,
    bits,
    dag_to_cpdag,
    is_clique,
    mcs_order,
    to_mask,
)

INSERT = "insert"
DELETE = "delete"


@dataclass(frozen=True, order=True)
class Operator:
    """``Insert(x, y, T)`` or ``Delete(x, y, H)``; ``subset`` holds T or H, sorted."""

    kind: str
    x: int
    y: int
    subset: tuple[int, ...] = ()

    @property
    def mask(self) -> int:
        return to_mask(self.subset)

    @property
    def is_insert(self) -> bool:
        return self.kind == INSERT

    def format(self, names: Sequence[str] | None = None) -> str:
        name = (lambda v: names[v]) if names is not None else str
        inner = ",".join(name(v) for v in self.subset)
        return f"{self.kind.capitalize()} {name(self.x)} {name(self.y)} {{{inner}}}"

    def __str__(self) -> str:
        return self.format()


def insert(x: int, y: int, T: Iterable[int] = ()) -> Operator:
    return Operator(INSERT, x, y, tuple(sorted(T)))


def delete(x: int, y: int, H: Iterable[int] = ()) -> Operator:
    return Operator(DELETE, x, y, tuple(sorted(H)))


def parse_operator(text: str, index: dict[str, int] | None = None) -> Operator:
    """Inverse of :meth:`Operator.format`."""
    kind, x, y, rest = text.split(None, 3)
    inner = rest.strip()
    if not (inner.startswith("{") and inner.endswith("}")):
        raise ValueError(f"malformed operator {text!r}")
    look = (lambda s: index[s]) if index is not None else int
    members = [look(s.strip()) for s in inner[1:-1].split(",") if s.strip()]
    kind = kind.lower()
    if kind not in (INSERT, DELETE):
        raise ValueError(f"unknown operator kind {kind!r}")
    return Operator(kind, look(x), look(y), tuple(sorted(members)))


class InvalidOperatorError(ValueError):
    def __init__(self, op: Operator, reason: str):
        super().__init__(f"{op}: {reason}")
        self.op = op
        self.reason = reason


class ContractError(ValueError):
    """Inputs violate the documented relationship between arguments."""


# -- validity --------------------------------------------------------------


def _reach(fwd: Sequence[int], start: int, allowed: int) -> int:
    """Vertices reachable from ``start`` along ``fwd`` edges, staying inside ``allowed``."""
    seen = frontier = start
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= fwd[v]
        frontier = nxt & allowed & ~seen
        seen |= frontier
    return seen


def _forward(g: PDAG) -> list[int]:
    # edges a semi-directed path may traverse: undirected, or directed forwards
    return [g.ne[v] | g.ch[v] for v in range(g.n)]


def insert_violation(g: PDAG, x: int, y: int, T: Iterable[int]) -> str | None:
    """The first violated validity condition of ``Insert(x, y, T)``, or None."""
    g._check(x, y)
    if x == y:
        return "x equals y"
    if g.is_adjacent(x, y):
        return "x and y are adjacent"
    t = to_mask(T)
    ax = g.adj(x)
    if t & ~(g.ne[y] & ~ax):
        return "T is not a set of undirected neighbours of y nonadjacent to x"
    k = (g.ne[y] & ax) | t
    if not is_clique(k, g.ne):
        return "NA_x(y) | T is not a clique"
    full = (1 << g.n) - 1
    if _reach(_forward(g), 1 << y, full & ~k) >> x & 1:
        return "a semi-directed path from y to x avoids NA_x(y) | T"
    return None


def insert_valid(g: PDAG, x: int, y: int, T: Iterable[int] = ()) -> bool:
    return insert_violation(g, x, y, T) is None


def delete_violation(g: PDAG, x: int, y: int, H: Iterable[int]) -> str | None:
    g._check(x, y)
    if x == y:
        return "x equals y"
    if not (g.ne[y] >> x & 1 or g.ch[x] >> y & 1):
        return "neither x -- y nor x -> y is an edge"
    h = to_mask(H)
    na = g.ne[y] & g.adj(x)
    if h & ~na:
        return "H is not a subset of NA_x(y)"
    if not is_clique(na & ~h, g.ne):
        return "NA_x(y) \\ H is not a clique"
    return None


def delete_valid(g: PDAG, x: int, y: int, H: Iterable[int] = ()) -> bool:
    return delete_violation(g, x, y, H) is None


def operator_violation(g: PDAG, op: Operator) -> str | None:
    if op.kind == INSERT:
        return insert_violation(g, op.x, op.y, op.subset)
    if op.kind == DELETE:
        return delete_violation(g, op.x, op.y, op.subset)
    return f"unknown operator kind {op.kind!r}"


def is_valid(g: PDAG, op: Operator) -> bool:
    return operator_violation(g, op) is None


# -- application -----------------------------------------------------------


def extension_prefix(g: PDAG, op: Operator) -> list[int]:
    """MCS start order whose extension turns ``op`` into a single edge edit.

    Insert: the clique ``NA_x(y) | T`` and then ``y``, so that exactly those
    neighbours become parents of ``y``. Delete: ``NA_x(y) \\ H``, then ``x``
    (when ``x -- y``), then ``y``.
    """
    x, y = op.x, op.y
    na = g.ne[y] & g.adj(x)
    if op.kind == INSERT:
        return list(bits(na | op.mask)) + [y]
    prefix = list(bits(na & ~op.mask))
    if g.ne[y] >> x & 1:
        prefix.append(x)
    prefix.append(y)
    return prefix


def _extension_parents(g: PDAG, prefix: Sequence[int]) -> list[int]:
    order = mcs_order(g.ne, (1 << g.n) - 1, prefix)
    pa = list(g.pa)
    earlier = 0
    for v in order:
        p = g.ne[v] & earlier
        if __debug__ and not is_clique(p, g.ne):
            raise NotChordalError(f"visit order is not a perfect elimination order at vertex {v}")
        pa[v] |= p
        earlier |= 1 << v
    return pa


def apply_operator(g: PDAG, op: Operator, check: bool = True) -> PDAG:
    """CPDAG obtained by applying a valid operator; linear in the graph size."""
    if check:
        reason = operator_violation(g, op)
        if reason is not None:
            raise InvalidOperatorError(op, reason)
    pa = _extension_parents(g, extension_prefix(g, op))
    if op.kind == INSERT:
        pa[op.y] |= 1 << op.x
    else:
        pa[op.y] &= ~(1 << op.x)
    return dag_to_cpdag(PDAG.from_parents(g.n, pa))


def inverse_operator(g: PDAG, op: Operator, g_next: PDAG) -> Operator:
    """The unique operator taking ``g_next = apply_operator(g, op)`` back to ``g``."""
    x, y = op.x, op.y
    if op.kind == INSERT:
        # H: common neighbours that are heads of the v-structure x -> h <- y in g
        na = g_next.ne[y] & g_next.adj(x)
        inv = Operator(DELETE, x, y, tuple(bits(na & g.ch[x] & g.ch[y])))
    else:
        # T: undirected neighbours of y that are tails of x -> y <- t in the source
        cand = g_next.ne[y] & ~g_next.adj(x)
        inv = Operator(INSERT, x, y, tuple(bits(cand & g.pa[y])))
    if not is_valid(g_next, inv) or apply_operator(g_next, inv, check=False) != g:
        raise ContractError(f"{op} does not map the first graph to the second")
    return inv


# -- clique structure of chordal sets ---------------------------------------


def clique_structure(mask: int, nbr: Sequence[int]) -> list[tuple[int, int]]:
    """MCS over the vertices of ``mask`` as ``(u, earlier_neighbours)`` pairs.

    Every clique of the chordal graph induced on ``mask`` has a unique latest
    vertex ``u`` and is ``{u}`` plus a subset of the earlier neighbours of
    ``u``, which themselves form a clique.
    """
    out = []
    visited = 0
    rest = mask
    while rest:
        best, u = -1, -1
        for v in bits(rest):
            c = (nbr[v] & visited).bit_count()
            if c > best:
                best, u = c, v
        p = nbr[u] & visited
        if not is_clique(p, nbr):
            raise NotChordalError("induced graph is not chordal")
        out.append((u, p))
        visited |= 1 << u
        rest &= ~(1 << u)
    return out


def _structure_count(struct: list[tuple[int, int]]) -> int:
    return 1 + sum(1 << p.bit_count() for _, p in struct)


def _submasks(mask: int) -> Iterator[int]:
    sub = mask
    while True:
        yield sub
        if not sub:
            return
        sub = (sub - 1) & mask


def _iter_cliques(struct: list[tuple[int, int]]) -> Iterator[int]:
    yield 0
    for u, p in struct:
        bu = 1 << u
        for sub in _submasks(p):
            yield sub | bu


def _scatter(index: int, mask: int) -> int:
    """Map the low bits of ``index`` onto the set bits of ``mask``."""
    out = 0
    for v in bits(mask):
        if index & 1:
            out |= 1 << v
        index >>= 1
    return out


def _clique_at(struct: list[tuple[int, int]], index: int) -> int:
    """The ``index``-th clique in a fixed enumeration of all cliques."""
    if index == 0:
        return 0
    index -= 1
    for u, p in struct:
        size = 1 << p.bit_count()
        if index < size:
            return _scatter(index, p) | 1 << u
        index -= size
    raise IndexError("clique index out of range")


def count_cliques(g: PDAG | Sequence[int], vertices: int | None = None) -> int:
    """Number of cliques (the empty one included) of a chordal undirected graph.

    ``g`` is an undirected PDAG or a list of adjacency bitmasks; ``vertices``
    restricts to an induced subgraph.
    """
    if isinstance(g, PDAG):
        if any(g.pa):
            raise ValueError("count_cliques expects an undirected graph")
        nbr, n = g.ne, g.n
    else:
        nbr, n = g, len(g)
    if vertices is None:
        vertices = (1 << n) - 1
    return _structure_count(clique_structure(vertices, nbr))


# -- per-pair operator structure --------------------------------------------


def _insert_reach(g: PDAG, y: int, fwd: Sequence[int]) -> tuple[int, dict[int, int]]:
    """Reachability data for inserts into ``y``.

    Returns the vertices reachable by semi-directed paths leaving ``y`` along a
    directed edge (no set ``T`` can block those), and for every undirected
    neighbour ``w`` the vertices reachable from ``w`` without touching ``y``
    or another undirected neighbour of ``y``.
    """
    full = (1 << g.n) - 1
    by = 1 << y
    via_children = _reach(fwd, g.ch[y], full & ~by)
    allowed = full & ~g.ne[y] & ~by
    per_nbr = {w: _reach(fwd, 1 << w, allowed | 1 << w) for w in bits(g.ne[y])}
    return via_children, per_nbr


def must_take_set(g: PDAG, x: int, y: int) -> frozenset[int]:
    """Undirected neighbours of ``y`` that every valid ``Insert(x, y, T)`` needs in ``T``.

    These are the neighbours ``w`` nonadjacent to ``x`` from which ``x`` is
    reachable by a semi-directed path avoiding ``y`` and all other
    undirected neighbours of ``y``.
    """
    g._check(x, y)
    if x == y or g.is_adjacent(x, y):
        raise ValueError("must_take_set needs distinct nonadjacent x and y")
    _, per_nbr = _insert_reach(g, y, _forward(g))
    cand = g.ne[y] & ~g.adj(x)
    return frozenset(w for w in bits(cand) if per_nbr[w] >> x & 1)


@dataclass
class _PairOps:
    kind: str
    x: int
    y: int
    base: int  # T = base | clique  (insert);  H = base & ~clique  (delete)
    struct: list
    count: int

    def subset(self, clique: int) -> int:
        return self.base | clique if self.kind == INSERT else self.base & ~clique


def _pair_ops(g: PDAG) -> list[_PairOps]:
    n = g.n
    ne, pa, ch = g.ne, g.pa, g.ch
    adj = [ne[v] | pa[v] | ch[v] for v in range(n)]
    fwd = [ne[v] | ch[v] for v in range(n)]
    full = (1 << n) - 1
    out = []
    for y in range(n):
        ne_y = ne[y]
        by = 1 << y
        nonadj = full & ~adj[y] & ~by
        if nonadj:
            via_children, per_nbr = _insert_reach(g, y, fwd)
            for x in bits(nonadj & ~via_children):
                ax = adj[x]
                na = ne_y & ax
                cand = ne_y & ~ax
                must = 0
                for w in bits(cand):
                    if per_nbr[w] >> x & 1:
                        must |= 1 << w
                k = na | must
                if not is_clique(k, ne):
                    continue
                free = 0
                for v in bits(cand & ~must):
                    if not k & ~ne[v]:
                        free |= 1 << v
                struct = clique_structure(free, ne)
                out.append(_PairOps(INSERT, x, y, must, struct, _structure_count(struct)))
        for x in bits(ne_y | pa[y]):
            na = ne_y & adj[x]
            struct = clique_structure(na, ne)
            out.append(_PairOps(DELETE, x, y, na, struct, _structure_count(struct)))
    out.sort(key=lambda p: (p.x, p.y))
    return out


@dataclass
class OperatorCount:
    """Numbers of locally valid operators per ordered pair ``(x, y)``."""

    n: int
    inserts: dict[tuple[int, int], int] = field(default_factory=dict)
    deletes: dict[tuple[int, int], int] = field(default_factory=dict)
    pairs: list = field(default_factory=list, repr=False)

    @property
    def insert_total(self) -> int:
        return sum(self.inserts.values())

    @property
    def delete_total(self) -> int:
        return sum(self.deletes.values())

    @property
    def total(self) -> int:
        return self.insert_total + self.delete_total

    def kind_total(self, kind: str | None) -> int:
        if kind is None:
            return self.total
        return self.insert_total if kind == INSERT else self.delete_total

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "insert_total": self.insert_total,
            "delete_total": self.delete_total,
            "total": self.total,
            "pairs": [
                {"x": p.x, "y": p.y, "kind": p.kind, "count": p.count} for p in self.pairs
            ],
        }


def count_operators(g: PDAG) -> OperatorCount:
    """Count all locally valid Insert and Delete operators of the CPDAG ``g``."""
    pairs = _pair_ops(g)
    res = OperatorCount(g.n, pairs=pairs)
    for p in pairs:
        (res.inserts if p.kind == INSERT else res.deletes)[(p.x, p.y)] = p.count
    return res


def _subset_key(op: Operator):
    return (len(op.subset), op.subset)


def list_operators(g: PDAG, kind: str | None = None) -> Iterator[Operator]:
    """Yield every locally valid operator exactly once.

    Pairs come in lexicographic order, subsets within a pair by size and then
    lexicographically. ``kind`` restricts to inserts or deletes.
    """
    for p in _pair_ops(g):
        if kind is not None and p.kind != kind:
            continue
        ops = [Operator(p.kind, p.x, p.y, tuple(bits(p.subset(c)))) for c in _iter_cliques(p.struct)]
        ops.sort(key=_subset_key)
        yield from ops


class EmptySupportError(ValueError):
    pass


def sample_operator_uniform(
    g: PDAG,
    rng,
    kind: str | None = None,
    counts: OperatorCount | None = None,
) -> Operator:
    """Draw a locally valid operator uniformly at random.

    A pair is chosen proportionally to its operator count, then a clique of
    its candidate structure uniformly via a single uniform index.
    """
    if counts is None:
        counts = count_operators(g)
    total = counts.kind_total(kind)
    if total == 0:
        raise EmptySupportError("no valid operators to sample from")
    r = randbelow(rng, total)
    for p in counts.pairs:
        if kind is not None and p.kind != kind:
            continue
        if r < p.count:
            return Operator(p.kind, p.x, p.y, tuple(bits(p.subset(_clique_at(p.struct, r)))))
        r -= p.count
    raise AssertionError("operator counts are inconsistent")

"""Partially directed graphs on vertices ``0..n-1``.

Adjacency is stored as one Python integer bitmask per vertex and per edge
type (undirected neighbours, parents, children). Bitmasks make all the set
algebra in the operator layer (NA sets, clique checks, reachability) cheap
for the graph sizes a sampler sees in practice.
"""

from __future__ import annotations

import heapq
from typing import Iterable, Iterator, Sequence


def bits(mask: int) -> Iterator[int]:
    """Yield the indices of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_mask(vertices: Iterable[int]) -> int:
    mask = 0
    for v in vertices:
        mask |= 1 << v
    return mask


def is_clique(mask: int, nbr: Sequence[int]) -> bool:
    """True if every pair of vertices in ``mask`` is adjacent under ``nbr``."""
    rest = mask
    while rest:
        low = rest & -rest
        rest ^= low
        if rest & ~nbr[low.bit_length() - 1]:
            return False
    return True


class NotChordalError(ValueError):
    """Raised when an undirected structure assumed chordal is not."""


class PDAG:
    """A partially directed graph.

    ``ne[v]``, ``pa[v]`` and ``ch[v]`` are bitmasks of the undirected
    neighbours, parents and children of ``v``. Instances are treated as
    values: operations return new graphs and only exclusively-owned copies
    are mutated.
    """

    __slots__ = ("n", "ne", "pa", "ch")

    def __init__(self, n: int, ne=None, pa=None, ch=None):
        self.n = n
        self.ne = list(ne) if ne is not None else [0] * n
        self.pa = list(pa) if pa is not None else [0] * n
        self.ch = list(ch) if ch is not None else [0] * n

    @classmethod
    def from_edges(cls, n: int, directed=(), undirected=()) -> "PDAG":
        g = cls(n)
        for u, v in directed:
            g.add_directed(u, v)
        for u, v in undirected:
            g.add_undirected(u, v)
        return g

    @classmethod
    def from_parents(cls, n: int, pa: Sequence[int], ne: Sequence[int] | None = None) -> "PDAG":
        ch = [0] * n
        for v in range(n):
            for u in bits(pa[v]):
                ch[u] |= 1 << v
        return cls(n, ne if ne is not None else [0] * n, pa, ch)

    def copy(self) -> "PDAG":
        return PDAG(self.n, self.ne, self.pa, self.ch)

    def _check(self, *vs: int) -> None:
        for v in vs:
            if not 0 <= v < self.n:
                raise ValueError(f"vertex {v} out of range for n={self.n}")

    # -- queries ---------------------------------------------------------

    def adj(self, v: int) -> int:
        return self.ne[v] | self.pa[v] | self.ch[v]

    def is_adjacent(self, u: int, v: int) -> bool:
        return bool(self.adj(u) >> v & 1)

    def has_directed(self, u: int, v: int) -> bool:
        return bool(self.ch[u] >> v & 1)

    def has_undirected(self, u: int, v: int) -> bool:
        return bool(self.ne[u] >> v & 1)

    def neighbors(self, v: int) -> list[int]:
        return list(bits(self.ne[v]))

    def parents(self, v: int) -> list[int]:
        return list(bits(self.pa[v]))

    def children(self, v: int) -> list[int]:
        return list(bits(self.ch[v]))

    @property
    def num_edges(self) -> int:
        return sum(p.bit_count() for p in self.pa) + sum(x.bit_count() for x in self.ne) // 2

    def directed_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in bits(self.ch[u])]

    def undirected_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in bits(self.ne[u] >> (u + 1) << (u + 1))]

    def is_directed(self) -> bool:
        return not any(self.ne)

    # -- mutation (exclusively-owned copies only) ------------------------

    def add_directed(self, u: int, v: int) -> None:
        self._check(u, v)
        if u == v or self.is_adjacent(u, v):
            raise ValueError(f"cannot add {u} -> {v}: self-loop or already adjacent")
        self.ch[u] |= 1 << v
        self.pa[v] |= 1 << u

    def add_undirected(self, u: int, v: int) -> None:
        self._check(u, v)
        if u == v or self.is_adjacent(u, v):
            raise ValueError(f"cannot add {u} -- {v}: self-loop or already adjacent")
        self.ne[u] |= 1 << v
        self.ne[v] |= 1 << u

    def remove_edge(self, u: int, v: int) -> None:
        bu, bv = 1 << u, 1 << v
        self.ne[u] &= ~bv
        self.ne[v] &= ~bu
        self.ch[u] &= ~bv
        self.pa[v] &= ~bu
        self.ch[v] &= ~bu
        self.pa[u] &= ~bv

    def orient(self, u: int, v: int) -> None:
        """Turn ``u -- v`` into ``u -> v``."""
        if not self.has_undirected(u, v):
            raise ValueError(f"{u} -- {v} is not an undirected edge")
        self.remove_edge(u, v)
        self.add_directed(u, v)

    # -- value semantics -------------------------------------------------

    def key(self) -> tuple:
        return (self.n, tuple(self.ne), tuple(self.pa))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PDAG):
            return NotImplemented
        return self.n == other.n and self.ne == other.ne and self.pa == other.pa

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        parts = [f"{u}->{v}" for u, v in self.directed_edges()]
        parts += [f"{u}--{v}" for u, v in self.undirected_edges()]
        return f"PDAG(n={self.n}, [{', '.join(parts)}])"


# -- elementary algorithms -------------------------------------------------


def neighbors_adjacent(g: PDAG, x: int, y: int) -> frozenset[int]:
    """Undirected neighbours of ``y`` that are adjacent to ``x``."""
    g._check(x, y)
    if x == y:
        raise ValueError("x and y must differ")
    return frozenset(bits(g.ne[y] & g.adj(x)))


def topological_order(g: PDAG) -> list[int]:
    """Topological order of the directed part; ValueError on a directed cycle."""
    indeg = [p.bit_count() for p in g.pa]
    stack = [v for v in range(g.n - 1, -1, -1) if indeg[v] == 0]
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        for c in bits(g.ch[v]):
            indeg[c] -= 1
            if indeg[c] == 0:
                stack.append(c)
    if len(order) != g.n:
        raise ValueError("graph has a directed cycle")
    return order


def is_acyclic(g: PDAG) -> bool:
    try:
        topological_order(g)
    except ValueError:
        return False
    return True


def skeleton(g: PDAG) -> frozenset[tuple[int, int]]:
    return frozenset((u, v) for u in range(g.n) for v in bits(g.adj(u)) if u < v)


def v_structures(g: PDAG) -> frozenset[tuple[int, int, int]]:
    """Triples ``(a, b, c)`` with ``a -> b <- c``, ``a < c`` and ``a, c`` nonadjacent."""
    out = []
    for b in range(g.n):
        pas = list(bits(g.pa[b]))
        for i, a in enumerate(pas):
            adj_a = g.adj(a)
            for c in pas[i + 1:]:
                if not adj_a >> c & 1:
                    out.append((a, b, c))
    return frozenset(out)


def same_mec(g1: PDAG, g2: PDAG) -> bool:
    """Markov equivalence of two DAGs: same skeleton and same v-structures."""
    if g1.n != g2.n:
        raise ValueError("graphs have different vertex counts")
    return skeleton(g1) == skeleton(g2) and v_structures(g1) == v_structures(g2)


def chain_components(g: PDAG) -> list[list[int]]:
    """Connected components of the undirected part, each sorted."""
    seen = 0
    comps = []
    for s in range(g.n):
        if seen >> s & 1:
            continue
        comp = frontier = 1 << s
        while frontier:
            nxt = 0
            for v in bits(frontier):
                nxt |= g.ne[v]
            frontier = nxt & ~comp
            comp |= frontier
        seen |= comp
        comps.append(list(bits(comp)))
    return comps


# -- maximum cardinality search --------------------------------------------


def mcs_order(nbr: Sequence[int], vertices: int, prefix: Sequence[int] = ()) -> list[int]:
    """Maximum cardinality search over the vertices in bitmask ``vertices``.

    ``nbr`` gives undirected adjacency. The vertices of ``prefix`` are visited
    first, in the given order; they must form a clique. Afterwards the vertex
    with most visited neighbours is visited next, smallest index on ties.
    """
    visited = 0
    order = []
    count = {}
    heap = []

    def visit(v):
        nonlocal visited
        order.append(v)
        visited |= 1 << v
        for u in bits(nbr[v] & vertices & ~visited):
            c = count.get(u, 0) + 1
            count[u] = c
            heapq.heappush(heap, (-c, u))

    for v in prefix:
        if not vertices >> v & 1 or visited >> v & 1:
            raise ValueError(f"priority prefix vertex {v} repeated or outside the search")
        if visited & ~nbr[v]:
            raise ValueError("priority prefix is not a clique of undirected neighbours")
        visit(v)

    remaining = vertices & ~visited
    while remaining:
        while heap:
            c, u = heapq.heappop(heap)
            if not visited >> u & 1 and count[u] == -c:
                break
        else:
            u = (remaining & -remaining).bit_length() - 1
        visit(u)
        remaining &= ~(1 << u)
    return order


def _check_peo(nbr: Sequence[int], order: Sequence[int]) -> None:
    earlier = 0
    for v in order:
        if not is_clique(nbr[v] & earlier, nbr):
            raise NotChordalError(f"visit order is not a perfect elimination order at vertex {v}")
        earlier |= 1 << v


def mcs_extension(g: PDAG, prefix: Sequence[int] = ()) -> PDAG:
    """Consistent DAG extension of the CPDAG ``g``.

    Undirected edges are oriented from earlier to later vertices of an MCS
    visit order whose first vertices are ``prefix``; directed edges are kept.
    The prefix must be a clique inside one chain component.
    """
    n = g.n
    order = mcs_order(g.ne, (1 << n) - 1, prefix)
    if __debug__:
        _check_peo(g.ne, order)
    pa = list(g.pa)
    earlier = 0
    for v in order:
        pa[v] |= g.ne[v] & earlier
        earlier |= 1 << v
    return PDAG.from_parents(n, pa)


# -- DAG to CPDAG ----------------------------------------------------------


def dag_to_cpdag(g: PDAG) -> PDAG:
    """Completed PDAG of the Markov equivalence class of the DAG ``g``.

    Compelled/reversible edge labelling over a topological order: for every
    vertex ``y`` only the edge from its latest parent needs inspecting, and
    its outcome fixes the labels of all edges into ``y``.
    """
    if not g.is_directed():
        raise ValueError("dag_to_cpdag expects a directed graph")
    order = topological_order(g)
    pos = [0] * g.n
    for i, v in enumerate(order):
        pos[v] = i
    pa = g.pa
    compelled = [0] * g.n
    for y in order:
        pay = pa[y]
        if not pay:
            continue
        x = max(bits(pay), key=pos.__getitem__)
        cy = 0
        for w in bits(compelled[x]):
            if not pay >> w & 1:
                cy = pay
                break
            cy |= 1 << w
        else:
            if pay & ~pa[x] & ~(1 << x):
                cy = pay
        compelled[y] = cy
    ne = [0] * g.n
    for y in range(g.n):
        rev = pa[y] & ~compelled[y]
        ne[y] |= rev
        for u in bits(rev):
            ne[u] |= 1 << y
    return PDAG.from_parents(g.n, compelled, ne)


def is_chordal(nbr: Sequence[int], vertices: int) -> bool:
    try:
        _check_peo(nbr, mcs_order(nbr, vertices))
    except NotChordalError:
        return False
    return True


# -- random graphs ---------------------------------------------------------


def random_dag(n: int, p: float, rng) -> PDAG:
    """Erdos-Renyi DAG: a random vertex order with each forward edge kept w.p. ``p``."""
    perm = rng.permutation(n)
    keep = rng.random((n, n)) < p
    pa = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if keep[i, j]:
                pa[int(perm[j])] |= 1 << int(perm[i])
    return PDAG.from_parents(n, pa)


def random_cpdag(n: int, p: float, rng) -> PDAG:
    return dag_to_cpdag(random_dag(n, p, rng))


# -- text format -----------------------------------------------------------


def parse_graph(text: str) -> tuple[PDAG, list[str]]:
    """Parse the edge-list format.

    One item per line: ``a -> b``, ``a -- b``, or a list of bare vertex names
    (declares vertices, e.g. isolated ones). ``#`` starts a comment. Vertices
    are numbered in order of first appearance.
    """
    names: list[str] = []
    index: dict[str, int] = {}
    edges = []

    def vid(name):
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) == 3 and tok[1] in ("->", "--"):
            edges.append((vid(tok[0]), tok[1], vid(tok[2])))
        elif "->" in tok or "--" in tok:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        else:
            for name in tok:
                vid(name)
    g = PDAG(len(names))
    for u, kind, v in edges:
        if kind == "->":
            g.add_directed(u, v)
        else:
            g.add_undirected(u, v)
    return g, names


def format_graph(g: PDAG, names: Sequence[str] | None = None) -> str:
    """Inverse of :func:`parse_graph`; the first line declares all vertices in order."""
    if names is None:
        names = [str(v) for v in range(g.n)]
    lines = [" ".join(names[:g.n])] if g.n else []
    lines += [f"{names[u]} -> {names[v]}" for u, v in g.directed_edges()]
    lines += [f"{names[u]} -- {names[v]}" for u, v in g.undirected_edges()]
    return "\n".join(lines)

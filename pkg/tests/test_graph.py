import itertools

import numpy as np
import pytest

from causal_zigzag.graph import (
    PDAG,
    chain_components,
    dag_to_cpdag,
    format_graph,
    is_acyclic,
    is_chordal,
    mcs_extension,
    mcs_order,
    parse_graph,
    random_cpdag,
    random_dag,
    same_mec,
    skeleton,
    topological_order,
    v_structures,
)
from causal_zigzag.oracle import class_members, is_completed, naive_cpdag


def orientations(g):
    """All acyclic orientations of the undirected edges of g preserving v-structures."""
    und = g.undirected_edges()
    vs = v_structures(g)
    for flips in itertools.product((0, 1), repeat=len(und)):
        d = PDAG.from_edges(g.n, g.directed_edges() + [(v, u) if f else (u, v) for (u, v), f in zip(und, flips)])
        if is_acyclic(d) and v_structures(d) == vs:
            yield d


def test_pdag_basics():
    g = PDAG.from_edges(3, directed=[(0, 1)], undirected=[(1, 2)])
    assert g.has_directed(0, 1) and not g.has_directed(1, 0)
    assert g.has_undirected(2, 1)
    assert g.num_edges == 2
    g.remove_edge(2, 1)
    assert g.num_edges == 1
    with pytest.raises(ValueError):
        g.add_directed(0, 0)


def test_mcs_extension_path_with_prefix():
    g = PDAG.from_edges(3, undirected=[(0, 1), (1, 2)])
    for prefix in [(), (1,), (0,), (2,), (1, 0)]:
        d = mcs_extension(g, prefix)
        assert d in set(orientations(g))
        if prefix:
            assert d.pa[prefix[0]] == 0


def test_mcs_extension_keeps_directed():
    g = PDAG.from_edges(3, directed=[(0, 1), (2, 1)])
    assert mcs_extension(g) == g


def test_mcs_extension_exhaustive(small_cpdags):
    for g in small_cpdags:
        valid = set(orientations(g))
        for v in range(g.n):
            # a single-vertex prefix inside a chain component is always allowed
            assert mcs_extension(g, [v] if g.ne[v] else []) in valid


def test_mcs_order_bad_prefix():
    nbr = [0b10, 0b01]
    with pytest.raises(ValueError):
        mcs_order(nbr, 0b11, [0, 0])


def test_collider_unchanged():
    g = PDAG.from_edges(3, directed=[(0, 1), (2, 1)])
    assert dag_to_cpdag(g) == g


def test_dag_to_cpdag_matches_meek(rng):
    for _ in range(200):
        d = random_dag(7, 0.4, rng)
        c = dag_to_cpdag(d)
        assert c == naive_cpdag(d)
        assert is_completed(c)
        assert same_mec(d, mcs_extension(c))


def test_class_members_complete_to_same_cpdag(catalogs):
    for c, members in zip(catalogs[4].cpdags, catalogs[4].members):
        assert {dag_to_cpdag(m) for m in members} == {c}
        assert set(class_members(c)) == set(members)


def test_chain_components_chordal(rng):
    for _ in range(50):
        c = random_cpdag(10, 0.3, rng)
        comps = chain_components(c)
        assert sorted(v for comp in comps for v in comp) == list(range(10))
        for comp in comps:
            mask = sum(1 << v for v in comp)
            assert is_chordal(c.ne, mask)


def test_is_chordal_cycle():
    four = [0b1010, 0b0101, 0b1010, 0b0101]
    assert not is_chordal(four, 0b1111)
    four[0] |= 0b0100
    four[2] |= 0b0001
    assert is_chordal(four, 0b1111)


def test_topological_order_and_cycle():
    d = PDAG.from_edges(3, directed=[(2, 1), (1, 0)])
    assert topological_order(d) == [2, 1, 0]
    cyc = PDAG.from_edges(3, directed=[(0, 1), (1, 2), (2, 0)])
    assert not is_acyclic(cyc)


def test_text_roundtrip(rng):
    for _ in range(20):
        c = random_cpdag(6, 0.4, rng)
        names = [f"v{i}" for i in range(6)]
        g, parsed = parse_graph(format_graph(c, names))
        assert parsed == names and g == c


def test_parse_errors_and_comments():
    g, names = parse_graph("# header\na -> b  # edge\nc\n")
    assert names == ["a", "b", "c"] and g.has_directed(0, 1)
    with pytest.raises(ValueError):
        parse_graph("a -> b -> c")


def test_skeleton_symmetric():
    g = PDAG.from_edges(3, directed=[(0, 1)], undirected=[(2, 1)])
    assert skeleton(g) == frozenset({(0, 1), (1, 2)})


def test_neighbors_adjacent_examples():
    from causal_zigzag.graph import neighbors_adjacent

    a, b, c = range(3)
    tri = PDAG.from_edges(3, undirected=[(a, b), (b, c), (a, c)])
    assert neighbors_adjacent(tri, a, c) == {b}
    assert neighbors_adjacent(PDAG(3), a, b) == set()
    collider = PDAG.from_edges(3, directed=[(a, b), (c, b)])
    assert neighbors_adjacent(collider, a, c) == set()
    with pytest.raises(ValueError):
        neighbors_adjacent(tri, a, 7)


def test_same_mec_examples():
    a, b, c = range(3)
    fwd = PDAG.from_edges(3, directed=[(a, b), (b, c)])
    back = PDAG.from_edges(3, directed=[(c, b), (b, a)])
    collider = PDAG.from_edges(3, directed=[(a, b), (c, b)])
    assert same_mec(fwd, back) and same_mec(fwd, fwd)
    assert not same_mec(collider, fwd)


def test_dag_to_cpdag_examples():
    chain = PDAG.from_edges(3, directed=[(0, 1), (1, 2)])
    assert dag_to_cpdag(chain) == PDAG.from_edges(3, undirected=[(0, 1), (1, 2)])
    assert dag_to_cpdag(PDAG(4)) == PDAG(4)
    with pytest.raises(ValueError):
        dag_to_cpdag(PDAG.from_edges(3, directed=[(0, 1), (1, 2), (2, 0)]))


def test_extension_roundtrip(small_cpdags):
    for g in small_cpdags:
        assert dag_to_cpdag(mcs_extension(g)) == g


def test_cpdag_equality_iff_same_mec(catalogs):
    from causal_zigzag.oracle import enumerate_dags

    for n in (3, 4):
        dags = list(enumerate_dags(n))
        cp = [dag_to_cpdag(d) for d in dags]
        if n == 3:
            for i, j in itertools.combinations(range(len(dags)), 2):
                assert (cp[i] == cp[j]) == same_mec(dags[i], dags[j])
        else:
            keys = [(skeleton(d), v_structures(d)) for d in dags]
            assert len(set(zip(keys, cp))) == len(set(keys)) == len(set(cp))


def test_chain_components_chordal_n5():
    from causal_zigzag.oracle import enumerate_mecs

    for c in enumerate_mecs(5).cpdags:
        for comp in chain_components(c):
            assert is_chordal(c.ne, sum(1 << v for v in comp))

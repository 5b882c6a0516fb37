import itertools
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from causal_zigzag.graph import PDAG, dag_to_cpdag, random_cpdag
from causal_zigzag.operators import (
    DELETE,
    INSERT,
    ContractError,
    EmptySupportError,
    InvalidOperatorError,
    Operator,
    apply_operator,
    count_cliques,
    count_operators,
    delete,
    delete_valid,
    insert,
    insert_valid,
    inverse_operator,
    list_operators,
    must_take_set,
    parse_operator,
    sample_operator_uniform,
)
from causal_zigzag.oracle import brute_force_operators, naive_apply

A, B, C, D, E = range(5)


def long_path():
    g = dag_to_cpdag(PDAG.from_edges(5, directed=[(C, B), (B, D), (E, D), (D, A)]))
    assert g == PDAG.from_edges(5, directed=[(B, D), (E, D), (D, A)], undirected=[(C, B)])
    return g


@pytest.fixture
def gamma():
    return PDAG.from_edges(4, undirected=[(A, B), (A, C), (A, D), (C, D)])


def brute_cliques(nbr, n):
    return sum(
        all(nbr[u] >> v & 1 for u, v in itertools.combinations(s, 2))
        for k in range(n + 1)
        for s in itertools.combinations(range(n), k)
    )


# -- validity --


def test_insert_valid_examples(gamma):
    assert insert_valid(PDAG(2), 0, 1)
    assert insert_valid(gamma, B, D, {C})
    path = PDAG.from_edges(3, undirected=[(A, B), (B, C)])
    # c - b - a is semi-directed and NA_a(c) = {b} blocks it
    assert insert_valid(path, A, C, set())
    # c - b -> d -> a is semi-directed and avoids NA_a(c) = {}; b must enter T
    g = long_path()
    assert not insert_valid(g, A, C, set())
    assert insert_valid(g, A, C, {B})
    assert not insert_valid(gamma, A, B)  # adjacent
    assert not insert_valid(gamma, B, D, {A})  # A is adjacent to B


def test_delete_valid_examples():
    edge = PDAG.from_edges(2, undirected=[(0, 1)])
    assert delete_valid(edge, 0, 1)
    tri = PDAG.from_edges(3, undirected=[(A, B), (B, C), (A, C)])
    assert delete_valid(tri, A, B)
    assert delete_valid(tri, A, B, {C})
    arrow = PDAG.from_edges(2, directed=[(A, B)])
    assert not delete_valid(arrow, B, A)
    assert delete_valid(arrow, A, B)


def test_validity_matches_definition(small_cpdags):
    for g in small_cpdags:
        found = set(brute_force_operators(g))
        for x, y in itertools.permutations(range(g.n), 2):
            for k in range(g.n - 1):
                for s in itertools.combinations([v for v in range(g.n) if v not in (x, y)], k):
                    assert insert_valid(g, x, y, s) == (insert(x, y, s) in found)
                    assert delete_valid(g, x, y, s) == (delete(x, y, s) in found)


def test_invalid_apply_raises(gamma):
    with pytest.raises(InvalidOperatorError) as e:
        apply_operator(gamma, insert(A, B))
    assert "adjacent" in str(e.value)


# -- application --


def test_insert_with_t_orients_into_y(gamma):
    out = apply_operator(gamma, insert(B, D, {C}))
    expected = PDAG.from_edges(4, directed=[(B, D), (A, D), (C, D)], undirected=[(A, B), (A, C)])
    assert out == expected
    assert naive_apply(gamma, insert(B, D, {C})) == expected


def test_single_edge_roundtrip():
    g = apply_operator(PDAG(2), insert(0, 1))
    assert g == PDAG.from_edges(2, undirected=[(0, 1)])
    assert apply_operator(g, delete(0, 1)) == PDAG(2)
    assert inverse_operator(PDAG(2), insert(0, 1), g) == delete(0, 1)


def test_fast_apply_matches_naive(small_cpdags):
    for g in small_cpdags:
        for op in list_operators(g):
            assert apply_operator(g, op) == naive_apply(g, op), (g, op)


def test_fast_apply_matches_naive_random(rng):
    for _ in range(30):
        g = random_cpdag(9, 0.3, rng)
        ops = list(list_operators(g))
        for i in rng.choice(len(ops), size=min(10, len(ops)), replace=False):
            assert apply_operator(g, ops[i]) == naive_apply(g, ops[i])


def test_inverse_roundtrip_unique(small_cpdags):
    for g in small_cpdags:
        for op in list_operators(g):
            nxt = apply_operator(g, op)
            inv = inverse_operator(g, op, nxt)
            assert inv.kind != op.kind and (inv.x, inv.y) == (op.x, op.y)
            assert apply_operator(nxt, inv) == g
            back = [o for o in list_operators(nxt, inv.kind)
                    if (o.x, o.y) == (op.x, op.y) and apply_operator(nxt, o) == g]
            assert back == [inv]


def test_inverse_contract_error(gamma):
    with pytest.raises(ContractError):
        inverse_operator(gamma, insert(B, D, {C}), gamma)


def test_undirected_insert_criterion(small_cpdags):
    for g in small_cpdags:
        for op in list_operators(g, INSERT):
            out = apply_operator(g, op)
            undirected = out.has_undirected(op.x, op.y)
            assert undirected == (not op.subset and g.pa[op.x] == g.pa[op.y])


def test_reverse_pair_symmetry(catalogs):
    for n in range(1, 5):
        moves = Counter()
        for g in catalogs[n].cpdags:
            for op in list_operators(g):
                moves[(g, apply_operator(g, op))] += 1
        for (g, h), k in moves.items():
            assert moves[(h, g)] == k


# -- counting, listing, sampling --


def test_count_cliques_examples():
    assert count_cliques([0b110, 0b101, 0b011]) == 8
    assert count_cliques([0b010, 0b101, 0b010]) == 6
    assert count_cliques([0] * 5) == 6
    assert count_cliques([0, 0]) == 3
    with pytest.raises(ValueError):
        count_cliques([0b1010, 0b0101, 0b1010, 0b0101])


def test_count_cliques_random_chordal(rng):
    for _ in range(40):
        g = random_cpdag(8, 0.5, rng)
        assert count_cliques(g.ne) == brute_cliques(g.ne, g.n)


def test_count_cliques_big_integers():
    n = 80
    full = [((1 << n) - 1) & ~(1 << v) for v in range(n)]
    assert count_cliques(full) == 2 ** n


def test_must_take_set():
    assert must_take_set(PDAG(3), 0, 1) == frozenset()
    g = long_path()
    assert must_take_set(g, A, C) == frozenset({B})
    valid = [set(op.subset) for op in brute_force_operators(g) if op.kind == INSERT and (op.x, op.y) == (A, C)]
    assert valid and all(B in t for t in valid)
    # every undirected neighbour of y adjacent to x: nothing to take
    assert must_take_set(PDAG.from_edges(3, undirected=[(0, 1), (1, 2)]), 0, 2) == frozenset()


def test_must_take_matches_brute_force(small_cpdags):
    for g in small_cpdags:
        for x, y in itertools.permutations(range(g.n), 2):
            if g.is_adjacent(x, y):
                continue
            ts = [set(op.subset) for op in brute_force_operators(g)
                  if op.kind == INSERT and (op.x, op.y) == (x, y)]
            if ts:
                assert must_take_set(g, x, y) <= set.intersection(*ts)


def test_count_examples():
    c = count_operators(PDAG(4))
    assert (c.insert_total, c.delete_total) == (12, 0)
    assert count_operators(PDAG(1)).total == 0
    full = PDAG.from_edges(3, undirected=[(0, 1), (1, 2), (0, 2)])
    assert count_operators(full).total == len(brute_force_operators(full))
    assert list(list_operators(PDAG(2))) == [insert(0, 1), insert(1, 0)]


def test_count_list_brute(small_cpdags):
    for g in small_cpdags:
        listed = list(list_operators(g))
        assert len(listed) == len(set(listed)) == count_operators(g).total
        assert sorted(listed) == sorted(brute_force_operators(g))


def test_count_list_random(rng):
    for _ in range(100):
        g = random_cpdag(10, 0.2, rng)
        assert sorted(list_operators(g)) == sorted(brute_force_operators(g))


def test_list_order_deterministic(rng):
    g = random_cpdag(8, 0.4, rng)
    ops = list(list_operators(g))
    assert ops == list(list_operators(g))
    pairs = [(o.x, o.y) for o in ops]
    assert pairs == sorted(pairs)


def test_uniform_sampling_chi2(rng):
    g = PDAG(3)
    draws = Counter(sample_operator_uniform(g, rng) for _ in range(60000))
    ops = list(list_operators(g))
    assert set(draws) == set(ops)
    assert chisquare([draws[o] for o in ops]).pvalue > 1e-3


def test_uniform_sampling_within_3_sigma(catalogs, rng):
    for g in catalogs[3].cpdags:
        ops = list(list_operators(g))
        m = 3000
        draws = Counter(sample_operator_uniform(g, rng) for _ in range(m))
        p = 1 / len(ops)
        sd = (m * p * (1 - p)) ** 0.5
        for o in ops:
            assert abs(draws[o] - m * p) <= 4 * sd


def test_uniform_sampling_kind_and_empty(rng):
    edge = PDAG.from_edges(2, undirected=[(0, 1)])
    assert {sample_operator_uniform(edge, rng, DELETE) for _ in range(50)} == {delete(0, 1), delete(1, 0)}
    with pytest.raises(EmptySupportError):
        sample_operator_uniform(edge, rng, INSERT)
    with pytest.raises(EmptySupportError):
        sample_operator_uniform(PDAG(1), rng)


def test_operator_text_roundtrip():
    op = insert(1, 2, {0, 3})
    assert str(op) == "Insert 1 2 {0,3}"
    assert parse_operator(str(op)) == op
    names = ["a", "b", "c", "d"]
    assert parse_operator(op.format(names), {n: i for i, n in enumerate(names)}) == op
    with pytest.raises(ValueError):
        parse_operator("Move 1 2 {}")

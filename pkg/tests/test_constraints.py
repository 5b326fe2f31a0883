import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import matroid_battery
from submax.constraints import (CallbackConstraint, GraphicMatroid, PartitionMatroid, PSystem, UniformMatroid,
                                exchange_bijection, in_matroid_polytope, is_independent,
                                matroid_decomposition, matroid_rank)
from submax.errors import DomainError, InvalidConfiguration, PreconditionError

K4 = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def subsets(items):
    items = list(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def test_independence_examples():
    u = UniformMatroid(6, 3)
    assert is_independent(u, [0, 1, 2]) and not is_independent(u, [0, 1, 2, 3])
    p = PartitionMatroid(4, [[0, 1], [2, 3]], [1, 1])
    assert is_independent(p, [0, 2]) and not is_independent(p, [0, 1])
    cycle = GraphicMatroid([(0, 1), (1, 2), (2, 3), (3, 0)])
    assert is_independent(cycle, [0, 1, 2]) and not is_independent(cycle, [0, 1, 2, 3])
    for c in (u, p, cycle):
        assert is_independent(c, [])


def test_out_of_range_elements_rejected():
    with pytest.raises(PreconditionError):
        UniformMatroid(3, 1).is_independent([3])
    with pytest.raises(InvalidConfiguration):
        PartitionMatroid(3, [[0, 1], [1, 2]], [1, 1])
    with pytest.raises(InvalidConfiguration):
        UniformMatroid(3, -1)


def test_rank_examples():
    assert matroid_rank(UniformMatroid(5, 2), []) == 0
    for t in range(6):
        assert matroid_rank(UniformMatroid(5, 2), range(t)) == min(t, 2)
    assert matroid_rank(GraphicMatroid(K4), range(6)) == 3


def test_k_values():
    assert UniformMatroid(5, 2).k == 2
    assert PartitionMatroid(6, [[0, 1, 2], [3]], [2, 1]).k == 5  # 4, 5 are unconstrained
    assert GraphicMatroid(K4).k == 3
    inter = PSystem([PartitionMatroid(4, [[0, 1], [2, 3]], [1, 1]),
                     PartitionMatroid(4, [[0, 2], [1, 3]], [1, 1])])
    assert inter.p == 2 and inter.k == 2 and not inter.is_matroid


@pytest.mark.parametrize("idx", range(4))
def test_hereditary_exhaustive(idx):
    c = matroid_battery(10, seed=idx)[idx]
    indep = {S for S in subsets(range(10)) if c.is_independent(S)}
    for S in indep:
        for e in S:
            assert tuple(a for a in S if a != e) in indep
    assert max(len(S) for S in indep) == c.k


@pytest.mark.parametrize("idx", range(4))
def test_rank_axioms_exhaustive(idx):
    mat = matroid_battery(8, seed=idx)[idx]
    rank = {S: mat.rank(S) for S in subsets(range(8))}
    for S, r in rank.items():
        assert 0 <= r <= len(S)
        for e in range(8):
            if e in S:
                continue
            T = tuple(sorted(S + (e,)))
            assert rank[T] - r in (0, 1)
            # submodularity: marginal of e shrinks on supersets
            for extra in range(8):
                if extra in T:
                    continue
                S2 = tuple(sorted(S + (extra,)))
                T2 = tuple(sorted(T + (extra,)))
                assert rank[T] - r >= rank[T2] - rank[S2]


@pytest.mark.parametrize("idx", range(4))
def test_exchange_axiom_sampled(idx):
    mat = matroid_battery(9, seed=idx)[idx]
    rng = np.random.default_rng(idx)
    indep = [S for S in subsets(range(9)) if mat.is_independent(S)]
    for _ in range(300):
        A, B = (indep[i] for i in rng.integers(len(indep), size=2))
        if len(A) < len(B):
            assert any(mat.is_independent(set(A) | {e}) for e in set(B) - set(A))


@pytest.mark.parametrize("idx", range(4))
def test_greedy_is_max_weight(idx):
    mat = matroid_battery(9, seed=idx)[idx]
    rng = np.random.default_rng(100 + idx)
    indep = [S for S in subsets(range(9)) if mat.is_independent(S)]
    for _ in range(5):
        w = rng.normal(size=9)
        best = max(sum(w[list(S)]) for S in indep)
        got = mat.max_weight_independent(w)
        assert mat.is_independent(got)
        assert sum(w[got]) == pytest.approx(best)


def test_exchange_bijection_examples():
    u = UniformMatroid(6, 3)
    assert exchange_bijection(u, [0, 1, 2], [0, 1, 2]) == {0: 0, 1: 1, 2: 2}
    assert exchange_bijection(u, [0, 1, 2], [1, 4, 5]) == {1: 1, 0: 4, 2: 5}
    with pytest.raises(PreconditionError):
        exchange_bijection(u, [0, 1], [2, 3, 4])
    with pytest.raises(PreconditionError):
        exchange_bijection(u, [0, 1], [2, 3])  # rank of the union is 3


def spanning_trees(edges, n_vertices):
    g = GraphicMatroid(edges)
    return [T for T in itertools.combinations(range(len(edges)), n_vertices - 1) if g.is_independent(T)]


def test_exchange_bijection_k4_all_tree_pairs():
    g = GraphicMatroid(K4)
    trees = spanning_trees(K4, 4)
    assert len(trees) == 16
    for T1, T2 in itertools.product(trees, repeat=2):
        pi = exchange_bijection(g, T1, T2)
        assert sorted(pi) == sorted(T1) and sorted(pi.values()) == sorted(T2)
        for e, f in pi.items():
            assert g.is_independent(set(T1) - {e} | {f})
            if e in T2:
                assert f == e


def test_p_system_intersection():
    a = PartitionMatroid(4, [[0, 1], [2, 3]], [1, 1])
    b = PartitionMatroid(4, [[0, 2], [1, 3]], [1, 1])
    inter = PSystem([a, b])
    assert inter.is_independent([0, 3]) and not inter.is_independent([0, 2])
    assert list(np.flatnonzero(inter.addable([0], [1, 2, 3]))) == [2]


def test_callback_constraint():
    c = CallbackConstraint(5, lambda S: sum(S) <= 4)
    assert c.is_independent([0, 4]) and not c.is_independent([2, 3])
    assert c.k == 3  # {0, 1, 2} or {0, 1, 3}


def test_addable_matches_independence():
    for mat in matroid_battery(10, seed=5):
        rng = np.random.default_rng(5)
        for _ in range(30):
            S = [e for e in range(10) if rng.random() < 0.3]
            if not mat.is_independent(S):
                continue
            ok = mat.addable(S, np.arange(10))
            for e in range(10):
                assert ok[e] == (e not in S and mat.is_independent(S + [e]))


def convex_point(mat, rng, terms=4):
    indep = [S for S in subsets(range(mat.n)) if mat.is_independent(S)]
    lam = rng.dirichlet(np.ones(terms)) * rng.uniform(0.5, 1.0)
    x = np.zeros(mat.n)
    for w, i in zip(lam, rng.integers(len(indep), size=terms)):
        x[list(indep[i])] += w
    return x


@pytest.mark.parametrize("idx", range(4))
def test_decomposition_round_trip(idx):
    mat = matroid_battery(8, seed=idx)[idx]
    rng = np.random.default_rng(idx)
    for _ in range(10):
        x = convex_point(mat, rng)
        terms = matroid_decomposition(mat, x)
        recon = np.zeros(8)
        for w, S in terms:
            assert w > 0 and mat.is_independent(S)
            recon[S] += w
        assert np.max(np.abs(recon - x)) <= 1e-9
        assert sum(w for w, _ in terms) <= 1 + 1e-9
        assert len(terms) <= 9


def test_decomposition_edge_cases():
    mat = GraphicMatroid(K4)
    assert matroid_decomposition(mat, np.zeros(6)) == []
    x = np.zeros(6)
    x[[0, 1, 2]] = 1.0
    assert matroid_decomposition(mat, x) == [(1.0, [0, 1, 2])]
    bad = np.zeros(6)
    bad[[0, 1, 3]] = 1.0  # triangle 0-1-2
    assert not in_matroid_polytope(mat, bad)
    with pytest.raises(DomainError):
        matroid_decomposition(UniformMatroid(3, 1), [0.6, 0.6, 0.0])
    assert in_matroid_polytope(UniformMatroid(3, 1), [0.5, 0.5, 0.0])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 12), k=st.integers(1, 4))
def test_uniform_decomposition_property(seed, n, k):
    rng = np.random.default_rng(seed)
    mat = UniformMatroid(n, k)
    x = rng.random(n)
    x *= min(1.0, k / x.sum())
    terms = matroid_decomposition(mat, x)
    recon = np.zeros(n)
    for w, S in terms:
        assert len(S) <= k
        recon[S] += w
    assert np.allclose(recon, x, atol=1e-9)

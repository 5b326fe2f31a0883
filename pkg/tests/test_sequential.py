import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import coverage_battery, cut_battery, matroid_battery
from submax.constraints import PartitionMatroid, PSystem, UniformMatroid
from submax.core import GroundSet, RandomnessVector, RandomStream
from submax.errors import InvalidConfiguration
from submax.functions import FractionalPoint, GraphCutFunction, ModularFunction, multilinear_exact_small
from submax.instances import random_partition_matroid
from submax.sequential import (dc_greedy, dcgreedy_plugin, decompose_fractional, default_ell, dthresh_greedy,
                               greedy, greedy_alpha, greedy_plugin, greedy_sequence, greedy_step,
                               steps_for, swap_rounding)
from submax.testoracle import brute_force_opt, check_consistency, strong_greedy_margin


def test_greedy_modular(modular4):
    out = greedy(modular4, UniformMatroid(4, 2), range(4))
    assert list(out.sol) == [0, 1] and out.sol == out.rel
    assert modular4.value(out.sol) == 8


def test_greedy_empty_input(modular4):
    out = greedy(modular4, UniformMatroid(4, 2), [])
    assert len(out.sol) == 0 and len(out.rel) == 0


def test_greedy_coverage_tie_break(small_coverage):
    c = UniformMatroid(4, 2)
    assert greedy_sequence(small_coverage, c, range(4)) == [0, 1]
    _, opt = brute_force_opt(small_coverage, c, range(4))
    assert small_coverage.value([0, 1]) == opt == 4


def test_greedy_stops_at_nonpositive_gain():
    cut = GraphCutFunction(3, [(0, 1, 1.0), (1, 2, 1.0)])
    out = greedy(cut, UniformMatroid(3, 3), range(3))
    assert list(out.sol) == [1]


def test_dthresh_examples(modular4):
    assert list(dthresh_greedy(modular4, UniformMatroid(4, 2), range(4), 0.1).sol) == [0, 1]
    zero = ModularFunction([0.0])
    assert len(dthresh_greedy(zero, UniformMatroid(1, 1), [0], 0.5).sol) == 0
    assert len(dthresh_greedy(modular4, UniformMatroid(4, 2), [], 0.5).sol) == 0
    with pytest.raises(InvalidConfiguration):
        dthresh_greedy(modular4, UniformMatroid(4, 2), range(4), 0.0)


def test_dthresh_close_to_greedy():
    eps = 0.1
    good = 0
    fs = coverage_battery(200, 20, seed=21, density=0.15)
    for f in fs:
        c = UniformMatroid(20, 5)
        good += f.value(dthresh_greedy(f, c, range(20), eps).sol) >= (1 - eps) * f.value(greedy(f, c, range(20)).sol)
    assert good >= 0.95 * len(fs)


def test_dthresh_strong_greedy_property():
    eps = 0.1
    fs = coverage_battery(10, 10, seed=22) + cut_battery(10, 10, seed=22)
    ok = 0
    for i, f in enumerate(fs):
        mat = matroid_battery(10, seed=i)[i % 4]
        margin = strong_greedy_margin(f, mat, 0.5 - eps,
                                      greedy_alg=lambda M: dthresh_greedy(f, mat, M, eps).sol)
        ok += margin >= -1e-9
    assert ok >= 0.95 * len(fs)


@pytest.mark.parametrize("seed", range(6))
def test_greedy_strong_property_matroids(seed):
    for f in coverage_battery(1, 11, seed=seed) + cut_battery(1, 11, seed=seed):
        for mat in matroid_battery(11, seed=seed):
            assert strong_greedy_margin(f, mat, 0.5) >= -1e-9


def test_greedy_strong_property_p_system():
    rng = np.random.default_rng(3)
    for seed in range(4):
        members = [random_partition_matroid(10, 4, 1, rng) for _ in range(2)]
        c = PSystem(members)
        f = coverage_battery(1, 10, seed=seed)[0]
        assert strong_greedy_margin(f, c, 1 / 3) >= -1e-9


def test_greedy_alpha_values():
    assert greedy_alpha(UniformMatroid(4, 2)) == pytest.approx(1 - 1 / math.e)
    assert greedy_alpha(PartitionMatroid(4, [[0, 1]], [1])) == 0.5
    assert greedy_alpha(PSystem([UniformMatroid(4, 2)] * 3)) == 0.25


def test_steps_for_requires_reciprocal():
    assert steps_for(0.25) == 4 and steps_for(1.0) == 1
    with pytest.raises(InvalidConfiguration):
        steps_for(0.3)
    assert default_ell(3, 10, 0.25) == math.ceil(4 * 3 * math.log(10) / 0.0625)


def test_greedy_step_negative_marginals_give_empty_update():
    # star centred at 0; with the centre saturated every leaf has marginal -1
    cut = GraphCutFunction(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
    x = FractionalPoint.from_dense([1.0, 0.0, 0.0, 0.0])
    b = RandomnessVector(RandomStream(0), 4, 20, 10)
    y, W = greedy_step(cut, UniformMatroid(4, 4), [1, 2, 3], x, 0.5, b, 1)
    assert len(W) == 0 and y.index.size == 0


def test_greedy_step_modular_single_step():
    f = ModularFunction([2.0, 1.0])
    b = RandomnessVector(RandomStream(1), 2, 10, 4)
    y, W = greedy_step(f, UniformMatroid(2, 1), [0, 1], FractionalPoint.zeros(2), 0.5, b, 1)
    assert list(W) == [0] and y[0] == 0.5 and y[1] == 0.0


def test_greedy_step_sampled_matches_exact_weights():
    agree = 0
    for seed in range(100):
        f = coverage_battery(1, 8, seed=seed)[0]
        mat = UniformMatroid(8, 2)
        trace = []
        dc_greedy(f, mat, range(8), 0.25, None, trace=trace)
        x1 = trace[0].x
        _, W_exact = greedy_step(f, mat, range(8), x1, 0.25, None, 2)
        b = RandomnessVector(RandomStream(seed), 8, 2000, 4 * 3)
        _, W_sampled = greedy_step(f, mat, range(8), x1, 0.25, b, 2)
        agree += W_exact == W_sampled
    assert agree >= 90


def test_dc_greedy_modular_example():
    f = ModularFunction([2.0, 1.0])
    mat = UniformMatroid(2, 1)
    trace = []
    out = dc_greedy(f, mat, [0, 1], 0.5, None, trace=trace)
    assert trace[-1].x[0] == pytest.approx(0.75) and trace[-1].x[1] == 0.0
    assert list(out.rel) == [0] and list(out.sol) == [0]
    # in step 2 both expected marginals equal 1, so sampled weights break the tie either way
    alg = dcgreedy_plugin(f, mat, 0.5)
    firsts = set()
    for seed in range(20):
        trace = []
        sampled = dc_greedy(f, mat, [0, 1], 0.5, alg.draw_b(RandomStream(seed)), trace=trace)
        firsts.add(tuple(trace[0].W))
        assert len(sampled.sol) == 1 and set(sampled.sol) <= set(sampled.rel)
    assert firsts == {(0,)}


def test_dc_greedy_empty_input():
    f = ModularFunction([2.0, 1.0])
    out = dc_greedy(f, UniformMatroid(2, 1), [], 0.5, None)
    assert len(out.sol) == 0 and len(out.rel) == 0


def test_dc_greedy_requires_integral_steps():
    f = ModularFunction([2.0, 1.0])
    with pytest.raises(InvalidConfiguration):
        dc_greedy(f, UniformMatroid(2, 1), [0, 1], 0.3, None)
    small = RandomnessVector(RandomStream(0), 2, 5, 1)
    with pytest.raises(InvalidConfiguration):
        dc_greedy(f, UniformMatroid(2, 1), [0, 1], 0.5, small)


def test_dc_greedy_fractional_quality():
    eps = 0.25
    good = total = 0
    for inst in range(3):
        f = coverage_battery(1, 10, seed=40 + inst)[0]
        mat = random_partition_matroid(10, 3, 1, 40 + inst)
        _, opt = brute_force_opt(f, mat, range(10))
        alg = dcgreedy_plugin(f, mat, eps)
        for seed in range(10):
            trace = []
            dc_greedy(f, mat, range(10), eps, alg.draw_b(RandomStream(seed)), trace=trace)
            good += multilinear_exact_small(f, trace[-1].x) >= (1 - 1 / math.e - 0.3) * opt
            total += 1
    assert good >= 0.9 * total


def test_dc_greedy_trace_invariants():
    eps = 0.25
    for i, f in enumerate(coverage_battery(3, 9, seed=50) + cut_battery(3, 9, seed=50)):
        mat = matroid_battery(9, seed=i)[i % 4]
        alg = dcgreedy_plugin(f, mat, eps, ell=200)
        trace = []
        out = dc_greedy(f, mat, range(9), eps, alg.draw_b(RandomStream(i)), trace=trace)
        prev = np.zeros(9)
        for state in trace:
            x = state.x.dense()
            assert x.max() <= 1 - (1 - eps) ** state.t + 1e-12
            assert mat.is_independent(state.W)
            for e in state.y.index:
                assert state.y[e] == eps * (1 - prev[e])
            assert np.allclose(x - prev, state.y.dense())
            prev = x
        assert mat.is_independent(out.sol)
        assert out.rel == trace[-1].x.support()
        assert len(out.rel) <= alg.s


def test_swap_rounding_integral_point():
    mat = UniformMatroid(5, 3)
    x = FractionalPoint.indicator([1, 3], 5)
    assert list(swap_rounding(mat, x, RandomStream(0))) == [1, 3]


def test_swap_rounding_two_point_law():
    mat = UniformMatroid(2, 1)
    picks = [tuple(swap_rounding(mat, [0.5, 0.5], RandomStream(9).child("d", t))) for t in range(10_000)]
    assert set(picks) == {(0,), (1,)}
    assert abs(picks.count((0,)) / 10_000 - 0.5) <= 0.03


@pytest.mark.parametrize("idx", range(4))
def test_swap_rounding_independent_and_unbiased(idx):
    mat = matroid_battery(8, seed=idx)[idx]
    rng = np.random.default_rng(idx)
    f = coverage_battery(1, 8, seed=idx)[0]
    terms = [(w, S) for w, S in decompose_fractional(mat, np.full(8, 1.0 / 8))]
    assert terms
    x = np.zeros(8)
    for S in (sorted(rng.choice(8, size=min(2, mat.k), replace=False)) for _ in range(3)):
        if mat.is_independent(S):
            x[S] += 0.3
    draws = 2000
    vals = []
    pre = decompose_fractional(mat, x)
    for t in range(draws):
        S = swap_rounding(mat, x, RandomStream(idx).child("r", t), terms=pre)
        assert mat.is_independent(S)
        vals.append(f.value(S))
    vals = np.asarray(vals)
    assert vals.mean() >= multilinear_exact_small(f, x) - 3 * vals.std() / np.sqrt(draws)


def test_decompose_fractional_examples():
    mat = UniformMatroid(4, 2)
    assert decompose_fractional(mat, np.zeros(4)) == []
    terms = decompose_fractional(mat, [1.0, 0.0, 1.0, 0.0])
    assert len(terms) == 1 and terms[0][0] == pytest.approx(1.0) and list(terms[0][1]) == [0, 2]


def test_greedy_consistency_small_battery():
    for i, f in enumerate(coverage_battery(4, 9, seed=60)):
        mat = matroid_battery(9, seed=i)[i]
        rep = check_consistency(greedy_plugin(f, mat), GroundSet(9), 25, RandomStream(i))
        assert rep.passed, rep.failures[:1]


def test_dc_greedy_consistency_small_battery():
    for i, f in enumerate(cut_battery(2, 8, seed=61)):
        mat = matroid_battery(8, seed=i)[i]
        alg = dcgreedy_plugin(f, mat, 0.5, ell=64)
        rep = check_consistency(alg, GroundSet(8), 15, RandomStream(i))
        assert rep.passed, rep.failures[:1]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), k=st.integers(0, 5))
def test_greedy_output_feasible_and_prefix_closed(seed, k):
    f = coverage_battery(1, 10, seed=seed % 1000)[0]
    c = UniformMatroid(10, k)
    seq = greedy_sequence(f, c, range(10))
    assert len(seq) <= k
    for a in range(len(seq)):
        assert greedy_sequence(f, c, range(10), limit=a) == seq[:a]

import numpy as np
import pytest

from conftest import coverage_battery, cut_battery, matroid_battery
from submax.constraints import UniformMatroid
from submax.core import ElementSet, GroundSet, RandomStream
from submax.errors import InvalidConfiguration
from submax.functions import ModularFunction
from submax.instances import random_partition_matroid
from submax.sequential import dc_greedy, dthresh_greedy, greedy, greedy_sequence
from submax.tworound import (TwoRoundConfig, cardinality_groups, dcgreedy_stage, fast_matroid_sequential,
                             greedy_stage, two_round_cardinality, two_round_nonmonotone)


def test_config_validation():
    with pytest.raises(InvalidConfiguration):
        TwoRoundConfig(m=0)
    with pytest.raises(InvalidConfiguration):
        TwoRoundConfig(m=2, gamma_hint=0.0)
    assert cardinality_groups(0.25) == int(np.ceil(2 * np.log(4) / 0.25))


def test_nonmonotone_single_part():
    for f in cut_battery(4, 10, seed=1):
        c = UniformMatroid(10, 3)
        G = greedy(f, c, range(10)).sol
        out = two_round_nonmonotone(f, c, GroundSet(10), TwoRoundConfig(m=1, second_stage=greedy_stage),
                                    RandomStream(0))
        assert f.value(out) == max(f.value(G), f.value(greedy(f, c, G).sol))


@pytest.mark.parametrize("seed", range(6))
def test_nonmonotone_dominates_parts(seed):
    f = cut_battery(1, 12, seed=seed)[0]
    mat = matroid_battery(12, seed=seed)[seed % 4]
    rep = {}
    out = two_round_nonmonotone(f, mat, GroundSet(12), TwoRoundConfig(m=3), RandomStream(seed), report=rep)
    assert mat.is_independent(out)
    assert f.value(out) >= max(rep["part_values"] + [rep["second_value"]]) - 1e-12


def test_nonmonotone_cut_cardinality_example():
    # six vertices, |S| <= 2, second stage dc_greedy
    target = 0.5 * (0.5 / np.e) / (0.5 + 1 / np.e)
    f = cut_battery(1, 6, seed=5)[0]
    c = UniformMatroid(6, 2)
    opt = max(f.value([a, b]) for a in range(6) for b in range(6))
    cfg = TwoRoundConfig(m=2, second_stage=dcgreedy_stage(0.5, ell=64))
    vals = [f.value(two_round_nonmonotone(f, c, GroundSet(6), cfg, RandomStream(s))) for s in range(500)]
    assert np.mean(vals) >= target * opt


def test_fast_matroid_eps_one():
    for f in coverage_battery(3, 9, seed=2):
        mat = UniformMatroid(9, 3)
        A = dthresh_greedy(f, mat, range(9), 1.0).sol
        rep = {}
        out = fast_matroid_sequential(f, mat, 1.0, RandomStream(0), inner_eps=0.5, report=rep)
        assert rep["union_size"] == len(A) and rep["part_best"] == f.value(A)
        assert f.value(out) == max(f.value(A), rep["second_value"])


@pytest.mark.parametrize("seed", range(8))
def test_fast_matroid_union_bound(seed):
    n = 14
    f = cut_battery(1, n, seed=seed)[0]
    mat = random_partition_matroid(n, 4, 1, seed)
    rep = {}
    out = fast_matroid_sequential(f, mat, 0.5, RandomStream(seed), report=rep)
    assert rep["union_size"] <= rep["bound"] == 2 * mat.k
    assert mat.is_independent(out)
    with pytest.raises(InvalidConfiguration):
        fast_matroid_sequential(f, mat, 0.3, RandomStream(seed))


def test_cardinality_edge_cases():
    f = coverage_battery(1, 8, seed=3)[0]
    assert len(two_round_cardinality(f, 0, 2, 0.25, RandomStream(0))) == 0
    assert len(two_round_cardinality(f, 20, 2, 0.25, RandomStream(0))) <= 8
    with pytest.raises(InvalidConfiguration):
        two_round_cardinality(f, -1, 2, 0.25, RandomStream(0))
    with pytest.raises(InvalidConfiguration):
        two_round_cardinality(f, 2, 0, 0.25, RandomStream(0))


def test_cardinality_single_machine_contains_greedy():
    for f in coverage_battery(5, 12, seed=4):
        out = two_round_cardinality(f, 3, 1, 0.25, RandomStream(1))
        G = greedy_sequence(f, UniformMatroid(12, 3), range(12))
        assert len(out) <= 3 and f.value(out) >= f.value(G) - 1e-12


def test_cardinality_candidates_reported():
    f = ModularFunction([5.0, 4.0, 3.0, 2.0, 1.0])
    rep = {}
    out = two_round_cardinality(f, 2, 2, 0.5, RandomStream(2), report=rep)
    assert len(rep["candidate_values"]) == 3
    assert f.value(out) == max(rep["candidate_values"])
    assert out == ElementSet([0, 1], 5)  # every element reaches the pool with 3 groups here


def test_dcgreedy_stage_matches_direct_call():
    f = coverage_battery(1, 8, seed=9)[0]
    mat = UniformMatroid(8, 2)
    stage = dcgreedy_stage(0.5, ell=32)
    B = ElementSet(range(8), 8)
    assert stage(f, mat, B, RandomStream(3)) == stage(f, mat, B, RandomStream(3))
    assert mat.is_independent(stage(f, mat, B, RandomStream(3)))
    assert dc_greedy(f, mat, [], 0.5, None).sol == ElementSet((), 8)

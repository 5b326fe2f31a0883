import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from submax.core import ElementSet, GroundSet, RandomnessVector, RandomStream, partition_uniform, sample_subset
from submax.errors import InvalidConfiguration, PreconditionError


def test_ground_set_validation():
    with pytest.raises(InvalidConfiguration):
        GroundSet(-1)
    with pytest.raises(InvalidConfiguration):
        GroundSet(2, ("a",))
    g = GroundSet(2, ("a", "b"))
    assert g.label(1) == "b" and len(g) == 2
    assert list(g.full()) == [0, 1] and len(g.empty()) == 0


def test_element_set_sorted_and_deduplicated():
    S = ElementSet([3, 1, 3, 0], 5)
    assert S.members == (0, 1, 3)
    assert list(S | [4]) == [0, 1, 3, 4]
    assert list(S & [1, 2, 3]) == [1, 3]
    assert list(S - [0]) == [1, 3]
    assert S.add(2) == ElementSet([0, 1, 2, 3], 5)
    assert S.bits() == 0b1011
    assert ElementSet.from_mask(S.mask()) == S
    with pytest.raises(PreconditionError):
        ElementSet([5], 5)


def test_stream_determinism_and_children():
    a = RandomStream(7).child("run", 1)
    b = RandomStream(7).child("run", 1)
    assert a == b and a.key() == b.key()
    assert np.array_equal(a.generator().random(5), b.generator().random(5))
    keys = {RandomStream(7).key(), a.key(), RandomStream(7).child("run", 2).key(),
            RandomStream(7).child("group", 1).key(), RandomStream(8).child("run", 1).key()}
    assert len(keys) == 5


def test_generator_is_fresh_each_call():
    s = RandomStream(3)
    assert np.array_equal(s.generator().random(3), s.generator().random(3))


def test_thresholds_in_unit_interval():
    b = RandomnessVector(RandomStream(1), n=20, ell=50, max_steps=4)
    t = b.threshold_range(0, 4, range(20))
    assert t.shape == (4, 50, 20)
    assert t.min() >= 0.0 and t.max() < 1.0
    # roughly uniform
    assert abs(t.mean() - 0.5) < 0.02


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), j=st.integers(0, 9),
       subset=st.sets(st.integers(0, 29), min_size=1, max_size=30))
def test_thresholds_do_not_depend_on_the_subset(seed, j, subset):
    b = RandomnessVector(RandomStream(seed), n=30, ell=16, max_steps=10)
    full = b.thresholds(j, range(30))
    cols = sorted(subset)
    assert np.array_equal(b.thresholds(j, cols), full[:, cols])


def test_threshold_range_bounds():
    b = RandomnessVector(RandomStream(1), n=4, ell=2, max_steps=3)
    with pytest.raises(PreconditionError):
        b.thresholds(3, [0])
    with pytest.raises(PreconditionError):
        b.thresholds(0, [4])
    with pytest.raises(InvalidConfiguration):
        RandomnessVector(RandomStream(1), n=4, ell=0, max_steps=3)


def test_sample_masks_strict_rule():
    b = RandomnessVector(RandomStream(2), n=3, ell=100, max_steps=1)
    m = b.sample_masks(0, [0, 1, 2], np.array([0.0, 1.0, 0.5]))
    assert not m[:, 0].any() and m[:, 1].all()


def test_sample_subset_extremes():
    g = GroundSet(10)
    assert len(sample_subset(g, 0.0, RandomStream(0))) == 0
    assert sample_subset(g, 1.0, RandomStream(0)) == g.full()
    with pytest.raises(InvalidConfiguration):
        sample_subset(g, 1.5, RandomStream(0))


def test_sample_subset_mean_size():
    g = GroundSet(10)
    sizes = [len(sample_subset(g, 0.5, RandomStream(0).child("draw", t))) for t in range(10_000)]
    assert abs(np.mean(sizes) - 5.0) <= 5 * math.sqrt(10 * 0.25 / 10_000)


def test_sample_subset_deterministic():
    g = GroundSet(50)
    s = RandomStream(11).child("x")
    assert sample_subset(g, 0.3, s) == sample_subset(g, 0.3, s)


def test_partition_degenerate_cases():
    g = GroundSet(6)
    assert partition_uniform(g, 1, RandomStream(0)) == [g.full()]
    parts = partition_uniform(GroundSet(0), 3, RandomStream(0))
    assert len(parts) == 3 and all(len(p) == 0 for p in parts)
    with pytest.raises(InvalidConfiguration):
        partition_uniform(g, 0, RandomStream(0))


def test_partition_marginal_frequency():
    g = GroundSet(12)
    counts = np.zeros(12)
    for t in range(10_000):
        counts[partition_uniform(g, 3, RandomStream(5).child("t", t))[0].array()] += 1
    assert np.all(np.abs(counts / 10_000 - 1 / 3) <= 0.02)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(0, 40), m=st.integers(1, 6), seed=st.integers(0, 2**32))
def test_partition_disjoint_and_exhaustive(n, m, seed):
    parts = partition_uniform(GroundSet(n), m, RandomStream(seed))
    assert len(parts) == m
    seen = [e for p in parts for e in p]
    assert sorted(seen) == list(range(n))

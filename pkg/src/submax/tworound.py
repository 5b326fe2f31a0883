"""Two-round algorithms built on random partitions.

* :func:`two_round_nonmonotone`: Greedy on each part, then a second algorithm
  on the union of the part solutions.
* :func:`fast_matroid_sequential`: the same scheme run sequentially with
  descending-thresholds Greedy on ``1/eps`` parts.
* :func:`two_round_cardinality`: monotone cardinality-constrained variant that
  combines a greedy prefix on a fresh sample with greedy completions from the
  pooled solutions.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

from .constraints import Constraint, Matroid, UniformMatroid
from .core import ElementSet, GroundSet, RandomnessVector, RandomStream, partition_uniform, sample_subset
from .errors import ContractViolation, InvalidConfiguration
from .functions import ContractedOracle, SubmodularOracle
from .sequential import (_loops_per_step, dc_greedy, default_ell, dthresh_greedy, greedy,
                         greedy_sequence, steps_for)

__all__ = [
    "TwoRoundConfig",
    "SecondStage",
    "dcgreedy_stage",
    "greedy_stage",
    "default_stage",
    "two_round_nonmonotone",
    "fast_matroid_sequential",
    "two_round_cardinality",
    "cardinality_groups",
]

SecondStage = Callable[[SubmodularOracle, Constraint, ElementSet, RandomStream], ElementSet]


def greedy_stage(f: SubmodularOracle, c: Constraint, B: ElementSet, stream: RandomStream) -> ElementSet:
    return greedy(f, c, B).sol


def dcgreedy_stage(eps: float = 0.25, ell: int | None = None) -> SecondStage:
    """Second stage running sampled-weight dc_greedy with its own randomness."""
    steps = steps_for(eps)

    def stage(f, mat, B, stream):
        n_ell = ell if ell is not None else default_ell(mat.k, f.n, eps)
        b = RandomnessVector(stream.child("b"), f.n, n_ell, steps * _loops_per_step(mat))
        return dc_greedy(f, mat, B, eps, b).sol

    stage.__name__ = f"dcgreedy(eps={eps})"
    return stage


def default_stage(c: Constraint) -> SecondStage:
    return dcgreedy_stage() if c.is_matroid else greedy_stage


@dataclass
class TwoRoundConfig:
    """``m`` machines; ``second_stage`` is the algorithm run on the pooled solutions."""

    m: int
    second_stage: SecondStage | None = None
    gamma_hint: float = 0.5

    def __post_init__(self):
        if self.m < 1:
            raise InvalidConfiguration(f"machine count must be >= 1, got {self.m}")
        if not 0.0 < self.gamma_hint <= 1.0:
            raise InvalidConfiguration(f"gamma must lie in (0, 1], got {self.gamma_hint}")


def _best(f: SubmodularOracle, candidates: list[ElementSet]) -> ElementSet:
    best, best_value = candidates[0], f.value(candidates[0])
    for S in candidates[1:]:
        v = f.value(S)
        if v > best_value:
            best, best_value = S, v
    return best


def two_round_nonmonotone(f: SubmodularOracle, c: Constraint, ground: GroundSet, cfg: TwoRoundConfig,
                          stream: RandomStream, report: dict | None = None) -> ElementSet:
    """Best of the per-part Greedy solutions and the second stage on their union."""
    parts = partition_uniform(ground, cfg.m, stream.child("partition"))
    sols = [greedy(f, c, V_i).sol for V_i in parts]
    B = ElementSet((), ground)
    for S in sols:
        B = B | S
    stage = cfg.second_stage or default_stage(c)
    T = stage(f, c, B, stream.child("second"))
    if not c.is_independent(T):
        raise ContractViolation("second-stage algorithm returned an infeasible set")
    out = _best(f, sols + [T])
    if report is not None:
        report.update(part_values=[f.value(S) for S in sols], union_size=len(B),
                      second_value=f.value(T))
    return out


def fast_matroid_sequential(f: SubmodularOracle, mat: Matroid, eps: float, stream: RandomStream,
                            inner_eps: float | None = None, report: dict | None = None) -> ElementSet:
    """Descending-thresholds Greedy on ``1/eps`` random parts, dc_greedy on the union."""
    m = steps_for(eps)
    ground = GroundSet(f.n)
    t0 = time.perf_counter()
    parts = partition_uniform(ground, m, stream.child("partition"))
    sols = [dthresh_greedy(f, mat, V_i, eps).sol for V_i in parts]
    B = ElementSet((), ground)
    for S in sols:
        B = B | S
    first_stage = time.perf_counter() - t0
    if len(B) > mat.k * m:
        raise ContractViolation(f"|B| = {len(B)} exceeds k/eps = {mat.k * m}")
    A = _best(f, sols)
    B_prime = dcgreedy_stage(eps if inner_eps is None else inner_eps)(f, mat, B, stream.child("second"))
    out = _best(f, [A, B_prime])
    if report is not None:
        report.update(union_size=len(B), bound=mat.k * m, first_stage_seconds=first_stage,
                      part_best=f.value(A), second_value=f.value(B_prime))
    return out


def cardinality_groups(eps: float, c: float = 2.0) -> int:
    if not 0.0 < eps < 1.0:
        raise InvalidConfiguration(f"eps must lie in (0, 1), got {eps}")
    return max(1, math.ceil(c * math.log(1.0 / eps) / eps))


def two_round_cardinality(f: SubmodularOracle, k: int, m: int, eps: float, stream: RandomStream,
                          groups: int | None = None, report: dict | None = None) -> ElementSet:
    """Monotone maximization under ``|S| <= k`` in two rounds.

    ``X`` is drawn fresh from ``V(1/m)`` rather than reusing a first-round part.
    """
    if m < 1:
        raise InvalidConfiguration(f"machine count must be >= 1, got {m}")
    if k < 0:
        raise InvalidConfiguration(f"k must be >= 0, got {k}")
    n = f.n
    k = min(k, n)
    ground = GroundSet(n)
    if k == 0:
        return ElementSet((), ground)
    g = cardinality_groups(eps) if groups is None else groups
    card = UniformMatroid(n, k)
    S = ElementSet((), ground)
    for j in range(g):
        for V_i in partition_uniform(ground, m, stream.child("group", j)):
            S = S | ElementSet(greedy_sequence(f, card, V_i), ground)
    X = sample_subset(ground, 1.0 / m, stream.child("sample"))
    prefix = greedy_sequence(f, card, X)
    candidates = []
    for a in range(k + 1):
        T1 = prefix[:a]
        g_a = ContractedOracle(f, T1)
        T2 = greedy_sequence(g_a, UniformMatroid(n, k - a), S)
        candidates.append(ElementSet(T1 + T2, ground))
    out = _best(f, candidates)
    if report is not None:
        report.update(groups=g, pooled=len(S), sample=len(X),
                      candidate_values=[f.value(T) for T in candidates])
    return out

"""Ground sets, element sets and the keyed randomness every module draws from.

All randomness is addressed by a ``(root_seed, path)`` pair.  A stream never
carries mutable state: :meth:`RandomStream.generator` returns a fresh numpy
generator positioned at the start of the stream, so two calls with the same
stream and arguments reproduce each other exactly and streams can be shared
between threads freely.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidConfiguration, PreconditionError

__all__ = [
    "GroundSet",
    "ElementSet",
    "RandomStream",
    "RandomnessVector",
    "sample_subset",
    "partition_uniform",
]

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_ELEM_MULT = _U64(0xD6E8FEB86659FD93)
_STEP_SALT = _U64(0xA0761D6478BD642F)
_INV53 = 1.0 / 9007199254740992.0


@dataclass(frozen=True)
class GroundSet:
    """The universe ``{0, ..., n-1}`` with optional external labels."""

    n: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 0:
            raise InvalidConfiguration(f"ground set size must be >= 0, got {self.n}")
        if self.labels is not None and len(self.labels) != self.n:
            raise InvalidConfiguration(
                f"{len(self.labels)} labels given for {self.n} elements")

    def full(self) -> "ElementSet":
        return ElementSet(range(self.n), self)

    def empty(self) -> "ElementSet":
        return ElementSet((), self)

    def label(self, e: int) -> str:
        return self.labels[e] if self.labels is not None else str(e)

    def __len__(self) -> int:
        return self.n


class ElementSet:
    """Immutable set of element indices, iterated in ascending order."""

    __slots__ = ("_members", "_universe", "_lookup")

    def __init__(self, members: Iterable[int] = (), universe: GroundSet | int | None = None):
        ms = tuple(sorted({int(e) for e in members}))
        if universe is None:
            universe = GroundSet(ms[-1] + 1 if ms else 0)
        elif isinstance(universe, int):
            universe = GroundSet(universe)
        if ms and (ms[0] < 0 or ms[-1] >= universe.n):
            raise PreconditionError(
                f"element indices must lie in [0, {universe.n}), got {ms[0]}..{ms[-1]}")
        self._members = ms
        self._universe = universe
        self._lookup: frozenset[int] | None = None

    @classmethod
    def from_mask(cls, mask, universe: GroundSet | int | None = None) -> "ElementSet":
        mask = np.asarray(mask, dtype=bool)
        if universe is None:
            universe = GroundSet(mask.shape[0])
        return cls(np.flatnonzero(mask).tolist(), universe)

    @property
    def members(self) -> tuple[int, ...]:
        return self._members

    @property
    def universe(self) -> GroundSet:
        return self._universe

    @property
    def n(self) -> int:
        return self._universe.n

    def _set(self) -> frozenset[int]:
        if self._lookup is None:
            self._lookup = frozenset(self._members)
        return self._lookup

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        if self._members:
            out[list(self._members)] = True
        return out

    def bits(self) -> int:
        b = 0
        for e in self._members:
            b |= 1 << e
        return b

    def array(self) -> np.ndarray:
        return np.asarray(self._members, dtype=np.int64)

    def _coerce(self, other) -> Iterable[int]:
        if isinstance(other, ElementSet):
            return other._members
        return other

    def union(self, other) -> "ElementSet":
        return ElementSet(self._set().union(self._coerce(other)), self._universe)

    def intersection(self, other) -> "ElementSet":
        return ElementSet(self._set().intersection(self._coerce(other)), self._universe)

    def difference(self, other) -> "ElementSet":
        return ElementSet(self._set().difference(self._coerce(other)), self._universe)

    def add(self, e: int) -> "ElementSet":
        return self.union((e,))

    def issubset(self, other) -> bool:
        return self._set().issubset(self._coerce(other))

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def __iter__(self) -> Iterator[int]:
        return iter(self._members)

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, e) -> bool:
        return e in self._set()

    def __eq__(self, other) -> bool:
        if isinstance(other, ElementSet):
            return self._members == other._members and self.n == other.n
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self._members, self.n))

    def __repr__(self) -> str:
        return f"ElementSet({list(self._members)}, n={self.n})"


def _fmix64(h: np.ndarray) -> np.ndarray:
    # MurmurHash3 finalizer; arrays wrap modulo 2**64 silently.
    h = h ^ (h >> _U64(33))
    h = h * _U64(0xFF51AFD7ED558CCD)
    h = h ^ (h >> _U64(33))
    h = h * _U64(0xC4CEB9FE1A85EC53)
    return h ^ (h >> _U64(33))


@dataclass(frozen=True)
class RandomStream:
    """A deterministic, forkable source of randomness.

    ``child(label, index)`` derives an independent stream; the derivation is
    a hash of the full path, so sibling streams never share draws.
    """

    root_seed: int
    path: tuple[tuple[str, int], ...] = ()

    def child(self, label: str, index: int = 0) -> "RandomStream":
        return RandomStream(self.root_seed, self.path + ((str(label), int(index)),))

    def key(self) -> int:
        """128-bit key identifying this stream."""
        h = hashlib.blake2b(digest_size=16)
        h.update(int(self.root_seed).to_bytes(16, "little", signed=True))
        for label, index in self.path:
            h.update(b"\x00" + label.encode() + b"\x01"
                     + int(index).to_bytes(16, "little", signed=True))
        return int.from_bytes(h.digest(), "little")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))


@dataclass(frozen=True)
class RandomnessVector:
    """Seed-derived threshold table ``u(j, i, e)`` in ``[0, 1)``.

    ``j`` indexes a sampling step, ``i`` one of ``ell`` samples and ``e`` an
    element of the ground set.  A threshold depends only on
    ``(stream, j, i, e)`` and never on which subset of the ground set an
    algorithm happens to run on.  Entries are computed on demand by a keyed
    counter hash evaluated only at the requested elements.
    """

    stream: RandomStream
    n: int
    ell: int
    max_steps: int
    _key: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.ell < 1:
            raise InvalidConfiguration(f"sample count must be >= 1, got {self.ell}")
        if self.max_steps < 0:
            raise InvalidConfiguration("max_steps must be >= 0")
        object.__setattr__(self, "_key", self.stream.key() & 0xFFFFFFFFFFFFFFFF)
        object.__setattr__(self, "_key_arr", np.array([self._key], dtype=_U64))
        object.__setattr__(self, "_sample_offsets",
                           np.arange(1, self.ell + 1, dtype=_U64) * _GOLDEN)

    def thresholds(self, j: int, elements: Sequence[int]) -> np.ndarray:
        """Return the ``(ell, len(elements))`` block of thresholds at step ``j``."""
        return self.threshold_range(j, 1, elements)[0]

    def threshold_range(self, j0: int, count: int, elements: Sequence[int]) -> np.ndarray:
        """Thresholds for steps ``j0 .. j0+count-1``, shaped ``(count, ell, len(elements))``."""
        if count < 1 or j0 < 0 or j0 + count > self.max_steps:
            raise PreconditionError(
                f"steps {j0}..{j0 + count - 1} outside randomness of {self.max_steps} steps")
        el = np.asarray(elements, dtype=np.int64)
        if el.size and (el.min() < 0 or el.max() >= self.n):
            raise PreconditionError("threshold requested for an element outside the ground set")
        # array arithmetic wraps modulo 2**64 without warnings
        js = np.arange(j0, j0 + count, dtype=_U64)
        kj = _fmix64(self._key_arr ^ _fmix64(js * _GOLDEN + _STEP_SALT))
        seeds = _fmix64(kj[:, None] ^ (el.astype(_U64) * _ELEM_MULT + _GOLDEN)[None, :])
        h = _fmix64(seeds[:, None, :] + self._sample_offsets[None, :, None])
        return (h >> _U64(11)) * _INV53

    def sample_masks(self, j: int, elements: Sequence[int], probs: np.ndarray) -> np.ndarray:
        """Boolean ``(ell, len(elements))`` inclusion matrix: ``u(j,i,e) < probs[e]``."""
        return self.thresholds(j, elements) < np.asarray(probs, dtype=float)[None, :]


def sample_subset(ground: GroundSet, p: float, stream: RandomStream) -> ElementSet:
    """Draw a set containing each element independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidConfiguration(f"probability must lie in [0, 1], got {p}")
    u = stream.generator().random(ground.n)
    return ElementSet(np.flatnonzero(u < p).tolist(), ground)


def partition_uniform(ground: GroundSet, m: int, stream: RandomStream) -> list[ElementSet]:
    """Assign every element to one of ``m`` parts uniformly and independently."""
    if m < 1:
        raise InvalidConfiguration(f"machine count must be >= 1, got {m}")
    labels = stream.generator().integers(0, m, size=ground.n)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(m + 1))
    return [ElementSet(order[bounds[i]:bounds[i + 1]].tolist(), ground) for i in range(m)]

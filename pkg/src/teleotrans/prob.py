"""Exact rational probabilities, finite-support distributions, and trajectories.

All probability values are `fractions.Fraction` instances in [0, 1]; there is
deliberately no floating-point fast path, so every equality in the library is
an exact equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

ZERO = Fraction(0)
ONE = Fraction(1)


class EmptyAlphabet(ValueError):
    """Raised when a distribution would have empty support."""


class WeightSumMismatch(ValueError):
    """Raised when mixture weights do not sum to exactly 1."""


class InvalidProbability(ValueError):
    """Raised for probability values outside [0, 1]."""


def as_probability(value) -> Fraction:
    """Coerce to an exact Fraction in [0, 1]; floats are rejected."""
    if isinstance(value, float):
        raise InvalidProbability(f"refusing float probability {value!r}; use Fraction or 'p/q'")
    p = Fraction(value)
    if p < 0 or p > 1:
        raise InvalidProbability(f"probability {p} outside [0, 1]")
    return p


def parse_rational(text: str) -> Fraction:
    """Parse the "p/q" (or bare "p") literal format used by all file formats."""
    return Fraction(text.strip())


def format_rational(value: Fraction) -> str:
    """Canonical "p/q" form (reduced; "p" when the denominator is 1)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class FiniteDist:
    """Immutable finite-support probability distribution.

    Entries with probability exactly 0 are dropped on construction, so the
    stored key set *is* the support. Entries must sum to exactly 1.
    """

    __slots__ = ("_entries", "_key")

    def __init__(self, entries: Mapping):
        cleaned = {}
        total = ZERO
        for x, p in entries.items():
            p = as_probability(p)
            if p == 0:
                continue
            cleaned[x] = cleaned.get(x, ZERO) + p
            total += p
        if total != 1:
            raise WeightSumMismatch(f"distribution sums to {total}, not 1")
        if not cleaned:
            raise EmptyAlphabet("distribution has empty support")
        self._entries = cleaned
        self._key = None

    def __call__(self, x) -> Fraction:
        return self._entries.get(x, ZERO)

    @property
    def support(self):
        return frozenset(self._entries)

    def items(self):
        return self._entries.items()

    def key(self):
        """Canonical hashable form (sorted support with probabilities)."""
        if self._key is None:
            self._key = tuple(sorted(self._entries.items()))
        return self._key

    def __eq__(self, other):
        if not isinstance(other, FiniteDist):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        body = ", ".join(f"{x!r}: {format_rational(p)}" for x, p in sorted(self._entries.items()))
        return "{" + body + "}"


def dist_point(x) -> FiniteDist:
    """Distribution with all mass on a single element."""
    return FiniteDist({x: ONE})


def dist_uniform(xs: Iterable) -> FiniteDist:
    xs = list(xs)
    if not xs:
        raise EmptyAlphabet("uniform distribution over empty set")
    p = Fraction(1, len(xs))
    return FiniteDist({x: p for x in xs})


def dist_mix(weights, dists) -> FiniteDist:
    """Pointwise convex combination of distributions.

    Weights must sum to exactly 1; zero-weight components are ignored.
    """
    weights = [as_probability(w) for w in weights]
    dists = list(dists)
    if len(weights) != len(dists):
        raise WeightSumMismatch("weights and distributions differ in length")
    if sum(weights, ZERO) != 1:
        raise WeightSumMismatch(f"mixture weights sum to {sum(weights, ZERO)}, not 1")
    mixed = {}
    for w, d in zip(weights, dists):
        if w == 0:
            continue
        for x, p in d.items():
            mixed[x] = mixed.get(x, ZERO) + w * p
    return FiniteDist(mixed)


class Trajectory:
    """A pair of equal-length input/output strings (tuples)."""

    __slots__ = ("inputs", "outputs")

    def __init__(self, inputs=(), outputs=()):
        inputs = tuple(inputs)
        outputs = tuple(outputs)
        if len(inputs) != len(outputs):
            raise ValueError("trajectory inputs and outputs differ in length")
        self.inputs = inputs
        self.outputs = outputs

    @classmethod
    def of(cls, *steps):
        """Build from (input, output) pairs."""
        return cls(tuple(i for i, _ in steps), tuple(o for _, o in steps))

    def steps(self):
        return list(zip(self.inputs, self.outputs))

    def __len__(self):
        return len(self.inputs)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.inputs + other.inputs, self.outputs + other.outputs)

    def append(self, i, o) -> "Trajectory":
        return Trajectory(self.inputs + (i,), self.outputs + (o,))

    def prefix(self, n: int) -> "Trajectory":
        return Trajectory(self.inputs[:n], self.outputs[:n])

    def suffix(self, n: int) -> "Trajectory":
        """Drop the first n steps."""
        return Trajectory(self.inputs[n:], self.outputs[n:])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.inputs == other.inputs and self.outputs == other.outputs

    def __hash__(self):
        return hash((self.inputs, self.outputs))

    def __repr__(self):
        return f"Trajectory({self.inputs!r}, {self.outputs!r})"


EMPTY_TRAJECTORY = Trajectory()

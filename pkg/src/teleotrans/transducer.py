"""Lazy stochastic transducers and their structural combinators.

A transducer is a behavior object: a distribution over its next output plus a
step function defined on (input, supported output) pairs that yields the
conditioned future behavior. The infinite behavior tree is never materialized;
concrete subclasses compute `emit` and children on demand and memoize them.
"""

from __future__ import annotations

from fractions import Fraction

from .prob import (
    ONE,
    ZERO,
    FiniteDist,
    Trajectory,
    WeightSumMismatch,
    as_probability,
    dist_mix,
    dist_point,
    dist_uniform,
)


class UnsupportedOutput(ValueError):
    """Step was requested for an output outside the emission support."""


class InvalidTrajectory(ValueError):
    """A trajectory required to be valid evolves to the failure marker."""


class _Failed:
    """Distinguished marker returned by `evolve` on unsupported outputs."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FAILED"


FAILED = _Failed()


class Transducer:
    """Base class for behavior objects.

    Subclasses implement `_compute_emit` and `_compute_step`; the base class
    handles caching so that re-querying always yields identical results.

    `inputs` is the (finite, ordered) input alphabet and `state_key` an
    optional canonical hashable identifier: two transducers with equal,
    non-None state keys are guaranteed behaviorally equal. Keys are what make
    exact solving and bisimulation-style equality checks terminate.
    """

    __slots__ = ("inputs", "state_key", "_emit", "_children")

    def __init__(self, inputs, state_key=None):
        self.inputs = tuple(inputs)
        self.state_key = state_key
        self._emit = None
        self._children = {}

    @property
    def emit(self) -> FiniteDist:
        if self._emit is None:
            self._emit = self._compute_emit()
        return self._emit

    def step(self, i, o) -> "Transducer":
        child = self._children.get((i, o))
        if child is None:
            if o not in self.emit.support:
                raise UnsupportedOutput(f"output {o!r} not in support {sorted(self.emit.support, key=repr)}")
            if i not in self.inputs:
                raise UnsupportedOutput(f"input {i!r} not in alphabet {self.inputs}")
            child = self._compute_step(i, o)
            self._children[(i, o)] = child
        return child

    def _compute_emit(self) -> FiniteDist:
        raise NotImplementedError

    def _compute_step(self, i, o) -> "Transducer":
        raise NotImplementedError


class ExplicitTransducer(Transducer):
    """Transducer from an explicit emission and step callback (lazy wrapper)."""

    __slots__ = ("_emit_fn", "_step_fn")

    def __init__(self, inputs, emit, step_fn, state_key=None):
        super().__init__(inputs, state_key)
        self._emit = emit
        self._step_fn = step_fn

    def _compute_step(self, i, o):
        return self._step_fn(i, o)


class IIDTransducer(Transducer):
    """Emits the same distribution forever, ignoring all inputs."""

    __slots__ = ("dist",)

    def __init__(self, inputs, dist: FiniteDist):
        super().__init__(inputs, state_key=("iid", tuple(inputs), dist.key()))
        self.dist = dist
        self._emit = dist

    def _compute_step(self, i, o):
        return self


def iid(inputs, dist: FiniteDist) -> Transducer:
    return IIDTransducer(inputs, dist)


def constant(inputs, output) -> Transducer:
    """Deterministic transducer that always outputs the same symbol."""
    return iid(inputs, dist_point(output))


class MixtureTransducer(Transducer):
    """Finite weighted mixture with Bayesian posterior reweighting on step.

    The step by (i, o) mixes the component steps with weights proportional to
    w_k * P_k(o), restricted to components whose emission supports o.
    """

    __slots__ = ("weights", "components")

    def __init__(self, weights, components):
        weights = [as_probability(w) for w in weights]
        if len(weights) != len(components):
            raise WeightSumMismatch("weights and components differ in length")
        if sum(weights, ZERO) != 1:
            raise WeightSumMismatch(f"mixture weights sum to {sum(weights, ZERO)}, not 1")
        live = [(w, c) for w, c in zip(weights, components) if w > 0]
        if not live:
            raise WeightSumMismatch("mixture has no nonzero weight")
        self.weights = tuple(w for w, _ in live)
        self.components = tuple(c for _, c in live)
        inputs = self.components[0].inputs
        for c in self.components:
            if c.inputs != inputs:
                raise WeightSumMismatch("mixture components have differing input alphabets")
        keys = [c.state_key for c in self.components]
        state_key = None
        if all(k is not None for k in keys):
            state_key = ("mix", tuple(sorted(zip(keys, self.weights), key=repr)))
        super().__init__(inputs, state_key)

    def _compute_emit(self):
        return dist_mix(self.weights, [c.emit for c in self.components])

    def posterior(self, o):
        """Posterior (weight, component) pairs after observing output o."""
        scored = [(w * c.emit(o), c) for w, c in zip(self.weights, self.components)]
        total = sum((s for s, _ in scored), ZERO)
        if total == 0:
            raise UnsupportedOutput(f"output {o!r} not in mixture support")
        return [(s / total, c) for s, c in scored if s > 0]

    def _compute_step(self, i, o):
        post = self.posterior(o)
        return mix([w for w, _ in post], [c.step(i, o) for _, c in post])


def mix(weights, components) -> Transducer:
    """Weighted mixture of transducers; a singleton mixture is returned as-is."""
    m = MixtureTransducer(weights, components)
    if len(m.components) == 1:
        return m.components[0]
    return m


def evolve(t: Transducer, traj: Trajectory):
    """Fold the step function over a trajectory.

    Returns the evolved transducer, or FAILED as soon as an output falls
    outside the current support (and absorbingly from then on).
    """
    current = t
    for i, o in traj.steps():
        if current is FAILED or o not in current.emit.support:
            return FAILED
        current = current.step(i, o)
    return current


class SpliceTransducer(Transducer):
    """Behaves like `base` except that after exactly `traj` it continues as `tail`."""

    __slots__ = ("base", "traj", "tail")

    def __init__(self, base: Transducer, traj: Trajectory, tail: Transducer):
        assert len(traj) >= 1
        super().__init__(base.inputs, None)
        self.base = base
        self.traj = traj
        self.tail = tail

    def _compute_emit(self):
        return self.base.emit

    def _compute_step(self, i, o):
        if (i, o) == (self.traj.inputs[0], self.traj.outputs[0]):
            return splice(self.base.step(i, o), self.traj.suffix(1), self.tail)
        return self.base.step(i, o)


def splice(t: Transducer, traj: Trajectory, tail: Transducer) -> Transducer:
    """Replace t's continuation after exactly `traj` with `tail`."""
    if evolve(t, traj) is FAILED:
        raise InvalidTrajectory(f"{traj!r} is not a valid evolution")
    if len(traj) == 0:
        return tail
    return SpliceTransducer(t, traj, tail)


class UnrolledTable:
    """Finite-depth unrolling: conditional output-string distributions.

    `tables[n]` maps each input string of length n to a dict from output
    strings of length n+1 to exact probabilities, for n = 0..depth.
    """

    __slots__ = ("inputs", "outputs", "depth", "tables")

    def __init__(self, inputs, outputs, depth, tables):
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.depth = depth
        self.tables = tables

    def prob(self, istr, ostr) -> Fraction:
        istr, ostr = tuple(istr), tuple(ostr)
        return self.tables[len(istr)].get(istr, {}).get(ostr, ZERO)

    def check_causality(self) -> bool:
        """Marginalizing the last output must recover the shorter table."""
        for n in range(self.depth):
            for istr, row in self.tables[n + 1].items():
                marginal = {}
                for ostr, p in row.items():
                    key = ostr[:-1]
                    marginal[key] = marginal.get(key, ZERO) + p
                if marginal != self.tables[n].get(istr[:-1], {}):
                    return False
        return True

    def __eq__(self, other):
        if not isinstance(other, UnrolledTable):
            return NotImplemented
        return (
            self.inputs == other.inputs
            and self.outputs == other.outputs
            and self.depth == other.depth
            and self.tables == other.tables
        )


def unroll(t: Transducer, depth: int, outputs=None) -> UnrolledTable:
    """Unroll a transducer into its conditional string distributions.

    `outputs` fixes the output alphabet for the table; by default it is the
    union of supports encountered. Zero-probability branches are never stepped.
    """
    tables = [dict() for _ in range(depth + 1)]
    seen_outputs = set()

    def rec(node, istr, ostr, weight):
        n = len(istr)
        row_tab = tables[n].setdefault(istr, {})
        for o, p in node.emit.items():
            seen_outputs.add(o)
            key = ostr + (o,)
            row_tab[key] = row_tab.get(key, ZERO) + weight * p
            if n < depth:
                for i in t.inputs:
                    rec(node.step(i, o), istr + (i,), ostr + (o,), weight * p)

    rec(t, (), (), ONE)
    if outputs is None:
        outputs = tuple(sorted(seen_outputs, key=repr))
    return UnrolledTable(t.inputs, outputs, depth, tables)


def unrolled_step(table: UnrolledTable, i, o) -> UnrolledTable:
    """Condition an unrolled table on a first (input, output) pair."""
    p0 = table.prob((), (o,))
    if p0 == 0:
        raise UnsupportedOutput(f"output {o!r} has zero probability at depth 0")
    tables = []
    for n in range(table.depth):
        new = {}
        for istr, row in table.tables[n + 1].items():
            if istr[0] != i:
                continue
            new_row = {}
            for ostr, p in row.items():
                if ostr[0] == o and p > 0:
                    new_row[ostr[1:]] = p / p0
            if new_row:
                new[istr[1:]] = new_row
        tables.append(new)
    return UnrolledTable(table.inputs, table.outputs, table.depth - 1, tables)


class RerollTransducer(Transducer):
    """Depth-limited transducer read back off an unrolled table.

    Beyond the table depth the behavior is a fixed uniform i.i.d. filler; that
    region carries no information and must be excluded from equality checks.
    """

    __slots__ = ("table",)

    def __init__(self, table: UnrolledTable):
        super().__init__(table.inputs, None)
        self.table = table

    def _compute_emit(self):
        return FiniteDist({ostr[0]: p for ostr, p in self.table.tables[0][()].items()})

    def _compute_step(self, i, o):
        if self.table.depth == 0:
            return iid(self.inputs, dist_uniform(self.table.outputs))
        return RerollTransducer(unrolled_step(self.table, i, o))


def reroll(table: UnrolledTable) -> Transducer:
    return RerollTransducer(table)


def behaviorally_equal(t1: Transducer, t2: Transducer, depth: int) -> bool:
    """Exact behavioral equality up to the given depth.

    Pairs of nodes with equal non-None state keys are trusted immediately, and
    keyed pairs already on the current exploration are assumed equal
    (coinductively), so finite-state comparisons terminate regardless of depth.
    """
    if t1.inputs != t2.inputs:
        return False
    assumed = set()

    def rec(a, b, d):
        ka, kb = a.state_key, b.state_key
        pair = None
        if ka is not None and kb is not None:
            if ka == kb:
                return True
            pair = (ka, kb)
            if pair in assumed:
                return True
        if a.emit != b.emit:
            return False
        if d == 0:
            return True
        if pair is not None:
            assumed.add(pair)
        for o in a.emit.support:
            for i in a.inputs:
                if not rec(a.step(i, o), b.step(i, o), d - 1):
                    return False
        return True

    return rec(t1, t2, depth)

"""Finite-state machine backings for transducers.

Two explicit generator classes live here. Unifilar machines have stochastic
outputs but deterministic state updates given (input, output). Stochastic
Moore machines have stochastic, output-independent transitions and are read
as transducers through an on-demand belief-state construction (exact Bayesian
filtering over hidden states).
"""

from __future__ import annotations

import itertools

from .prob import FiniteDist, ZERO, dist_point
from .transducer import Transducer

_machine_ids = itertools.count()


class UnknownState(KeyError):
    """A state id that is not part of the machine."""


class IncompleteMachine(ValueError):
    """A transition or kernel entry required by the machine shape is missing."""


class UnifilarMachine:
    """Finite unifilar machine: stochastic outputs, deterministic transitions.

    output_fn maps each state to a FiniteDist over outputs; transition_fn maps
    (state, input, supported output) to the unique next state. The transition
    table must be total on that domain.
    """

    __slots__ = ("states", "inputs", "outputs", "output_fn", "transition_fn",
                 "machine_id", "_transducers")

    def __init__(self, states, inputs, outputs, output_fn, transition_fn):
        self.states = tuple(states)
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.output_fn = dict(output_fn)
        self.transition_fn = dict(transition_fn)
        self.machine_id = next(_machine_ids)
        self._transducers = {}
        if not self.states:
            raise IncompleteMachine("machine has no states")
        for x in self.states:
            if x not in self.output_fn:
                raise IncompleteMachine(f"state {x!r} has no output distribution")
            for o in self.output_fn[x].support:
                if o not in self.outputs:
                    raise IncompleteMachine(f"state {x!r} emits {o!r} outside the output alphabet")
                for i in self.inputs:
                    nxt = self.transition_fn.get((x, i, o))
                    if nxt is None:
                        raise IncompleteMachine(f"missing transition for ({x!r}, {i!r}, {o!r})")
                    if nxt not in self.states:
                        raise UnknownState(f"transition ({x!r}, {i!r}, {o!r}) -> unknown state {nxt!r}")

    def transducer(self, x) -> Transducer:
        return unifilar_to_transducer(self, x)


class _UnifilarTransducer(Transducer):
    __slots__ = ("machine", "state")

    def __init__(self, machine, state):
        super().__init__(machine.inputs, state_key=("ufm", machine.machine_id, state))
        self.machine = machine
        self.state = state
        self._emit = machine.output_fn[state]

    def _compute_step(self, i, o):
        return unifilar_to_transducer(self.machine, self.machine.transition_fn[(self.state, i, o)])


def unifilar_to_transducer(m: UnifilarMachine, x) -> Transducer:
    """Read a pointed unifilar machine as a transducer (interned per state)."""
    t = m._transducers.get(x)
    if t is None:
        if x not in m.output_fn:
            raise UnknownState(f"unknown state {x!r}")
        t = _UnifilarTransducer(m, x)
        m._transducers[x] = t
    return t


class MooreMachine:
    """Finite-state stochastic Moore machine (ψ, φ, θ).

    init (ψ) is a distribution over hidden states; output_kernel (φ) maps a
    hidden state to an output distribution; transition_kernel (θ) maps (state,
    input) to a next-state distribution and does not see the emitted output.
    """

    __slots__ = ("states", "inputs", "outputs", "init", "output_kernel",
                 "transition_kernel", "machine_id")

    def __init__(self, states, inputs, outputs, init, output_kernel, transition_kernel):
        self.states = tuple(states)
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.init = init
        self.output_kernel = dict(output_kernel)
        self.transition_kernel = dict(transition_kernel)
        self.machine_id = next(_machine_ids)
        if not self.states:
            raise IncompleteMachine("machine has no states")
        for y in init.support:
            if y not in self.states:
                raise UnknownState(f"initial support contains unknown state {y!r}")
        for y in self.states:
            if y not in self.output_kernel:
                raise IncompleteMachine(f"state {y!r} has no output kernel entry")
            for i in self.inputs:
                if (y, i) not in self.transition_kernel:
                    raise IncompleteMachine(f"missing transition kernel entry for ({y!r}, {i!r})")


def belief_key(belief: FiniteDist):
    """Canonical hashable form of a belief over hidden states."""
    return belief.key()


class BeliefMachine:
    """Lazy unifilar machine over beliefs of a Moore machine.

    States are canonicalized belief keys, interned on first touch, so the
    reachable automaton is finite exactly when the Bayesian filter stabilizes.
    Exposes the unifilar interface (output_fn / transition_fn as methods).
    """

    __slots__ = ("moore", "machine_id", "_beliefs", "_outputs", "_transitions", "_transducers")

    def __init__(self, moore: MooreMachine):
        self.moore = moore
        self.machine_id = next(_machine_ids)
        self._beliefs = {}
        self._outputs = {}
        self._transitions = {}
        self._transducers = {}

    def intern(self, belief: FiniteDist):
        key = belief_key(belief)
        self._beliefs.setdefault(key, belief)
        return key

    def belief(self, key) -> FiniteDist:
        return self._beliefs[key]

    def output_fn(self, key) -> FiniteDist:
        out = self._outputs.get(key)
        if out is None:
            psi = self._beliefs[key]
            phi = self.moore.output_kernel
            mixed = {}
            for y, w in psi.items():
                for o, p in phi[y].items():
                    mixed[o] = mixed.get(o, ZERO) + w * p
            out = FiniteDist(mixed)
            self._outputs[key] = out
        return out

    def transition_fn(self, key, i, o):
        nxt = self._transitions.get((key, i, o))
        if nxt is None:
            psi = self._beliefs[key]
            phi = self.moore.output_kernel
            theta = self.moore.transition_kernel
            # Posterior over next hidden states given that o was just emitted.
            unnormalized = {}
            total = ZERO
            for y, w in psi.items():
                like = w * phi[y](o)
                if like == 0:
                    continue
                total += like
                for y2, q in theta[(y, i)].items():
                    unnormalized[y2] = unnormalized.get(y2, ZERO) + like * q
            if total == 0:
                raise UnknownState(f"output {o!r} has probability 0 at this belief")
            nxt = self.intern(FiniteDist({y2: v / total for y2, v in unnormalized.items()}))
            self._transitions[(key, i, o)] = nxt
        return nxt

    def transducer(self, key) -> Transducer:
        t = self._transducers.get(key)
        if t is None:
            t = _BeliefTransducer(self, key)
            self._transducers[key] = t
        return t


class _BeliefTransducer(Transducer):
    __slots__ = ("belief_machine", "belief_state")

    def __init__(self, bm, key):
        super().__init__(bm.moore.inputs, state_key=("belief", bm.machine_id, key))
        self.belief_machine = bm
        self.belief_state = key
        self._emit = bm.output_fn(key)

    def _compute_step(self, i, o):
        bm = self.belief_machine
        return bm.transducer(bm.transition_fn(self.belief_state, i, o))


def moore_to_unifilar(m: MooreMachine):
    """Belief-state (unifilar) reading of a Moore machine.

    Returns the interned initial belief key and the lazy belief machine.
    """
    bm = BeliefMachine(m)
    return bm.intern(m.init), bm


def moore_to_transducer(m: MooreMachine) -> Transducer:
    key, bm = moore_to_unifilar(m)
    return bm.transducer(key)


def deterministic_policy(inputs, outputs, start, output_of, transition):
    """Unifilar machine for a deterministic policy.

    `output_of` maps each state to its single action; `transition` maps
    (state, observed input) to the next state. Returns (machine, transducer).
    """
    states = sorted(output_of)
    output_fn = {x: dist_point(output_of[x]) for x in states}
    transition_fn = {
        (x, i, output_of[x]): transition[(x, i)] for x in states for i in inputs
    }
    m = UnifilarMachine(states, inputs, outputs, output_fn, transition_fn)
    return m, m.transducer(start)

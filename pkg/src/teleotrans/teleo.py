"""Goal-tagged environments and success-probability machinery.

An environment is a transducer from actions to (state, telos) pairs, where the
telos channel reports success or nothing. This module provides coupling with
policies, sound finite-horizon bounds on the probability of ever succeeding,
an exact absorbing-chain solver, success-ambivalent evolution, single-success
truncation, and a zoo of small benchmark environments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .prob import ONE, ZERO, FiniteDist, as_probability
from .transducer import (
    MixtureTransducer,
    Transducer,
    mix,
)
from .machines import UnifilarMachine, _UnifilarTransducer


class Telos(enum.IntEnum):
    NOTHING = 0
    SUCCESS = 1


NOTHING = Telos.NOTHING
SUCCESS = Telos.SUCCESS


class AlphabetMismatch(ValueError):
    pass


class NotFiniteState(ValueError):
    """Exact solving needs canonical state keys on both sides."""


class SingularSystem(ArithmeticError):
    """The solvable part of a success system was singular; must not happen."""


class UnsupportedObservation(ValueError):
    """Ambivalent evolution on a state with zero total emission mass."""


class UnsoundCertificate(ValueError):
    """A state marked zero-success can actually reach a success emission."""


class NonDeterministicPolicy(ValueError):
    pass


def telos_outputs(states):
    """Output alphabet S x {nothing, success} for the given state set."""
    return tuple((s, t) for s in states for t in (NOTHING, SUCCESS))


class TeleoEnvironment:
    """A transducer over actions -> (state, telos), plus zero-success data.

    `certified_keys` are transducer state keys from which success is provably
    unreachable; they are what make the upper success bound informative and
    let the exact solver treat doomed regions as absorbing. Keys produced by
    the structural wrappers in this module ('doom', 'trunc', 'mix' forms) are
    certified by recursion on their shape.
    """

    __slots__ = ("states", "actions", "t", "certified_keys", "fully_certified")

    def __init__(self, states, actions, transducer: Transducer,
                 certified_keys=frozenset(), fully_certified=False):
        self.states = tuple(states)
        self.actions = tuple(actions)
        if transducer.inputs != self.actions:
            raise AlphabetMismatch("environment transducer must take actions as inputs")
        self.t = transducer
        self.certified_keys = frozenset(certified_keys)
        self.fully_certified = fully_certified

    def with_transducer(self, t: Transducer, fully_certified=None) -> "TeleoEnvironment":
        if fully_certified is None:
            fully_certified = self.fully_certified
        return TeleoEnvironment(self.states, self.actions, t,
                                self.certified_keys, fully_certified)

    def is_certified(self, key) -> bool:
        if self.fully_certified:
            return True
        if key is None:
            return False
        if isinstance(key, tuple) and key:
            if key[0] == "doom":
                return True
            if key[0] == "trunc":
                return self.is_certified(key[1])
            if key[0] == "mix":
                return all(self.is_certified(k) for k, _ in key[1])
        return key in self.certified_keys

    def evolve(self, a, s, telos=NOTHING) -> "TeleoEnvironment":
        """Ordinary (value-laden when telos is nothing) one-step evolution."""
        return self.with_transducer(self.t.step(a, (s, telos)))


def _check_certificate(machine: UnifilarMachine, certified):
    """Certified machine states must never reach a success emission."""
    seen = set(certified)
    stack = list(certified)
    while stack:
        x = stack.pop()
        for (s, t), p in machine.output_fn[x].items():
            if t == SUCCESS:
                raise UnsoundCertificate(f"state {x!r} emits success with probability {p}")
            for i in machine.inputs:
                nxt = machine.transition_fn[(x, i, (s, t))]
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)


def machine_env(machine: UnifilarMachine, start, states,
                certified=(), check=True) -> TeleoEnvironment:
    """Wrap a pointed unifilar machine as an environment.

    `certified` lists machine states claimed zero-success; the claim is
    verified by graph search unless `check` is disabled.
    """
    if check:
        _check_certificate(machine, certified)
    keys = frozenset(("ufm", machine.machine_id, x) for x in certified)
    return TeleoEnvironment(states, machine.inputs, machine.transducer(start), keys)


class CoupledSystem(Transducer):
    """Closed-loop policy/environment pair as a trivially-input transducer.

    Emissions are (state, telos, action) triples with the product probability
    P_policy(a) * P_env(s, t); stepping conditions both sides on the pair.
    """

    __slots__ = ("policy", "env")

    def __init__(self, policy: Transducer, env: TeleoEnvironment):
        pk, ek = policy.state_key, env.t.state_key
        key = ("couple", pk, ek) if pk is not None and ek is not None else None
        super().__init__(("*",), key)
        self.policy = policy
        self.env = env

    def _compute_emit(self):
        out = {}
        for a, pa in self.policy.emit.items():
            for (s, t), pe in self.env.t.emit.items():
                out[(s, t, a)] = pa * pe
        return FiniteDist(out)

    def _compute_step(self, i, o):
        s, t, a = o
        return CoupledSystem(self.policy.step(s, a), self.env.evolve(a, s, t))


def couple(policy: Transducer, env: TeleoEnvironment) -> CoupledSystem:
    if set(policy.inputs) != set(env.states):
        raise AlphabetMismatch(
            f"policy inputs {policy.inputs} do not match environment states {env.states}")
    return CoupledSystem(policy, env)


@dataclass(frozen=True)
class BssPrefix:
    """Prefix of the success sequence: exact first-success probabilities.

    terms[k] is the probability that the first success happens at step k;
    live_mass is the probability of surviving all counted steps without
    success, excluding branches whose environment is certified zero-success.
    """

    bound: Fraction
    terms: tuple
    live_mass: Fraction


def success_prefix(c: CoupledSystem, n: int) -> BssPrefix:
    env = c.env
    layer = {(c.policy, c.env.t): ONE}
    terms = []
    live = ZERO
    for k in range(n + 1):
        term = ZERO
        nxt = {}
        for (pol, envt), w in layer.items():
            if env.is_certified(envt.state_key):
                continue
            fails = []
            for (s, t), p in envt.emit.items():
                if t == SUCCESS:
                    term += w * p
                else:
                    fails.append((s, p))
            if k == n:
                live += w * sum((p for _, p in fails), ZERO)
                continue
            for a, pa in pol.emit.items():
                for s, ps in fails:
                    child = (pol.step(s, a), envt.step(a, (s, NOTHING)))
                    nxt[child] = nxt.get(child, ZERO) + w * pa * ps
        terms.append(term)
        layer = nxt
    return BssPrefix(ONE, tuple(terms), live)


@dataclass(frozen=True)
class SuccessInterval:
    lo: Fraction
    hi: Fraction
    exact: Optional[Fraction]
    horizon_used: int


def success_interval(policy: Transducer, env: TeleoEnvironment,
                     horizon: int) -> SuccessInterval:
    prefix = success_prefix(couple(policy, env), horizon)
    lo = sum(prefix.terms, ZERO)
    hi = lo + prefix.live_mass
    try:
        exact = success_exact(policy, env)
    except NotFiniteState:
        exact = None
    if exact is not None:
        assert lo <= exact <= hi
    return SuccessInterval(lo, hi, exact, horizon)


_CHAIN_CAP = 50000


def success_exact(policy: Transducer, env: TeleoEnvironment) -> Fraction:
    """Exact probability of ever emitting success, for finite-state pairs.

    Mixtures on either side are split by linearity before solving, since a
    reweighted mixture generally has unboundedly many distinct posteriors.
    The product chain assigns 0 to states that cannot reach a success
    emission; the remainder solves (I - M) h = b by Gaussian elimination,
    which picks out the minimal solution the limit definition requires.
    """
    if isinstance(policy, MixtureTransducer):
        return sum((w * success_exact(comp, env)
                    for w, comp in zip(policy.weights, policy.components)), ZERO)
    if isinstance(env.t, MixtureTransducer):
        return sum((w * success_exact(policy, env.with_transducer(comp))
                    for w, comp in zip(env.t.weights, env.t.components)), ZERO)

    def key_of(pol, envt):
        pk, ek = pol.state_key, envt.state_key
        if pk is None or ek is None:
            raise NotFiniteState("both policy and environment need state keys")
        return (pk, ek)

    start = key_of(policy, env.t)
    nodes = {start: (policy, env.t)}
    info = {}
    queue = [start]
    while queue:
        q = queue.pop()
        if q in info:
            continue
        pol, envt = nodes[q]
        if env.is_certified(envt.state_key):
            info[q] = (ZERO, {})
            continue
        b = ZERO
        trans = {}
        for (s, t), pe in envt.emit.items():
            if t == SUCCESS:
                b += pe
                continue
            for a, pa in pol.emit.items():
                child = (pol.step(s, a), envt.step(a, (s, NOTHING)))
                ck = key_of(*child)
                if ck not in nodes:
                    if len(nodes) >= _CHAIN_CAP:
                        raise NotFiniteState("product chain exceeds size cap")
                    nodes[ck] = child
                    queue.append(ck)
                trans[ck] = trans.get(ck, ZERO) + pa * pe
        info[q] = (b, trans)

    # Backward reachability from positive one-step success mass.
    rev = {q: set() for q in info}
    for q, (_, trans) in info.items():
        for ck in trans:
            rev[ck].add(q)
    alive = {q for q, (b, _) in info.items() if b > 0}
    stack = list(alive)
    while stack:
        q = stack.pop()
        for p in rev[q]:
            if p not in alive:
                alive.add(p)
                stack.append(p)
    if start not in alive:
        return ZERO

    order = sorted(alive, key=repr)
    index = {q: i for i, q in enumerate(order)}
    m = len(order)
    mat = [[ZERO] * m for _ in range(m)]
    vec = [ZERO] * m
    for q in order:
        i = index[q]
        b, trans = info[q]
        mat[i][i] = ONE
        vec[i] = b
        for ck, p in trans.items():
            if ck in index:
                mat[i][index[ck]] -= p
    for col in range(m):
        piv = next((r for r in range(col, m) if mat[r][col] != 0), None)
        if piv is None:
            raise SingularSystem("no pivot after zero-success elimination")
        mat[col], mat[piv] = mat[piv], mat[col]
        vec[col], vec[piv] = vec[piv], vec[col]
        pv = mat[col][col]
        if pv != 1:
            mat[col] = [v / pv for v in mat[col]]
            vec[col] /= pv
        for r in range(m):
            if r != col and mat[r][col] != 0:
                f = mat[r][col]
                mat[r] = [x - f * y for x, y in zip(mat[r], mat[col])]
                vec[r] -= f * vec[col]
    return vec[index[start]]


def _ambivalent_step(t: Transducer, a, s) -> Transducer:
    p0 = t.emit((s, NOTHING))
    p1 = t.emit((s, SUCCESS))
    total = p0 + p1
    if total == 0:
        raise UnsupportedObservation(f"state {s!r} has zero emission mass")
    weights, comps = [], []
    if p0 > 0:
        weights.append(p0 / total)
        comps.append(t.step(a, (s, NOTHING)))
    if p1 > 0:
        weights.append(p1 / total)
        comps.append(t.step(a, (s, SUCCESS)))
    return mix(weights, comps)


def ambivalent_evolve(env: TeleoEnvironment, a, s) -> TeleoEnvironment:
    """Sensorimotor-only evolution: mix both telos branches by their mass."""
    return env.with_transducer(_ambivalent_step(env.t, a, s))


class _DoomedTransducer(Transducer):
    """Success mass folded into the nothing channel, recursively.

    Steps recurse through success-ambivalent evolution of the wrapped
    behavior, so the wrapped environment is followed as if the removed
    successes might still have happened.
    """

    __slots__ = ("inner",)

    def __init__(self, inner: Transducer):
        k = inner.state_key
        super().__init__(inner.inputs, ("doom", k) if k is not None else None)
        self.inner = inner

    def _compute_emit(self):
        folded = {}
        for (s, t), p in self.inner.emit.items():
            key = (s, NOTHING)
            folded[key] = folded.get(key, ZERO) + p
        return FiniteDist(folded)

    def _compute_step(self, a, o):
        s, _ = o
        return _DoomedTransducer(_ambivalent_step(self.inner, a, s))


def doomify(env: TeleoEnvironment) -> TeleoEnvironment:
    return env.with_transducer(_DoomedTransducer(env.t), fully_certified=True)


class _TruncatedTransducer(Transducer):
    """Single-success truncation: continue past success only into doom."""

    __slots__ = ("inner",)

    def __init__(self, inner: Transducer):
        k = inner.state_key
        super().__init__(inner.inputs, ("trunc", k) if k is not None else None)
        self.inner = inner

    def _compute_emit(self):
        return self.inner.emit

    def _compute_step(self, a, o):
        child = self.inner.step(a, o)
        if o[1] == SUCCESS:
            return _DoomedTransducer(child)
        return _TruncatedTransducer(child)


def truncate_single_success(env: TeleoEnvironment) -> TeleoEnvironment:
    return env.with_transducer(_TruncatedTransducer(env.t))


# --- environment zoo -------------------------------------------------------

def _uniform_nothing(states):
    n = len(states)
    return FiniteDist({(s, NOTHING): Fraction(1, n) for s in states})


def _uniform_success(states):
    n = len(states)
    return FiniteDist({(s, SUCCESS): Fraction(1, n) for s in states})


def _all_to(machine_states_emit, actions, target):
    """Transition table entries sending every supported branch to target."""
    entries = {}
    for x, dist in machine_states_emit.items():
        for o in dist.support:
            for a in actions:
                entries[(x, a, o)] = target(x, a, o)
    return entries


def doom_env(states, actions) -> TeleoEnvironment:
    emits = {"doom": _uniform_nothing(states)}
    trans = _all_to(emits, actions, lambda x, a, o: "doom")
    m = UnifilarMachine(["doom"], actions, telos_outputs(states), emits, trans)
    return machine_env(m, "doom", states, certified=["doom"])


def despair_env(states, actions) -> TeleoEnvironment:
    n = len(states)
    half = {}
    for s in states:
        half[(s, NOTHING)] = Fraction(1, 2 * n)
        half[(s, SUCCESS)] = Fraction(1, 2 * n)
    emits = {"despair": FiniteDist(half), "doom": _uniform_nothing(states)}
    trans = _all_to(emits, actions, lambda x, a, o: "doom")
    m = UnifilarMachine(["despair", "doom"], actions, telos_outputs(states), emits, trans)
    return machine_env(m, "despair", states, certified=["doom"])


def success_env(states, actions) -> TeleoEnvironment:
    emits = {"success": _uniform_success(states), "doom": _uniform_nothing(states)}
    trans = _all_to(emits, actions, lambda x, a, o: "doom")
    m = UnifilarMachine(["success", "doom"], actions, telos_outputs(states), emits, trans)
    return machine_env(m, "success", states, certified=["doom"])


def _require_deterministic(machine: UnifilarMachine):
    actions = {}
    for x in machine.states:
        support = machine.output_fn[x].support
        if len(support) != 1:
            raise NonDeterministicPolicy(f"policy state {x!r} has stochastic output")
        (actions[x],) = support
    return actions


def _policy_backing(policy: Transducer):
    if not isinstance(policy, _UnifilarTransducer):
        raise NonDeterministicPolicy("testing environments need a machine-backed policy")
    return policy.machine, policy.state


_TEST_EMIT_WEIGHTS = (Fraction(1, 4), Fraction(3, 4))


def _testing_emit(states):
    n = len(states)
    w_fail, w_succ = _TEST_EMIT_WEIGHTS
    d = {}
    for s in states:
        d[(s, NOTHING)] = w_fail / n
        d[(s, SUCCESS)] = w_succ / n
    return FiniteDist(d)


def uniform_testing(policy: Transducer) -> TeleoEnvironment:
    """Environment that keeps offering success while the policy matches.

    The per-step emission is 1/4 nothing + 3/4 success over uniform states;
    any action the given deterministic policy would not take leads to doom.
    """
    pm, start = _policy_backing(policy)
    act = _require_deterministic(pm)
    states = pm.inputs
    actions = pm.outputs
    emit = _testing_emit(states)
    emits = {("test", x): emit for x in pm.states}
    emits["doom"] = _uniform_nothing(states)
    trans = {}
    for x in pm.states:
        for (s, t) in emits[("test", x)].support:
            for a in actions:
                if a == act[x]:
                    nxt = ("test", pm.transition_fn[(x, s, a)])
                else:
                    nxt = "doom"
                trans[(("test", x), a, (s, t))] = nxt
    for o in emits["doom"].support:
        for a in actions:
            trans[("doom", a, o)] = "doom"
    m = UnifilarMachine(list(emits), actions, telos_outputs(states), emits, trans)
    return machine_env(m, ("test", start), states, certified=["doom"])


def tricky_testing(policy: Transducer, policy2: Transducer) -> TeleoEnvironment:
    """Tests the first policy until a success, then tests the second.

    On a success emission the environment switches to the plain testing
    environment for the second policy even if the observed action was not
    valid for the first one; the doom branch covers only failed matches on
    the nothing channel.
    """
    pm, start = _policy_backing(policy)
    pm2, start2 = _policy_backing(policy2)
    act = _require_deterministic(pm)
    act2 = _require_deterministic(pm2)
    if pm.inputs != pm2.inputs or pm.outputs != pm2.outputs:
        raise AlphabetMismatch("the two tested policies must share alphabets")
    states = pm.inputs
    actions = pm.outputs
    emit = _testing_emit(states)
    emits = {("tricky", x): emit for x in pm.states}
    for y in pm2.states:
        emits[("test", y)] = emit
    emits["doom"] = _uniform_nothing(states)
    trans = {}
    for x in pm.states:
        for (s, t) in emit.support:
            for a in actions:
                if t == SUCCESS:
                    nxt = ("test", start2)
                elif a == act[x]:
                    nxt = ("tricky", pm.transition_fn[(x, s, a)])
                else:
                    nxt = "doom"
                trans[(("tricky", x), a, (s, t))] = nxt
    for y in pm2.states:
        for (s, t) in emit.support:
            for a in actions:
                if a == act2[y]:
                    nxt = ("test", pm2.transition_fn[(y, s, a)])
                else:
                    nxt = "doom"
                trans[(("test", y), a, (s, t))] = nxt
    for o in emits["doom"].support:
        for a in actions:
            trans[("doom", a, o)] = "doom"
    m = UnifilarMachine(list(emits), actions, telos_outputs(states), emits, trans)
    return machine_env(m, ("tricky", start), states, certified=["doom"])


def _mimic_weights(n):
    return {s: Fraction(1, 2 ** s) for s in range(1, n + 1)}


def _mimic_machine(n):
    """Shared backing for the mimic family and its initial environment.

    A mimic state carries the state index being tested and the success mass
    pending from the previous matched test; matching index k banks a success
    chance of 1/2^k on the following emission. Action n+1 cashes out through
    the despair state (a one-step coin), anything else dooms.
    """
    if n < 2:
        raise ValueError("mimic environments need at least 2 states")
    states = tuple(range(1, n + 1))
    actions = tuple(range(1, n + 2))
    w = _mimic_weights(n)
    pends = [ZERO] + [w[s] for s in states]
    emits = {"init": _uniform_nothing(states)}
    for test in states:
        for p in pends:
            d = {}
            for s in states:
                d[(s, NOTHING)] = (1 - p) * Fraction(1, n)
                d[(s, SUCCESS)] = p * Fraction(1, n)
            emits[("m", test, p)] = FiniteDist(d)
    half = {}
    for s in states:
        half[(s, NOTHING)] = Fraction(1, 2 * n)
        half[(s, SUCCESS)] = Fraction(1, 2 * n)
    emits["despair"] = FiniteDist(half)
    emits["doom"] = _uniform_nothing(states)
    trans = {}
    for x, dist in emits.items():
        for (s, t) in dist.support:
            for a in actions:
                if x == "init":
                    nxt = ("m", s, ZERO) if a == n + 1 else "doom"
                elif isinstance(x, tuple):
                    _, test, _pend = x
                    if a == test:
                        nxt = ("m", s, w[test])
                    elif a == n + 1:
                        nxt = "despair"
                    else:
                        nxt = "doom"
                else:
                    nxt = "doom"
                trans[(x, a, (s, t))] = nxt
    m = UnifilarMachine(list(emits), actions, telos_outputs(states), emits, trans)
    return m, states


def mimic_env(n: int, sprime: int) -> TeleoEnvironment:
    m, states = _mimic_machine(n)
    w = _mimic_weights(n)
    return machine_env(m, ("m", sprime, w[sprime]), states, certified=["doom"])


def counterexample_env(n: int) -> TeleoEnvironment:
    """First step demands action n+1; afterwards success rewards mimicry."""
    m, states = _mimic_machine(n)
    return machine_env(m, "init", states, certified=["doom"])


CONTINUE = 0
EXIT = 1


def absent_minded_env() -> TeleoEnvironment:
    """Motorway with identical exits: success needs continue, then exit."""
    states = (0,)
    actions = (CONTINUE, EXIT)
    emits = {
        "start": _uniform_nothing(states),
        "please-exit": _uniform_nothing(states),
        "success": _uniform_success(states),
        "doom": _uniform_nothing(states),
    }
    trans = {}
    for x, dist in emits.items():
        for o in dist.support:
            for a in actions:
                if x == "start":
                    nxt = "please-exit" if a == CONTINUE else "doom"
                elif x == "please-exit":
                    nxt = "success" if a == EXIT else "doom"
                else:
                    nxt = "doom"
                trans[(x, a, o)] = nxt
    m = UnifilarMachine(list(emits), actions, telos_outputs(states), emits, trans)
    return machine_env(m, "start", states, certified=["doom"])


# --- benchmark policies ----------------------------------------------------

def counterexample_policy(n: int):
    """n-state near-mimic: repeat the last seen state, give up on state n."""
    from .machines import deterministic_policy
    states = tuple(range(1, n + 1))
    actions = tuple(range(1, n + 2))
    output_of = {x: (x if x != n else n + 1) for x in states}
    transition = {(x, s): s for x in states for s in states}
    return deterministic_policy(states, actions, n, output_of, transition)


def mimic_policy(n: int, start: int):
    """Perfect mimic: always repeat the previously seen state."""
    from .machines import deterministic_policy
    states = tuple(range(1, n + 1))
    actions = tuple(range(1, n + 2))
    output_of = {x: x for x in states}
    transition = {(x, s): s for x in states for s in states}
    return deterministic_policy(states, actions, start, output_of, transition)


def alpha_mimic_policy(n: int, alpha) -> Transducer:
    """Perfect mimic except state n gives up with probability alpha."""
    alpha = as_probability(alpha)
    states = tuple(range(1, n + 1))
    actions = tuple(range(1, n + 2))
    output_fn = {x: FiniteDist({x: ONE}) for x in states if x != n}
    output_fn[n] = FiniteDist({n: 1 - alpha, n + 1: alpha})
    transition_fn = {}
    for x in states:
        for s in states:
            for a in output_fn[x].support:
                transition_fn[(x, s, a)] = s
    m = UnifilarMachine(states, states, actions, output_fn, transition_fn)
    return m.transducer(n)

"""Finite-horizon planning and optimality analysis for teleo-environments.

Optimal values and deterministic policy trees via exact backward induction,
deterministification of arbitrary policies, optimality and specifiability
verdicts against constrained policy classes, Bellman-property checks in both
the value-laden and sensorimotor-only senses, pointwise decomposition of
stochastic policies, and grid sweeps over i.i.d. policies.

Finite-horizon values are a decidable proxy for the limiting success
probability: verdicts are exact on absorbing or finite-state instances and
honestly inconclusive otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .prob import ONE, ZERO, FiniteDist, Trajectory, dist_point
from .transducer import (
    FAILED,
    ExplicitTransducer,
    InvalidTrajectory,
    MixtureTransducer,
    Transducer,
    behaviorally_equal,
    evolve,
    iid,
    mix,
    splice,
)
from .machines import UnifilarMachine
from .teleo import (
    NOTHING,
    SUCCESS,
    NotFiniteState,
    TeleoEnvironment,
    ambivalent_evolve,
    couple,
    success_exact,
    success_prefix,
)


class ClassUnsupported(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintClass:
    """Policy class an optimality question is asked against."""

    kind: str
    param: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("all", "deterministic", "iid", "det_ufs"):
            raise ClassUnsupported(f"unknown constraint class {self.kind!r}")
        if self.param is not None and self.param <= 0:
            raise ValueError("constraint class parameter must be positive")


ALL = ConstraintClass("all")


def iid_class(resolution: int) -> ConstraintClass:
    return ConstraintClass("iid", resolution)


def det_ufs_class(n: int) -> ConstraintClass:
    return ConstraintClass("det_ufs", n)


def _action_order(actions):
    try:
        return tuple(sorted(actions))
    except TypeError:
        return tuple(sorted(actions, key=repr))


def optimal_value(env: TeleoEnvironment, horizon: int) -> Fraction:
    """Best achievable success probability within the horizon.

    V_0 is the immediate success mass; V_{n+1} adds the best action's
    failure-weighted continuation. Certified zero-success nodes score 0.
    """
    memo = {}

    def v(t, h):
        if env.is_certified(t.state_key):
            return ZERO
        key = (t.state_key, h) if t.state_key is not None else None
        if key is not None and key in memo:
            return memo[key]
        succ = ZERO
        fails = []
        for (s, tel), p in t.emit.items():
            if tel == SUCCESS:
                succ += p
            else:
                fails.append((s, p))
        result = succ
        if h > 0 and fails:
            best = max(
                sum((p * v(t.step(a, (s, NOTHING)), h - 1) for s, p in fails), ZERO)
                for a in env.actions
            )
            result = succ + best
        if key is not None:
            memo[key] = result
        return result

    return v(env.t, horizon)


def optimistic_value(env: TeleoEnvironment, horizon: int) -> Fraction:
    """Upper bound on any policy's total success probability.

    Identical backup to optimal_value except that surviving the horizon is
    scored 1, so the bound is sound even against history-dependent play.
    """
    memo = {}

    def v(t, h):
        if env.is_certified(t.state_key):
            return ZERO
        if isinstance(t, MixtureTransducer):
            # The bound distributes over mixtures (sup of a convex sum is at
            # most the convex sum of sups), and certified components drop out.
            return sum((w * v(c, h) for w, c in zip(t.weights, t.components)),
                       ZERO)
        key = (t.state_key, h) if t.state_key is not None else None
        if key is not None and key in memo:
            return memo[key]
        if h == 0:
            result = ONE
        else:
            succ = ZERO
            fails = []
            for (s, tel), p in t.emit.items():
                if tel == SUCCESS:
                    succ += p
                else:
                    fails.append((s, p))
            result = succ
            if fails:
                result += max(
                    sum((p * v(t.step(a, (s, NOTHING)), h - 1) for s, p in fails), ZERO)
                    for a in env.actions
                )
        if key is not None:
            memo[key] = result
        return result

    return v(env.t, horizon)


@dataclass(frozen=True)
class PolicyTree:
    """Explicit deterministic finite-horizon policy.

    Children are keyed by every state with positive nothing-mass after the
    chosen action; a horizon-0 node makes no decision (action None).
    """

    horizon: int
    action: object
    children: dict = field(default_factory=dict)
    unique_argmax: bool = True
    value: Fraction = ZERO


def extract_optimal_policy(env: TeleoEnvironment, horizon: int,
                           order=None) -> PolicyTree:
    """Deterministic optimal policy by backward induction.

    Ties are broken toward the least action in the given total order
    (default: sorted action ids), so the result is a pure function of
    (environment, horizon, order).
    """
    if order is None:
        order = _action_order(env.actions)
    memo = {}

    def rec(t, h):
        key = (t.state_key, h) if t.state_key is not None else None
        if key is not None and key in memo:
            return memo[key]
        succ = ZERO
        fails = []
        for (s, tel), p in t.emit.items():
            if tel == SUCCESS:
                succ += p
            else:
                fails.append((s, p))
        if h == 0 or not fails or env.is_certified(t.state_key):
            tree = PolicyTree(0, None, {}, True, succ)
        else:
            scored = []
            for a in order:
                kids = {s: rec(t.step(a, (s, NOTHING)), h - 1) for s, p in fails}
                branch = sum((p * kids[s].value for s, p in fails), ZERO)
                scored.append((branch, a, kids))
            best = max(branch for branch, _, _ in scored)
            unique = sum(1 for branch, _, _ in scored if branch == best) == 1
            for branch, a, kids in scored:
                if branch == best:
                    tree = PolicyTree(h, a, kids, unique, succ + branch)
                    break
        if key is not None:
            memo[key] = tree
        return tree

    return rec(env.t, horizon)


def policy_tree_value(tree: PolicyTree, env: TeleoEnvironment) -> Fraction:
    """Exact success probability of playing the tree against the environment."""
    succ = ZERO
    fails = []
    for (s, tel), p in env.t.emit.items():
        if tel == SUCCESS:
            succ += p
        else:
            fails.append((s, p))
    if tree.action is None or env.is_certified(env.t.state_key):
        return succ
    total = succ
    for s, p in fails:
        child = tree.children.get(s)
        if child is not None:
            total += p * policy_tree_value(child, env.evolve(tree.action, s))
    return total


def policy_tree_transducer(tree: PolicyTree, states, actions,
                           pad=None) -> Transducer:
    """Read a policy tree as a transducer, padding beyond the horizon.

    The padding action plays forever once the tree is exhausted; on
    environments that are absorbed by then it carries no value.
    """
    if pad is None:
        pad = _action_order(actions)[0]
    states = tuple(states)

    def build(node):
        if node is None or node.action is None:
            return iid(states, dist_point(pad))

        def step_fn(s, a):
            return build(node.children.get(s))

        return ExplicitTransducer(states, dist_point(node.action), step_fn)

    return build(tree)


def horizon_value(policy: Transducer, env: TeleoEnvironment,
                  horizon: int) -> Fraction:
    """Probability of succeeding within the horizon (exact prefix sum)."""
    prefix = success_prefix(couple(policy, env), horizon)
    return sum(prefix.terms, ZERO)


def deterministify(policy: Transducer, env: TeleoEnvironment,
                   horizon: int, order=None) -> PolicyTree:
    """Finite-horizon deterministic improvement of an arbitrary policy.

    At each node the best action in the policy's current support is chosen,
    valued by the deterministified continuation of the policy's own
    evolution; the resulting tree succeeds at least as often as the policy
    at the same horizon.
    """
    if order is None:
        order = _action_order(env.actions)
    memo = {}

    def rec(pol, t, h):
        key = None
        if pol.state_key is not None and t.state_key is not None:
            key = (pol.state_key, t.state_key, h)
            if key in memo:
                return memo[key]
        succ = ZERO
        fails = []
        for (s, tel), p in t.emit.items():
            if tel == SUCCESS:
                succ += p
            else:
                fails.append((s, p))
        support = [a for a in order if a in pol.emit.support]
        if h == 0 or not fails:
            tree = PolicyTree(0, None, {}, True, succ)
        else:
            scored = []
            for a in support:
                kids = {
                    s: rec(pol.step(s, a), t.step(a, (s, NOTHING)), h - 1)
                    for s, p in fails
                }
                branch = sum((p * kids[s].value for s, p in fails), ZERO)
                scored.append((branch, a, kids))
            best = max(branch for branch, _, _ in scored)
            unique = sum(1 for branch, _, _ in scored if branch == best) == 1
            for branch, a, kids in scored:
                if branch == best:
                    tree = PolicyTree(h, a, kids, unique, succ + branch)
                    break
        if key is not None:
            memo[key] = tree
        return tree

    return rec(policy, env.t, horizon)


@dataclass(frozen=True)
class OptimalityVerdict:
    """Outcome of an optimality question.

    `value` is the policy's exact success probability, or a (lo, hi) pair
    when exact solving is unavailable. `lower` is a success probability some
    concrete policy in the class achieves; `upper` bounds every policy in
    the class. `witness` carries the improving policy for suboptimal
    verdicts; `gap` the unresolved interval width for inconclusive ones.
    """

    status: str
    value: object
    lower: Fraction
    upper: Fraction
    margin: Optional[Fraction] = None
    witness: object = None
    gap: Optional[Fraction] = None


def _policy_bounds(policy, env, horizon):
    try:
        exact = success_exact(policy, env)
        return exact, exact, exact
    except NotFiniteState:
        prefix = success_prefix(couple(policy, env), horizon)
        lo = sum(prefix.terms, ZERO)
        return None, lo, lo + prefix.live_mass


def _verdict_against(exact, plo, phi, lower, upper, witness):
    value = exact if exact is not None else (plo, phi)
    if phi < lower:
        return OptimalityVerdict("suboptimal", value, lower, upper,
                                 margin=lower - phi, witness=witness)
    if plo >= upper:
        return OptimalityVerdict("optimal", value, lower, upper)
    return OptimalityVerdict("inconclusive", value, lower, upper,
                             gap=upper - plo)


def check_optimal(policy: Transducer, env: TeleoEnvironment, horizon: int,
                  cls: ConstraintClass = ALL) -> OptimalityVerdict:
    exact, plo, phi = _policy_bounds(policy, env, horizon)
    if cls.kind == "all":
        lower = optimal_value(env, horizon)
        upper = optimistic_value(env, horizon)
        witness = extract_optimal_policy(env, horizon) if phi < lower else None
        return _verdict_against(exact, plo, phi, lower, upper, witness)
    if cls.kind == "iid":
        params, best, unique = iid_sweep(env, cls.param or 100)
        value = exact if exact is not None else (plo, phi)
        if phi < best:
            return OptimalityVerdict("suboptimal", value, best, best,
                                     margin=best - phi, witness=params)
        if plo >= best:
            if unique:
                return OptimalityVerdict("optimal", value, best, best)
            return OptimalityVerdict("optimal", value, best, best, margin=ZERO)
        return OptimalityVerdict("inconclusive", value, best, best, gap=best - plo)
    if cls.kind == "det_ufs":
        if cls.param is None:
            raise ClassUnsupported("det_ufs needs a state count")
        best_val, best_pol = best_det_ufs(env, cls.param, at_least=plo)
        value = exact if exact is not None else (plo, phi)
        if best_val is not None and phi < best_val:
            return OptimalityVerdict("suboptimal", value, best_val, best_val,
                                     margin=best_val - phi, witness=best_pol)
        return OptimalityVerdict("optimal", value, plo, plo)
    raise ClassUnsupported(f"no decision procedure for class {cls.kind!r}")


# --- deterministic UFS enumeration -----------------------------------------

def det_ufs_policies(n: int, inputs, outputs):
    """All deterministic unifilar policies with at most n reachable states.

    States are numbered in discovery order (new targets appear in the scan
    order of (state, input) pairs), so each reachable transition structure
    is produced exactly once. Yields (actions, transitions) descriptions;
    actions[x] is state x's single output and transitions maps (x, i) to
    the next state. State 0 is the start state.
    """
    inputs = tuple(inputs)
    outputs = tuple(outputs)

    def rec(acts, trans):
        hole = None
        for x in range(len(acts)):
            for i in inputs:
                if (x, i) not in trans:
                    hole = (x, i)
                    break
            if hole:
                break
        if hole is None:
            yield tuple(acts), dict(trans)
            return
        for tgt in range(len(acts)):
            trans[hole] = tgt
            yield from rec(acts, trans)
        if len(acts) < n:
            trans[hole] = len(acts)
            for a in outputs:
                acts.append(a)
                yield from rec(acts, trans)
                acts.pop()
        del trans[hole]

    for a0 in outputs:
        yield from rec([a0], {})


def det_ufs_transducer(acts, trans, inputs, outputs) -> Transducer:
    states = tuple(range(len(acts)))
    output_fn = {x: dist_point(acts[x]) for x in states}
    transition_fn = {
        (x, i, acts[x]): trans[(x, i)] for x in states for i in inputs
    }
    m = UnifilarMachine(states, inputs, outputs, output_fn, transition_fn)
    return m.transducer(0)


def _float_chain_value(acts, trans, env, emit_cache):
    """Float success probability of a deterministic UFS against the env.

    The coupled process is a plain Markov chain (no action branching), so a
    single dense linear solve on the reachable part suffices. Used only as
    a pre-screen; anything that beats the incumbent is re-solved exactly.
    """
    import numpy as np

    keep = emit_cache.setdefault(None, [])
    index = {(0, id(env.t)): 0}
    nodes = [(0, env.t)]
    rows = []
    while len(rows) < len(nodes):
        x, t = nodes[len(rows)]
        cached = emit_cache.get(id(t))
        if cached is None:
            cached = ([(s, float(p)) for (s, tel), p in t.emit.items()
                       if tel == NOTHING],
                      sum(float(p) for (s, tel), p in t.emit.items()
                          if tel == SUCCESS),
                      env.is_certified(t.state_key))
            emit_cache[id(t)] = cached
            keep.append(t)
        fails, b, certified = cached
        a = acts[x]
        out = []
        if not certified:
            for s, p in fails:
                child = (trans[(x, s)], t.step(a, (s, NOTHING)))
                ck = (child[0], id(child[1]))
                j = index.get(ck)
                if j is None:
                    j = len(nodes)
                    index[ck] = j
                    nodes.append(child)
                out.append((j, p))
        rows.append((0.0 if certified else b, out))
    m = len(nodes)
    mat = np.eye(m)
    vec = np.zeros(m)
    for i2, (b, out) in enumerate(rows):
        vec[i2] = b
        for j, p in out:
            mat[i2, j] -= p
    return float(np.linalg.solve(mat, vec)[0])


def best_det_ufs(env: TeleoEnvironment, n: int, at_least=ZERO):
    """Best deterministic UFS policy with at most n states, exactly.

    A float linear solve screens the enumeration; every candidate within
    numerical tolerance of beating `at_least` (or the incumbent) is
    confirmed by the exact solver. Returns (value, policy transducer) for
    the best strict improvement over `at_least`, or (None, None).
    """
    inputs = tuple(env.states)
    outputs = tuple(env.actions)
    threshold = float(at_least) - 1e-7
    emit_cache = {}
    candidates = []
    for acts, trans in det_ufs_policies(n, inputs, outputs):
        v = _float_chain_value(acts, trans, env, emit_cache)
        if v > threshold:
            candidates.append((v, acts, dict(trans)))
    best_val = None
    best_pol = None
    for _, acts, trans in candidates:
        pol = det_ufs_transducer(acts, trans, inputs, outputs)
        exact = success_exact(pol, env)
        if exact > at_least and (best_val is None or exact > best_val):
            best_val, best_pol = exact, pol
    return best_val, best_pol


# --- Bellman-property checks -----------------------------------------------

@dataclass(frozen=True)
class BellmanReport:
    passed: bool
    verdict: OptimalityVerdict


def _evolve_policy(policy: Transducer, traj: Trajectory) -> Transducer:
    evolved = evolve(policy, Trajectory(traj.inputs, traj.outputs))
    if evolved is FAILED:
        raise InvalidTrajectory(f"policy does not support trajectory {traj!r}")
    return evolved


def bellman_check(policy: Transducer, env: TeleoEnvironment,
                  traj: Trajectory, horizon: int) -> BellmanReport:
    """Value-laden filtering check.

    Evolves the policy by the sensorimotor trajectory (states in, actions
    out) and the environment by the same actions with an all-nothing telos,
    then asks whether the evolved policy is still optimal for the evolved
    environment.
    """
    pol = _evolve_policy(policy, traj)
    cur = env
    for s, a in traj.steps():
        if cur.t.emit((s, NOTHING)) == 0:
            raise InvalidTrajectory(
                f"environment assigns probability 0 to ({s!r}, nothing)")
        cur = cur.evolve(a, s, NOTHING)
    verdict = check_optimal(pol, cur, horizon, ALL)
    return BellmanReport(verdict.status != "suboptimal", verdict)


def sensorimotor_bellman_check(policy: Transducer, env: TeleoEnvironment,
                               traj: Trajectory, horizon: int) -> BellmanReport:
    """Like bellman_check but the environment evolves success-ambivalently."""
    pol = _evolve_policy(policy, traj)
    cur = env
    for s, a in traj.steps():
        cur = ambivalent_evolve(cur, a, s)
    verdict = check_optimal(pol, cur, horizon, ALL)
    return BellmanReport(verdict.status != "suboptimal", verdict)


# --- specifiability --------------------------------------------------------

@dataclass(frozen=True)
class SpecifiabilityReport:
    specifiable: bool
    reason: str
    min_margin: Optional[Fraction] = None


def check_specifiable(policy: Transducer, env: TeleoEnvironment,
                      horizon: int) -> SpecifiabilityReport:
    """Is the policy uniquely optimal for the environment?

    Requires an optimal verdict against the full class, a unique argmax at
    every explored node of the optimal tree, and agreement between the
    policy's own actions and the tree along its support. The reported
    margin is the least path-weighted value drop of any single deviation.
    """
    if env.is_certified(env.t.state_key):
        return SpecifiabilityReport(False, "all policies tie at success 0")
    verdict = check_optimal(policy, env, horizon, ALL)
    if verdict.status != "optimal":
        return SpecifiabilityReport(False, f"optimality is {verdict.status}")
    order = _action_order(env.actions)
    tree = extract_optimal_policy(env, horizon, order)

    min_margin = [None]
    vmemo = {}
    seen = set()

    def opt(t, h):
        """Optimal value of the evolved environment, memo shared per check."""
        if env.is_certified(t.state_key):
            return ZERO
        key = (t.state_key, h) if t.state_key is not None else None
        if key is not None and key in vmemo:
            return vmemo[key]
        succ = ZERO
        fails = []
        for (s, tel), p in t.emit.items():
            if tel == SUCCESS:
                succ += p
            else:
                fails.append((s, p))
        result = succ
        if h > 0 and fails:
            result += max(
                sum((p * opt(t.step(a, (s, NOTHING)), h - 1) for s, p in fails),
                    ZERO)
                for a in order)
        if key is not None:
            vmemo[key] = result
        return result

    def walk(pol, t, node, weight):
        if node.action is None:
            return True
        if not node.unique_argmax:
            return False
        if pol.emit.support != frozenset({node.action}):
            return False
        key = (pol.state_key, t.state_key, node.horizon)
        if None not in key:
            if key in seen:
                return True
            seen.add(key)
        # Path-weighted value drop of the best single deviation here.
        fails = [(s, p) for (s, tel), p in t.emit.items() if tel == NOTHING]
        chosen = sum((p * node.children[s].value for s, p in fails), ZERO)
        for a in order:
            if a == node.action:
                continue
            other = sum((p * opt(t.step(a, (s, NOTHING)), node.horizon - 1)
                         for s, p in fails), ZERO)
            drop = weight * (chosen - other)
            if drop <= 0:
                return False
            if min_margin[0] is None or drop < min_margin[0]:
                min_margin[0] = drop
        for s, p in fails:
            if not walk(pol.step(s, node.action),
                        t.step(node.action, (s, NOTHING)),
                        node.children[s], weight * p):
                return False
        return True

    if len(order) > 1 and not walk(policy, env.t, tree, ONE):
        return SpecifiabilityReport(False, "optimal action not unique along support")
    return SpecifiabilityReport(True, "uniquely optimal at every explored node",
                                min_margin[0])


@dataclass(frozen=True)
class PreconditionReport:
    holds: bool
    sure_success: tuple
    missing_states: tuple


def specifiability_preconditions(policy: Transducer, env: TeleoEnvironment,
                                 depth: int) -> PreconditionReport:
    """Checks the two structural preconditions for specification arguments.

    (a) every valid trajectory stays valid when its telos marks are forced
    to nothing (no sure successes), and (b) every reached environment node
    gives every state positive probability. Either failure is reported with
    the offending trajectory.
    """
    sure = []
    missing = []
    seen = set()

    def rec(pol, t, path, d):
        key = (pol.state_key, t.state_key)
        if None not in key:
            if key in seen:
                return
            seen.add(key)
        for s in env.states:
            p0 = t.emit((s, NOTHING))
            p1 = t.emit((s, SUCCESS))
            if p0 + p1 == 0:
                missing.append((path, s))
            elif p0 == 0:
                sure.append((path, s))
        if d == 0:
            return
        for a in pol.emit.support:
            for (s, tel) in t.emit.support:
                rec(pol.step(s, a), t.step(a, (s, tel)),
                    path + ((s, tel, a),), d - 1)

    rec(policy, env.t, (), depth)
    return PreconditionReport(not sure and not missing, tuple(sure), tuple(missing))


# --- pointwise decomposition -----------------------------------------------

def pointwise_decompose(policy: Transducer, search_depth: int):
    """Split a stochastic policy as an even mixture of distinct policies.

    Finds the first (breadth-first) reachable node with a non-point
    emission, perturbs that emission by half its minimum support
    probability in two opposite directions, and splices the perturbed nodes
    back in. Returns (1/2, variant1, variant2) with the mixture behaviorally
    equal to the original to the search depth, or None when the policy is
    deterministic that deep.
    """
    frontier = [(policy, Trajectory())]
    found = None
    for _ in range(search_depth + 1):
        nxt = []
        for node, path in frontier:
            if len(node.emit.support) > 1:
                found = (node, path)
                break
            for o in sorted(node.emit.support, key=repr):
                for i in node.inputs:
                    nxt.append((node.step(i, o), path.append(i, o)))
        if found:
            break
        frontier = nxt
    if found is None:
        return None
    node, path = found
    support = sorted(node.emit.support, key=repr)
    o1 = min(support, key=lambda o: (node.emit(o), repr(o)))
    o2 = next(o for o in support if o != o1)
    delta = node.emit(o1) / 2

    def perturbed(sign):
        entries = dict(node.emit.items())
        entries[o1] = entries[o1] + sign * delta
        entries[o2] = entries[o2] - sign * delta
        return ExplicitTransducer(node.inputs, FiniteDist(entries), node.step)

    half = Fraction(1, 2)
    p1 = splice(policy, path, perturbed(1))
    p2 = splice(policy, path, perturbed(-1))
    assert behaviorally_equal(mix([half, half], [p1, p2]), policy, search_depth)
    return half, p1, p2


# --- i.i.d. sweep ----------------------------------------------------------

def _simplex_grid(k, resolution):
    if k == 1:
        yield (resolution,)
        return
    for first in range(resolution + 1):
        for rest in _simplex_grid(k - 1, resolution - first):
            yield (first,) + rest


def iid_sweep(env: TeleoEnvironment, resolution: int):
    """Exact success of every i.i.d. policy on a simplex grid.

    Returns (best parameters in action order, best value, unique flag);
    parameters are Fractions with denominator `resolution`.
    """
    if resolution < 2:
        raise ValueError("sweep resolution must be at least 2")
    actions = _action_order(env.actions)
    best = None
    best_params = None
    unique = True
    for counts in _simplex_grid(len(actions), resolution):
        params = tuple(Fraction(c, resolution) for c in counts)
        dist = FiniteDist(dict(zip(actions, params)))
        value = success_exact(iid(env.states, dist), env)
        if best is None or value > best:
            best, best_params, unique = value, params, True
        elif value == best:
            unique = False
    return best_params, best, unique

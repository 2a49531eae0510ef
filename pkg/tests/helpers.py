"""Seeded random generators for machines, policies, and environments."""

from fractions import Fraction

from teleotrans.prob import FiniteDist
from teleotrans.machines import MooreMachine, UnifilarMachine, deterministic_policy
from teleotrans.teleo import NOTHING, machine_env, telos_outputs


def random_dist(rng, symbols, max_weight=6):
    """Random exact distribution with small integer weights."""
    symbols = list(symbols)
    k = rng.randint(1, len(symbols))
    support = rng.sample(symbols, k)
    weights = [rng.randint(1, max_weight) for _ in support]
    total = sum(weights)
    return FiniteDist({s: Fraction(w, total) for s, w in zip(support, weights)})


def random_det_ufs(rng, n_states, inputs, outputs):
    """Random deterministic unifilar policy; returns (machine, transducer)."""
    states = list(range(n_states))
    output_of = {x: rng.choice(list(outputs)) for x in states}
    transition = {(x, i): rng.choice(states) for x in states for i in inputs}
    return deterministic_policy(inputs, outputs, rng.choice(states),
                                output_of, transition)


def random_stochastic_policy(rng, n_states, inputs, outputs):
    """Random unifilar policy with stochastic outputs."""
    states = list(range(n_states))
    output_fn = {x: random_dist(rng, outputs) for x in states}
    transition_fn = {}
    for x in states:
        for i in inputs:
            for o in output_fn[x].support:
                transition_fn[(x, i, o)] = rng.choice(states)
    m = UnifilarMachine(states, inputs, outputs, output_fn, transition_fn)
    return m.transducer(rng.choice(states))


def random_finite_env(rng, states, actions, n_live=3, doom_bias=2):
    """Random finite machine-backed environment with a certified doom state.

    Live states emit random (state, telos) distributions and transition to
    random live states or doom; doom is certified zero-success. Success is
    always reachable from the start unless the random draw kills it, which
    is fine for linearity/truncation tests.
    """
    outputs = telos_outputs(states)
    live = [("q", j) for j in range(n_live)]
    emits = {x: random_dist(rng, outputs) for x in live}
    emits["doom"] = FiniteDist(
        {(s, NOTHING): Fraction(1, len(states)) for s in states})
    trans = {}
    targets = live + ["doom"] * doom_bias
    for x, dist in emits.items():
        for o in dist.support:
            for a in actions:
                trans[(x, a, o)] = "doom" if x == "doom" else rng.choice(targets)
    m = UnifilarMachine(list(emits), actions, outputs, emits, trans)
    return machine_env(m, live[0], states, certified=["doom"])


def random_absorbing_env(rng, states, actions, depth=3, width=2):
    """Random environment absorbed into doom within `depth` steps.

    Layered DAG: layer k states only reach layer k+1 or doom, and the last
    layer always dooms, so finite-horizon values are exact beyond `depth`.
    """
    outputs = telos_outputs(states)
    layers = [[("L", k, j) for j in range(width)] for k in range(depth)]
    emits = {x: random_dist(rng, outputs) for layer in layers for x in layer}
    emits["doom"] = FiniteDist(
        {(s, NOTHING): Fraction(1, len(states)) for s in states})
    trans = {}
    for k, layer in enumerate(layers):
        nxt = layers[k + 1] + ["doom"] if k + 1 < depth else ["doom"]
        for x in layer:
            for o in emits[x].support:
                for a in actions:
                    trans[(x, a, o)] = rng.choice(nxt)
    for o in emits["doom"].support:
        for a in actions:
            trans[("doom", a, o)] = "doom"
    m = UnifilarMachine(list(emits), actions, outputs, emits, trans)
    return machine_env(m, layers[0][0], states, certified=["doom"])


def random_moore(rng, n_states, inputs, outputs):
    states = list(range(n_states))
    init = random_dist(rng, states)
    output_kernel = {y: random_dist(rng, outputs) for y in states}
    transition_kernel = {
        (y, i): random_dist(rng, states) for y in states for i in inputs
    }
    return MooreMachine(states, inputs, outputs, init, output_kernel,
                        transition_kernel)


def constant_policy(states, actions, action):
    """One-state machine that always plays the given action."""
    output_of = {0: action}
    transition = {(0, s): 0 for s in states}
    return deterministic_policy(states, actions, 0, output_of, transition)

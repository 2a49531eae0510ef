import random
from fractions import Fraction

import pytest

from teleotrans.prob import FiniteDist, dist_mix, dist_point, dist_uniform
from teleotrans.transducer import behaviorally_equal, iid, mix, unroll
from teleotrans.machines import (
    IncompleteMachine,
    MooreMachine,
    UnifilarMachine,
    UnknownState,
    deterministic_policy,
    moore_to_transducer,
    moore_to_unifilar,
    unifilar_to_transducer,
)

from helpers import random_moore


def one_state_machine(dist):
    transition_fn = {(0, i, o): 0 for i in ("a", "b") for o in dist.support}
    return UnifilarMachine([0], ("a", "b"), tuple(dist.support), {0: dist},
                           transition_fn)


def test_one_state_machine_is_iid():
    d = FiniteDist({"x": Fraction(1, 3), "y": Fraction(2, 3)})
    t = unifilar_to_transducer(one_state_machine(d), 0)
    assert behaviorally_equal(t, iid(("a", "b"), d), 6)


def test_flip_flop_alternates():
    output_of = {0: "H", 1: "T"}
    transition = {(x, i): 1 - x for x in (0, 1) for i in ("a",)}
    _, t = deterministic_policy(("a",), ("H", "T"), 0, output_of, transition)
    table = unroll(t, 2)
    assert table.prob(("a", "a"), ("H", "T", "H")) == 1


def test_transducers_interned_per_state():
    d = dist_point("x")
    m = one_state_machine(d)
    assert m.transducer(0) is m.transducer(0)


def test_machine_validation():
    d = dist_uniform("xy")
    with pytest.raises(IncompleteMachine):
        UnifilarMachine([0], ("a",), ("x", "y"), {0: d}, {(0, "a", "x"): 0})
    with pytest.raises(UnknownState):
        UnifilarMachine([0], ("a",), ("x", "y"), {0: d},
                        {(0, "a", "x"): 0, (0, "a", "y"): 5})
    with pytest.raises(UnknownState):
        one_state_machine(d).transducer(9)


def test_point_init_moore_equals_unifilar_reading():
    # Deterministic transitions and point init: beliefs stay point masses.
    states = (0, 1)
    m = MooreMachine(
        states, ("a",), ("x", "y"),
        dist_point(0),
        {0: dist_point("x"), 1: dist_point("y")},
        {(0, "a"): dist_point(1), (1, "a"): dist_point(0)},
    )
    t = moore_to_transducer(m)
    table = unroll(t, 2)
    assert table.prob(("a", "a"), ("x", "y", "x")) == 1


def test_identity_kernel_belief_collapse():
    # Uniform start, identity transitions, outputs reveal the state: after the
    # first output the belief is a point mass and all later outputs repeat it.
    states = (0, 1)
    m = MooreMachine(
        states, ("a",), states,
        dist_uniform(states),
        {y: dist_point(y) for y in states},
        {(y, "a"): dist_point(y) for y in states},
    )
    key, bm = moore_to_unifilar(m)
    assert bm.output_fn(key) == dist_uniform(states)
    t = bm.transducer(key)
    after = t.step("a", 0)
    assert after.emit == dist_point(0)
    assert after.step("a", 0) is after


def hidden_path_prob(m, istr, ostr):
    """Exhaustive joint over hidden-state paths."""
    total = Fraction(0)

    def rec(dist_over_y, k, weight):
        nonlocal total
        for y, wy in dist_over_y.items():
            py = m.output_kernel[y](ostr[k])
            if py == 0:
                continue
            if k == len(ostr) - 1:
                total += weight * wy * py
            else:
                rec(m.transition_kernel[(y, istr[k])], k + 1, weight * wy * py)

    rec(m.init, 0, Fraction(1))
    return total


def all_strings(symbols, n):
    if n == 0:
        yield ()
        return
    for rest in all_strings(symbols, n - 1):
        for s in symbols:
            yield rest + (s,)


@pytest.mark.parametrize("seed", range(8))
def test_moore_unroll_matches_hidden_path_oracle(seed):
    rng = random.Random(1000 + seed)
    m = random_moore(rng, 3, ("a", "b"), ("x", "y"))
    table = unroll(moore_to_transducer(m), 2)
    for istr in all_strings(m.inputs, 2):
        for ostr in all_strings(m.outputs, 3):
            assert table.prob(istr, ostr) == hidden_path_prob(m, istr, ostr)


@pytest.mark.parametrize("seed", range(8))
def test_state_mixture_lemma(seed):
    # Reading a mixed initial belief equals mixing the two readings.
    rng = random.Random(2000 + seed)
    m = random_moore(rng, 3, ("a", "b"), ("x", "y"))
    psi1 = dist_point(0)
    psi2 = dist_uniform(m.states)
    half = Fraction(1, 2)
    mixed_init = MooreMachine(m.states, m.inputs, m.outputs,
                              dist_mix([half, half], [psi1, psi2]),
                              m.output_kernel, m.transition_kernel)
    single = moore_to_transducer(mixed_init)
    parts = [
        moore_to_transducer(MooreMachine(m.states, m.inputs, m.outputs, psi,
                                         m.output_kernel, m.transition_kernel))
        for psi in (psi1, psi2)
    ]
    assert behaviorally_equal(single, mix([half, half], parts), 4)


def test_ufs_embeds_into_larger_machine():
    rng = random.Random(42)
    from helpers import random_det_ufs
    machine, t = random_det_ufs(rng, 2, ("s0", "s1"), ("a0", "a1"))
    # Add an unreachable extra state; behavior is unchanged.
    output_fn = dict(machine.output_fn)
    output_fn["extra"] = dist_point("a0")
    transition_fn = dict(machine.transition_fn)
    for i in machine.inputs:
        transition_fn[("extra", i, "a0")] = "extra"
    bigger = UnifilarMachine(list(machine.states) + ["extra"], machine.inputs,
                             machine.outputs, output_fn, transition_fn)
    start = next(x for x in machine.states
                 if machine.transducer(x) is t)
    assert behaviorally_equal(t, bigger.transducer(start), 6)

import random
from fractions import Fraction

import pytest

from teleotrans.prob import FiniteDist, Trajectory, dist_point, dist_uniform
from teleotrans.transducer import (
    FAILED,
    InvalidTrajectory,
    MixtureTransducer,
    UnsupportedOutput,
    behaviorally_equal,
    constant,
    evolve,
    iid,
    mix,
    reroll,
    splice,
    unroll,
    unrolled_step,
)

from helpers import random_stochastic_policy


INPUTS = ("i0", "i1")


def coin(p_heads):
    return iid(INPUTS, FiniteDist({"H": p_heads, "T": 1 - p_heads}))


def test_iid_step_is_identity():
    t = coin(Fraction(1, 3))
    assert t.step("i0", "H") is t
    assert t.emit("T") == Fraction(2, 3)


def test_step_rejects_unsupported():
    t = constant(INPUTS, "H")
    with pytest.raises(UnsupportedOutput):
        t.step("i0", "T")
    with pytest.raises(UnsupportedOutput):
        t.step("bogus", "H")


def test_step_memoized():
    rng = random.Random(7)
    t = random_stochastic_policy(rng, 3, INPUTS, ("H", "T"))
    o = next(iter(t.emit.support))
    assert t.step("i0", o) is t.step("i0", o)


def test_mixture_emit_and_posterior():
    m = mix([Fraction(1, 4), Fraction(3, 4)],
            [coin(Fraction(1, 1)), coin(Fraction(1, 3))])
    assert m.emit("H") == Fraction(1, 4) + Fraction(3, 4) * Fraction(1, 3)
    # Posterior after H: weights 1/4*1 and 3/4*1/3, renormalized.
    post = dict((c.emit("H"), w) for w, c in m.posterior("H"))
    assert post[Fraction(1)] == Fraction(1, 2)
    assert post[Fraction(1, 3)] == Fraction(1, 2)


def test_mixture_update_drops_non_supporting_components():
    m = mix([Fraction(1, 2), Fraction(1, 2)],
            [constant(INPUTS, "H"), constant(INPUTS, "T")])
    after = m.step("i0", "H")
    assert after.emit == dist_point("H")


def test_mixture_weight_validation():
    from teleotrans.prob import WeightSumMismatch
    with pytest.raises(WeightSumMismatch):
        MixtureTransducer([Fraction(1, 2)], [coin(Fraction(1, 2)), coin(Fraction(1, 3))])
    with pytest.raises(WeightSumMismatch):
        mix([Fraction(1, 2), Fraction(1, 3)], [coin(Fraction(1, 2)), coin(Fraction(1, 3))])


def test_evolve_and_failure_marker():
    t = constant(INPUTS, "H")
    good = Trajectory.of(("i0", "H"), ("i1", "H"))
    bad = Trajectory.of(("i0", "H"), ("i1", "T"))
    assert evolve(t, good) is t
    assert evolve(t, bad) is FAILED


def test_splice_replaces_exactly_one_continuation():
    t = coin(Fraction(1, 2))
    tail = constant(INPUTS, "T")
    traj = Trajectory.of(("i0", "H"))
    s = splice(t, traj, tail)
    assert s.emit == t.emit
    assert s.step("i0", "H") is tail
    # Other first steps keep the original behavior.
    assert s.step("i0", "T").emit == t.emit
    with pytest.raises(InvalidTrajectory):
        splice(constant(INPUTS, "H"), Trajectory.of(("i0", "T")), tail)


def test_splice_empty_trajectory_is_tail():
    tail = constant(INPUTS, "T")
    assert splice(coin(Fraction(1, 2)), Trajectory(), tail) is tail


def test_unroll_tables_shape_and_causality():
    rng = random.Random(11)
    t = random_stochastic_policy(rng, 3, INPUTS, ("H", "T"))
    table = unroll(t, 3)
    assert table.check_causality()
    # Row for each input string sums to 1.
    for n in range(4):
        for istr, row in table.tables[n].items():
            assert sum(row.values()) == 1
            assert all(len(o) == n + 1 for o in row)


def test_unrolled_step_matches_stepped_unroll():
    rng = random.Random(13)
    t = random_stochastic_policy(rng, 3, INPUTS, ("H", "T"))
    table = unroll(t, 3)
    o = next(iter(t.emit.support))
    lhs = unrolled_step(table, "i1", o)
    rhs = unroll(t.step("i1", o), 2, outputs=table.outputs)
    assert lhs == rhs


def test_unrolled_step_rejects_zero_probability_output():
    table = unroll(constant(INPUTS, "H"), 2, outputs=("H", "T"))
    with pytest.raises(UnsupportedOutput):
        unrolled_step(table, "i0", "T")


def test_reroll_round_trip_small():
    rng = random.Random(17)
    t = random_stochastic_policy(rng, 2, INPUTS, ("H", "T"))
    table = unroll(t, 4)
    assert unroll(reroll(table), 4, outputs=table.outputs) == table


def test_behavioral_equality_basic():
    assert behaviorally_equal(coin(Fraction(1, 2)), coin(Fraction(1, 2)), 10)
    assert not behaviorally_equal(coin(Fraction(1, 2)), coin(Fraction(1, 3)), 1)
    assert not behaviorally_equal(coin(Fraction(1, 2)),
                                  iid(("i0",), dist_uniform("HT")), 1)


def test_behavioral_equality_coinductive_on_keys():
    # Two 2-state flip-flops from distinct machines: equal behavior, distinct
    # keys, cyclic state graphs; the assumed-pairs set must close the loop.
    from teleotrans.machines import deterministic_policy

    def flip_flop():
        output_of = {0: "H", 1: "T"}
        transition = {(x, i): 1 - x for x in (0, 1) for i in INPUTS}
        return deterministic_policy(INPUTS, ("H", "T"), 0, output_of, transition)[1]

    assert behaviorally_equal(flip_flop(), flip_flop(), 500)


def test_behavioral_equality_splice_detected_deep():
    t = constant(INPUTS, "H")
    changed = splice(t, Trajectory.of(("i0", "H"), ("i0", "H")), constant(INPUTS, "T"))
    assert behaviorally_equal(t, changed, 1)
    assert not behaviorally_equal(t, changed, 2)

"""Compiled-in demonstration scenarios with expected exact outcomes.

Each demo builds its own machines, computes the relevant values, and
compares them against the expected exact rationals. Demos exist so the CLI
can reproduce every headline number without external files.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .prob import Trajectory, dist_uniform, format_rational
from .transducer import behaviorally_equal, iid
from . import teleo as T
from . import planner as P


@dataclass(frozen=True)
class DemoResult:
    name: str
    passed: bool
    facts: tuple  # (label, value string) pairs, in report order


def _fact(label, value):
    if isinstance(value, Fraction):
        value = format_rational(value)
    return (label, str(value))


def demo_doom_despair(config) -> DemoResult:
    states, actions = (1, 2), (1, 2)
    doom = T.doom_env(states, actions)
    despair = T.despair_env(states, actions)
    pol = iid(states, dist_uniform(actions))
    s_doom = T.success_exact(pol, doom)
    s_despair = T.success_exact(pol, despair)
    stepped = despair.evolve(1, 1)
    collapses = behaviorally_equal(stepped.t, doom.t, config.depth)
    passed = s_doom == 0 and s_despair == Fraction(1, 2) and collapses
    return DemoResult("doom-despair", passed, (
        _fact("success on doom", s_doom),
        _fact("success on despair", s_despair),
        _fact(f"despair after one step = doom (depth {config.depth})", collapses),
    ))


def demo_testing_specifiability(config) -> DemoResult:
    _, pol = T.mimic_policy(2, 1)
    env = T.uniform_testing(pol)
    value = T.success_exact(pol, env)
    report = P.check_specifiable(pol, env, min(config.horizon, 6))
    passed = value == 1 and report.specifiable
    return DemoResult("testing-specifiability", passed, (
        _fact("success of the tested policy", value),
        _fact("specifiable", report.specifiable),
        _fact("minimum deviation margin", report.min_margin),
    ))


def demo_absent_minded_driver(config) -> DemoResult:
    env = T.absent_minded_env()
    pc, pe = Fraction(1, 3), Fraction(2, 3)
    from .prob import FiniteDist
    pol = iid(env.states, FiniteDist({T.CONTINUE: pc, T.EXIT: pe}))
    sample = T.success_exact(pol, env)
    params, best, unique = P.iid_sweep(env, config.grid)
    passed = (sample == pc * pe
              and params == (Fraction(1, 2), Fraction(1, 2))
              and best == Fraction(1, 4) and unique)
    return DemoResult("absent-minded-driver", passed, (
        _fact("success at (continue 1/3, exit 2/3)", sample),
        _fact("grid argmax", "(" + ", ".join(map(format_rational, params)) + ")"),
        _fact("grid optimum", best),
        _fact("argmax unique on grid", unique),
    ))


def _ufs_counterexample(n, alpha):
    env = T.counterexample_env(n)
    _, pol = T.counterexample_policy(n)
    value = T.success_exact(pol, env)
    expected = Fraction(2 ** (n - 1) + 2 ** (n - 2) - 1, 2 ** n - 1)
    evolved_env = env.evolve(n + 1, 1)
    evolved_pol = pol.step(1, n + 1)
    evolved_alpha = T.alpha_mimic_policy(n, alpha).step(1, n + 1)
    v_pol = T.success_exact(evolved_pol, evolved_env)
    v_alpha = T.success_exact(evolved_alpha, evolved_env)
    passed = value == expected and v_alpha > v_pol
    return passed, (
        _fact(f"n={n} near-mimic policy value", value),
        _fact(f"n={n} closed form", expected),
        _fact(f"n={n} evolved near-mimic value", v_pol),
        _fact(f"n={n} evolved alpha-mimic value (alpha {format_rational(alpha)})",
              v_alpha),
        _fact(f"n={n} strict improvement after evolution", v_alpha > v_pol),
    )


def demo_ufs_counterexample(config) -> DemoResult:
    facts = []
    passed = True
    for n in (2, 3):
        ok, more = _ufs_counterexample(n, config.alpha)
        passed = passed and ok
        facts.extend(more)
    return DemoResult("ufs-counterexample", passed, tuple(facts))


def _tricky_pair():
    _, pol = T.mimic_policy(2, 1)
    _, pol2 = T.counterexample_policy(2)
    return pol, pol2


def demo_tricky_testing(config) -> DemoResult:
    pol, pol2 = _tricky_pair()
    env = T.tricky_testing(pol, pol2)
    evolved = T.ambivalent_evolve(env, 1, 1)
    v_pol = T.success_exact(pol, evolved)
    v_pol2 = T.success_exact(pol2, evolved)
    traj = Trajectory((1,), (1,))
    senso = P.sensorimotor_bellman_check(pol, env, traj, config.horizon)
    laden = P.bellman_check(pol, env, traj, config.horizon)
    passed = (v_pol == Fraction(13, 16) and v_pol2 == Fraction(15, 16)
              and not senso.passed and laden.passed)
    return DemoResult("tricky-testing", passed, (
        _fact("tested policy after ambivalent step", v_pol),
        _fact("rival policy after ambivalent step", v_pol2),
        _fact("sensorimotor-only check fails (as expected)", not senso.passed),
        _fact("value-laden check passes", laden.passed),
    ))


def demo_truncation_equivalence(config) -> DemoResult:
    pol, pol2 = _tricky_pair()
    tricky = T.tricky_testing(pol, pol2)
    testing = T.uniform_testing(pol)
    z_tricky = T.truncate_single_success(tricky)
    z_testing = T.truncate_single_success(testing)
    preserved = (T.success_exact(pol, z_tricky) == T.success_exact(pol, tricky))
    equal = behaviorally_equal(z_tricky.t, z_testing.t, 4)
    passed = preserved and equal
    return DemoResult("truncation-equivalence", passed, (
        _fact("truncation preserves success", preserved),
        _fact("truncated tricky = truncated testing (depth 4)", equal),
    ))


DEMOS = {
    "doom-despair": demo_doom_despair,
    "testing-specifiability": demo_testing_specifiability,
    "absent-minded-driver": demo_absent_minded_driver,
    "ufs-counterexample": demo_ufs_counterexample,
    "tricky-testing": demo_tricky_testing,
    "truncation-equivalence": demo_truncation_equivalence,
}


def run_demo(name, config) -> DemoResult:
    if name not in DEMOS:
        raise KeyError(f"unknown demo {name!r}; available: {', '.join(sorted(DEMOS))}")
    return DEMOS[name](config)

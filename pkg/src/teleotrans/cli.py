"""Batch command-line front end.

Subcommands:
  demo [NAME ...]    run compiled-in demonstrations (all when none named)
  eval SCENARIO      run a scenario's evaluation-style tasks
  plan SCENARIO      run a scenario's planning tasks
  check SCENARIO     run a scenario's check tasks

A scenario file names machines, policies, and environments and lists tasks;
see fileformat.load_scenario. Reports are deterministic: the structured
format is canonical JSON, so identical inputs give byte-identical output.
The exit status is nonzero exactly when some demo or check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from .prob import Trajectory, format_rational, parse_rational
from .transducer import iid
from .machines import MooreMachine, moore_to_transducer
from . import teleo as T
from . import planner as P
from .demos import DEMOS, run_demo
from .fileformat import (
    ValidationError,
    decode_symbol,
    dump_machine,
    encode_symbol,
    load_scenario,
    machine_from_data,
)


@dataclass(frozen=True)
class Config:
    horizon: int = 8
    depth: int = 6
    grid: int = 100
    alpha: Fraction = Fraction(1, 100)


def _enc(value):
    """JSON-safe rendering with rationals as canonical p/q strings."""
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_enc(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _enc(v) for k, v in sorted(value.items(), key=repr)}
    if isinstance(value, (int, str)):
        return value
    return repr(value)


class ScenarioError(ValueError):
    pass


class _Scenario:
    """Resolved named objects of one scenario document."""

    def __init__(self, data):
        self.machines = {}
        self.policies = {}
        self.environments = {}
        for row in data.get("machines", []):
            name = row.get("name")
            if not name:
                raise ValidationError("machine entry without a name")
            self.machines[name] = machine_from_data(row)
        for row in data.get("policies", []):
            self.policies[row["name"]] = self._build_policy(row)
        for row in data.get("environments", []):
            self.environments[row["name"]] = self._build_environment(row)
        self.tasks = data.get("tasks", [])

    def _machine(self, name):
        if name not in self.machines:
            raise ScenarioError(f"unknown machine {name!r}")
        return self.machines[name]

    def _build_policy(self, row):
        params = row.get("params", {})
        if "machine" in row:
            machine, start = self._machine(row["machine"])
            if "start" in row:
                start = decode_symbol(row["start"])
            if isinstance(machine, MooreMachine):
                return moore_to_transducer(machine)
            if start is None:
                raise ScenarioError(f"policy {row['name']!r} needs a start state")
            return machine.transducer(start)
        if "iid" in row:
            spec = row["iid"]
            states = tuple(decode_symbol(s) for s in spec["states"])
            from .fileformat import decode_dist
            return iid(states, decode_dist(spec["dist"]))
        zoo = row.get("zoo")
        if zoo == "mimic":
            return T.mimic_policy(int(params["n"]), decode_symbol(params["start"]))[1]
        if zoo == "near-mimic":
            return T.counterexample_policy(int(params["n"]))[1]
        if zoo == "alpha-mimic":
            return T.alpha_mimic_policy(int(params["n"]),
                                        parse_rational(str(params["alpha"])))
        raise ScenarioError(f"cannot build policy from {row!r}")

    def _build_environment(self, row):
        params = row.get("params", {})
        if "machine" in row:
            machine, start = self._machine(row["machine"])
            if "start" in row:
                start = decode_symbol(row["start"])
            states = tuple(decode_symbol(s) for s in row["states"])
            certified = [decode_symbol(s) for s in row.get("certified", [])]
            return T.machine_env(machine, start, states, certified)
        zoo = row.get("zoo")
        if zoo in ("doom", "despair", "success"):
            states = tuple(decode_symbol(s) for s in params["states"])
            actions = tuple(decode_symbol(a) for a in params["actions"])
            maker = {"doom": T.doom_env, "despair": T.despair_env,
                     "success": T.success_env}[zoo]
            return maker(states, actions)
        if zoo == "uniform-testing":
            return T.uniform_testing(self._policy(params["policy"]))
        if zoo == "tricky-testing":
            return T.tricky_testing(self._policy(params["policy"]),
                                    self._policy(params["rival"]))
        if zoo == "mimic":
            return T.mimic_env(int(params["n"]), decode_symbol(params["start"]))
        if zoo == "counterexample":
            return T.counterexample_env(int(params["n"]))
        if zoo == "absent-minded":
            return T.absent_minded_env()
        raise ScenarioError(f"cannot build environment from {row!r}")

    def _policy(self, name):
        if name not in self.policies:
            raise ScenarioError(f"unknown policy {name!r}")
        return self.policies[name]

    def _environment(self, name):
        if name not in self.environments:
            raise ScenarioError(f"unknown environment {name!r}")
        return self.environments[name]


def _trajectory(spec) -> Trajectory:
    return Trajectory(tuple(decode_symbol(s) for s in spec["inputs"]),
                      tuple(decode_symbol(a) for a in spec["outputs"]))


_EVAL_TASKS = ("eval", "sweep", "decompose")
_PLAN_TASKS = ("plan",)
_CHECK_TASKS = ("check-bellman", "check-sensorimotor", "check-specifiable", "demo")


def _run_task(scenario, task, config):
    kind = task.get("task")
    horizon = int(task.get("horizon", config.horizon))
    result = {"task": kind}
    if kind == "eval":
        pol = scenario._policy(task["policy"])
        env = scenario._environment(task["environment"])
        interval = T.success_interval(pol, env, horizon)
        result.update({
            "lo": _enc(interval.lo),
            "hi": _enc(interval.hi),
            "exact": _enc(interval.exact),
            "horizon": horizon,
        })
    elif kind == "plan":
        env = scenario._environment(task["environment"])
        tree = P.extract_optimal_policy(env, horizon)
        result.update({
            "optimal_value": _enc(tree.value),
            "root_action": _enc(encode_symbol(tree.action)
                                if tree.action is not None else None),
            "unique_argmax": tree.unique_argmax,
            "horizon": horizon,
        })
    elif kind in ("check-bellman", "check-sensorimotor"):
        pol = scenario._policy(task["policy"])
        env = scenario._environment(task["environment"])
        traj = _trajectory(task["trajectory"])
        check = (P.bellman_check if kind == "check-bellman"
                 else P.sensorimotor_bellman_check)
        report = check(pol, env, traj, horizon)
        result.update({
            "passed": report.passed,
            "status": report.verdict.status,
            "value": _enc(report.verdict.value),
        })
    elif kind == "check-specifiable":
        pol = scenario._policy(task["policy"])
        env = scenario._environment(task["environment"])
        report = P.check_specifiable(pol, env, horizon)
        result.update({
            "passed": report.specifiable,
            "reason": report.reason,
            "min_margin": _enc(report.min_margin),
        })
    elif kind == "decompose":
        pol = scenario._policy(task["policy"])
        depth = int(task.get("depth", config.depth))
        found = P.pointwise_decompose(pol, depth)
        if found is None:
            result.update({"found": False})
        else:
            alpha, c1, c2 = found
            result.update({
                "found": True,
                "alpha": _enc(alpha),
                "component_emissions": [
                    {_format_symbol(o): _enc(p) for o, p in sorted(c.emit.items(), key=repr)}
                    for c in (c1, c2)
                ],
            })
    elif kind == "sweep":
        env = scenario._environment(task["environment"])
        resolution = int(task.get("resolution", config.grid))
        params, best, unique = P.iid_sweep(env, resolution)
        result.update({
            "argmax": [_enc(p) for p in params],
            "value": _enc(best),
            "unique": unique,
        })
    elif kind == "demo":
        demo = run_demo(task["name"], config)
        result.update({
            "name": demo.name,
            "passed": demo.passed,
            "facts": [[label, value] for label, value in demo.facts],
        })
    else:
        raise ScenarioError(f"unknown task kind {kind!r}")
    return result


def _format_symbol(symbol):
    return json.dumps(encode_symbol(symbol))


def _run_scenario(path, kinds, config, dump):
    with open(path) as fh:
        scenario = _Scenario(load_scenario(fh.read()))
    report = {"tasks": []}
    failed = False
    for task in scenario.tasks:
        if task.get("task") not in kinds:
            continue
        try:
            result = _run_task(scenario, task, config)
        except Exception as exc:  # isolate task failures, keep running
            result = {"task": task.get("task"), "error": str(exc)}
            failed = True
        if result.get("passed") is False:
            failed = True
        report["tasks"].append(result)
    if dump:
        report["machines"] = {
            name: dump_machine(machine, start)
            for name, (machine, start) in sorted(scenario.machines.items())
        }
    return report, failed


def _print_report(report, fmt, out):
    if fmt == "structured":
        out.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
        return
    for result in report.get("tasks", []):
        head = result.get("name") or result.get("task")
        if "error" in result:
            out.write(f"{head}: ERROR {result['error']}\n")
            continue
        status = ""
        if "passed" in result:
            status = " PASS" if result["passed"] else " FAIL"
        out.write(f"{head}:{status}\n")
        for key, value in result.items():
            if key in ("task", "name", "passed", "facts"):
                continue
            out.write(f"  {key}: {value}\n")
        for label, value in result.get("facts", []):
            out.write(f"  {label}: {value}\n")
    for name, text in sorted(report.get("machines", {}).items()):
        out.write(f"--- machine {name} ---\n{text}")


def _add_common(parser):
    parser.add_argument("--horizon", type=int, default=8,
                        help="planning horizon (default 8)")
    parser.add_argument("--depth", type=int, default=6,
                        help="behavioral-equality / search depth (default 6)")
    parser.add_argument("--grid", type=int, default=100,
                        help="i.i.d. sweep resolution (default 100)")
    parser.add_argument("--alpha", type=parse_rational, default=Fraction(1, 100),
                        help="give-up probability for the alpha-mimic policy, "
                             "as p/q (default 1/100)")
    parser.add_argument("--format", choices=("text", "structured"),
                        default="text", help="report format")
    parser.add_argument("--dump", action="store_true",
                        help="re-emit machine definitions in the report")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="teleotrans",
        description="Exact analysis of stochastic transducers and "
                    "goal-tagged environments.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_demo = sub.add_parser("demo", help="run compiled-in demonstrations")
    p_demo.add_argument("names", nargs="*", help="demo names (default: all)")
    _add_common(p_demo)
    for cmd, help_text in (("eval", "run evaluation tasks from a scenario"),
                           ("plan", "run planning tasks from a scenario"),
                           ("check", "run check tasks from a scenario")):
        p = sub.add_parser(cmd, help=help_text)
        p.add_argument("scenario", help="scenario file (YAML)")
        _add_common(p)
    args = parser.parse_args(argv)
    config = Config(args.horizon, args.depth, args.grid, args.alpha)

    if args.command == "demo":
        names = args.names or sorted(DEMOS)
        report = {"tasks": []}
        failed = False
        for name in names:
            try:
                demo = run_demo(name, config)
                result = {"task": "demo", "name": demo.name, "passed": demo.passed,
                          "facts": [[label, value] for label, value in demo.facts]}
            except Exception as exc:
                result = {"task": "demo", "name": name, "error": str(exc)}
                failed = True
            if result.get("passed") is False:
                failed = True
            report["tasks"].append(result)
    else:
        kinds = {"eval": _EVAL_TASKS, "plan": _PLAN_TASKS,
                 "check": _CHECK_TASKS}[args.command]
        try:
            report, failed = _run_scenario(args.scenario, kinds, config, args.dump)
        except (OSError, ValueError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return 2

    _print_report(report, args.format, sys.stdout)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

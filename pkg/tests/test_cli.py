import json
import random

import pytest

from teleotrans import teleo as T
from teleotrans.cli import main
from teleotrans.fileformat import (
    ParseError,
    ValidationError,
    dump_machine,
    load_machine,
    machine_to_data,
)

from helpers import random_moore, random_stochastic_policy


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


@pytest.mark.parametrize("seed", range(5))
def test_unifilar_round_trip(seed):
    rng = random.Random(500 + seed)
    t = random_stochastic_policy(rng, 3, ("s0", "s1"), ("a0", "a1"))
    machine = t.machine
    text = dump_machine(machine, t.state)
    loaded, start = load_machine(text)
    assert machine_to_data(loaded, start) == machine_to_data(machine, t.state)


@pytest.mark.parametrize("seed", range(5))
def test_moore_round_trip(seed):
    rng = random.Random(600 + seed)
    m = random_moore(rng, 3, ("a", "b"), ("x", "y"))
    loaded, _ = load_machine(dump_machine(m))
    assert machine_to_data(loaded) == machine_to_data(m)


def test_tuple_symbols_round_trip():
    env = T.counterexample_env(2)
    machine = env.t.machine
    loaded, start = load_machine(dump_machine(machine, env.t.state))
    assert machine_to_data(loaded, start) == machine_to_data(machine, env.t.state)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        load_machine("kind: [unclosed")
    assert err.value.line is not None


def test_validation_errors():
    with pytest.raises(ValidationError):
        load_machine("kind: unifilar\ninputs: [1]\n")
    with pytest.raises(ValidationError):
        load_machine("kind: elevator\n")


def test_demo_command_passes(capsys):
    code, out = run_cli(["demo", "doom-despair", "tricky-testing"], capsys)
    assert code == 0
    assert "doom-despair: PASS" in out
    assert "tricky-testing: PASS" in out


def test_demo_structured_is_deterministic(capsys):
    code1, out1 = run_cli(["demo", "ufs-counterexample", "--format", "structured"],
                          capsys)
    code2, out2 = run_cli(["demo", "ufs-counterexample", "--format", "structured"],
                          capsys)
    assert code1 == code2 == 0
    assert out1 == out2
    report = json.loads(out1)
    assert report["tasks"][0]["passed"] is True


def test_unknown_demo_fails(capsys):
    code, out = run_cli(["demo", "not-a-demo"], capsys)
    assert code == 1
    assert "ERROR" in out


SCENARIO = """
policies:
  - name: pi
    zoo: mimic
    params: {n: 2, start: 1}
  - name: rival
    zoo: near-mimic
    params: {n: 2}
environments:
  - name: testing
    zoo: uniform-testing
    params: {policy: pi}
  - name: ce
    zoo: counterexample
    params: {n: 2}
tasks:
  - task: eval
    policy: pi
    environment: testing
    horizon: 4
  - task: eval
    policy: rival
    environment: ce
  - task: plan
    environment: ce
    horizon: 4
  - task: sweep
    environment: ce
    resolution: 4
  - task: check-specifiable
    policy: pi
    environment: testing
    horizon: 5
  - task: check-bellman
    policy: pi
    environment: testing
    horizon: 5
    trajectory: {inputs: [1], outputs: [1]}
"""


def test_scenario_eval_and_check(tmp_path, capsys):
    path = tmp_path / "scenario.yaml"
    path.write_text(SCENARIO)
    code, out = run_cli(["eval", str(path), "--format", "structured"], capsys)
    assert code == 0
    report = json.loads(out)
    kinds = [t["task"] for t in report["tasks"]]
    assert kinds == ["eval", "eval", "sweep"]
    assert report["tasks"][0]["exact"] == "1"
    assert report["tasks"][1]["exact"] == "2/3"

    code, out = run_cli(["check", str(path)], capsys)
    assert code == 0
    assert "check-specifiable: PASS" in out
    assert "check-bellman: PASS" in out

    code, out = run_cli(["plan", str(path), "--format", "structured"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["tasks"][0]["root_action"] == 3


def test_scenario_task_failures_are_isolated(tmp_path, capsys):
    path = tmp_path / "scenario.yaml"
    path.write_text("""
policies:
  - name: pi
    zoo: mimic
    params: {n: 2, start: 1}
environments:
  - name: testing
    zoo: uniform-testing
    params: {policy: pi}
tasks:
  - task: eval
    policy: nonexistent
    environment: testing
  - task: eval
    policy: pi
    environment: testing
""")
    code, out = run_cli(["eval", str(path), "--format", "structured"], capsys)
    assert code == 1
    report = json.loads(out)
    assert "error" in report["tasks"][0]
    assert report["tasks"][1]["exact"] == "1"


def test_dump_round_trips_scenario_machines(tmp_path, capsys):
    import yaml
    rng = random.Random(700)
    t = random_stochastic_policy(rng, 3, ("s0", "s1"), ("a0", "a1"))
    machine_row = machine_to_data(t.machine, t.state)
    machine_row["name"] = "m"
    scenario = {
        "machines": [machine_row],
        "policies": [{"name": "pi", "machine": "m"}],
        "environments": [{"name": "env", "zoo": "despair",
                          "params": {"states": ["s0", "s1"],
                                     "actions": ["a0", "a1"]}}],
        "tasks": [{"task": "eval", "policy": "pi", "environment": "env"}],
    }
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(scenario))
    code, out = run_cli(["eval", str(path), "--dump", "--format", "structured"],
                        capsys)
    assert code == 0
    report = json.loads(out)
    assert report["tasks"][0]["exact"] == "1/2"
    loaded, start = load_machine(report["machines"]["m"])
    assert machine_to_data(loaded, start) == machine_to_data(t.machine, t.state)


def test_missing_scenario_file(capsys):
    code = main(["eval", "/nonexistent/scenario.yaml"])
    capsys.readouterr()
    assert code == 2

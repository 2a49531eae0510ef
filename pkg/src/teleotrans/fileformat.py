"""Text formats for machines and scenarios, with exact round-trips.

Machines are stored as YAML documents. Probabilities are quoted "p/q"
literals so that nothing ever passes through floating point; symbols may be
integers, strings, or (nested) lists, which are read back as tuples.
"""

from __future__ import annotations

from fractions import Fraction

import yaml

from .prob import FiniteDist, format_rational, parse_rational
from .machines import MooreMachine, UnifilarMachine


class ParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(ValueError):
    pass


def _load_yaml(text):
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ParseError(exc.problem or "invalid document",
                         None if mark is None else mark.line + 1,
                         None if mark is None else mark.column + 1) from exc
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from exc


def encode_symbol(x):
    if isinstance(x, tuple):
        return [encode_symbol(v) for v in x]
    if isinstance(x, bool):
        raise ValidationError(f"boolean symbol {x!r} not supported")
    if isinstance(x, Fraction):
        return {"rational": format_rational(x)}
    if isinstance(x, int):
        return int(x)
    if isinstance(x, str):
        return x
    raise ValidationError(f"symbol {x!r} is not representable")


def decode_symbol(x):
    if isinstance(x, list):
        return tuple(decode_symbol(v) for v in x)
    if isinstance(x, dict):
        if set(x) == {"rational"}:
            return parse_rational(x["rational"])
        raise ValidationError(f"unrecognized symbol object {x!r}")
    if isinstance(x, bool):
        raise ValidationError(f"boolean symbol {x!r} not supported")
    if isinstance(x, (int, str)):
        return x
    raise ValidationError(f"symbol {x!r} is not representable")


def _sym_sort_key(pair):
    return repr(pair[0])


def encode_dist(dist: FiniteDist):
    return [
        {"symbol": encode_symbol(x), "p": format_rational(p)}
        for x, p in sorted(dist.items(), key=_sym_sort_key)
    ]


def decode_dist(data) -> FiniteDist:
    if not isinstance(data, list):
        raise ValidationError("distribution must be a list of {symbol, p} entries")
    entries = {}
    for row in data:
        if not isinstance(row, dict) or set(row) != {"symbol", "p"}:
            raise ValidationError(f"bad distribution entry {row!r}")
        entries[decode_symbol(row["symbol"])] = parse_rational(row["p"])
    return FiniteDist(entries)


def machine_to_data(machine, start=None) -> dict:
    """Canonical plain-data description; equal machines give equal data."""
    if isinstance(machine, UnifilarMachine):
        data = {
            "kind": "unifilar",
            "inputs": [encode_symbol(i) for i in machine.inputs],
            "outputs": [encode_symbol(o) for o in machine.outputs],
            "states": [encode_symbol(x) for x in machine.states],
            "emissions": [
                {"state": encode_symbol(x), "dist": encode_dist(machine.output_fn[x])}
                for x in machine.states
            ],
            "transitions": sorted(
                (
                    {
                        "state": encode_symbol(x),
                        "input": encode_symbol(i),
                        "output": encode_symbol(o),
                        "next": encode_symbol(nxt),
                    }
                    for (x, i, o), nxt in machine.transition_fn.items()
                ),
                key=repr,
            ),
        }
    elif isinstance(machine, MooreMachine):
        data = {
            "kind": "moore",
            "inputs": [encode_symbol(i) for i in machine.inputs],
            "outputs": [encode_symbol(o) for o in machine.outputs],
            "states": [encode_symbol(y) for y in machine.states],
            "init": encode_dist(machine.init),
            "output_kernel": [
                {"state": encode_symbol(y), "dist": encode_dist(machine.output_kernel[y])}
                for y in machine.states
            ],
            "transition_kernel": sorted(
                (
                    {
                        "state": encode_symbol(y),
                        "input": encode_symbol(i),
                        "dist": encode_dist(machine.transition_kernel[(y, i)]),
                    }
                    for (y, i) in machine.transition_kernel
                ),
                key=repr,
            ),
        }
    else:
        raise ValidationError(f"not a machine: {machine!r}")
    if start is not None:
        data["start"] = encode_symbol(start)
    return data


def _require(data, keys, what):
    missing = [k for k in keys if k not in data]
    if missing:
        raise ValidationError(f"{what} is missing fields {missing}")


def machine_from_data(data):
    """Build a machine (and optional start state) from plain data."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ValidationError("machine description must be a mapping with a 'kind'")
    kind = data["kind"]
    start = decode_symbol(data["start"]) if "start" in data else None
    if kind == "unifilar":
        _require(data, ("inputs", "outputs", "states", "emissions", "transitions"),
                 "unifilar machine")
        states = [decode_symbol(x) for x in data["states"]]
        output_fn = {}
        for row in data["emissions"]:
            output_fn[decode_symbol(row["state"])] = decode_dist(row["dist"])
        transition_fn = {}
        for row in data["transitions"]:
            key = (decode_symbol(row["state"]), decode_symbol(row["input"]),
                   decode_symbol(row["output"]))
            transition_fn[key] = decode_symbol(row["next"])
        machine = UnifilarMachine(
            states,
            [decode_symbol(i) for i in data["inputs"]],
            [decode_symbol(o) for o in data["outputs"]],
            output_fn,
            transition_fn,
        )
        return machine, start
    if kind == "moore":
        _require(data, ("inputs", "outputs", "states", "init", "output_kernel",
                        "transition_kernel"), "moore machine")
        output_kernel = {}
        for row in data["output_kernel"]:
            output_kernel[decode_symbol(row["state"])] = decode_dist(row["dist"])
        transition_kernel = {}
        for row in data["transition_kernel"]:
            key = (decode_symbol(row["state"]), decode_symbol(row["input"]))
            transition_kernel[key] = decode_dist(row["dist"])
        machine = MooreMachine(
            [decode_symbol(y) for y in data["states"]],
            [decode_symbol(i) for i in data["inputs"]],
            [decode_symbol(o) for o in data["outputs"]],
            decode_dist(data["init"]),
            output_kernel,
            transition_kernel,
        )
        return machine, start
    raise ValidationError(f"unknown machine kind {kind!r}")


def dump_machine(machine, start=None) -> str:
    return yaml.safe_dump(machine_to_data(machine, start), sort_keys=True,
                          default_flow_style=False)


def load_machine(text):
    return machine_from_data(_load_yaml(text))


def load_scenario(text) -> dict:
    """Parse a scenario document; semantic validation happens in the runner."""
    data = _load_yaml(text)
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a mapping")
    for section in ("machines", "policies", "environments", "tasks"):
        if section in data and not isinstance(data[section], list):
            raise ValidationError(f"scenario section {section!r} must be a list")
    return data

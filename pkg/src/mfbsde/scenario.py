"""Scenario documents: strict JSON schema validation, default filling and object construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from . import generators, terminals
from .condexp import LatticeBackend, RegressionBackend
from .errors import ParseError, SchemaError
from .generators import Generator
from .kernel import TimeGrid, build_grid, build_lattice, simulate_paths
from .terminals import TerminalValue

TASKS = ("solve", "certify", "compare", "bmo", "lemma-check", "particles", "oracle-diff")


@lru_cache(maxsize=1)
def schema() -> dict[str, Any]:
    return json.loads(resources.files("mfbsde").joinpath("scenario.schema.json").read_text())


def _resolve(node: dict[str, Any], root: dict[str, Any]) -> dict[str, Any]:
    ref = node.get("$ref")
    if ref is None:
        return node
    target: Any = root
    for part in ref.lstrip("#/").split("/"):
        target = target[part]
    return target


def fill_defaults(instance: Any, node: dict[str, Any], root: dict[str, Any] | None = None) -> Any:
    """Insert schema defaults for missing object properties, recursively."""
    root = node if root is None else root
    node = _resolve(node, root)
    if not isinstance(instance, dict):
        return instance
    for key, sub in node.get("properties", {}).items():
        sub_r = _resolve(sub, root)
        if key not in instance and "default" in sub_r:
            instance[key] = copy.deepcopy(sub_r["default"])
        if key in instance:
            instance[key] = fill_defaults(instance[key], sub_r, root)
    return instance


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    path = "/".join(str(p) for p in err.absolute_path)
    key = err.absolute_path[-1] if err.absolute_path else None
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - allowed)
        key = extra[0] if extra else key
        msg = f"unknown key {key!r}" + (f" in {path!r}" if path else "")
    else:
        msg = f"invalid value at {path or '<root>'!r}: {err.message}"
    return SchemaError(msg, key=key, path=path)


def validate(doc: Any) -> dict[str, Any]:
    """Validate and return a copy with defaults filled."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        raise _schema_error(jsonschema.exceptions.best_match(errors))
    return fill_defaults(copy.deepcopy(doc), schema())


@dataclass
class Scenario:
    doc: dict[str, Any]
    generator: Generator
    terminal: TerminalValue
    grid: TimeGrid
    source: str | None = None

    @property
    def task(self) -> str:
        return self.doc["task"]

    @property
    def seed(self) -> int:
        return self.doc["ensemble"]["seed"]

    @property
    def d(self) -> int:
        return self.doc["ensemble"]["d"]

    def with_overrides(self, task: str | None = None, seed: int | None = None) -> Scenario:
        doc = copy.deepcopy(self.doc)
        if task is not None:
            doc["task"] = task
        if seed is not None:
            doc["ensemble"]["seed"] = int(seed)
        return from_dict(doc, self.source, validated=True)

    def make_backend(self, threads: int = 1):
        b = self.doc["backend"]
        if b["kind"] == "lattice":
            return LatticeBackend(build_lattice(self.grid, b["mode"], self.d))
        e = self.doc["ensemble"]
        ens = simulate_paths(self.grid, e["M"], e["d"], e["seed"], threads=threads)
        return RegressionBackend(ens, degree=b["degree"], ridge=b["ridge"])

    def compare_pair(self) -> tuple[Generator, TerminalValue]:
        c = self.doc["compare"]
        gen_t = build_generator(c["generator"], self.d) if "generator" in c else self.generator
        if "terminal" not in c:
            raise SchemaError("compare task needs compare.terminal", key="terminal", path="compare")
        return gen_t, build_terminal(c["terminal"], gen_t.m)


def build_generator(spec: dict[str, Any], d: int) -> Generator:
    return generators.from_catalog(
        spec["name"],
        spec.get("params", {}),
        m=spec.get("m", 1),
        d=d,
        C=spec.get("C", 1.0),
        zero_drift_integral_bound=spec.get("zero_drift_integral_bound", 0.0),
    )


def build_terminal(spec: dict[str, Any], m: int) -> TerminalValue:
    return terminals.from_catalog(spec["name"], spec.get("params", {}), m=m, bound=spec.get("bound"))


def from_dict(doc: Any, source: str | None = None, validated: bool = False) -> Scenario:
    doc = doc if validated else validate(doc)
    d = doc["ensemble"]["d"]
    gen = build_generator(doc["generator"], d)
    xi = build_terminal(doc["terminal"], gen.m)
    sc = Scenario(doc, gen, xi, build_grid(doc["grid"]["T"], doc["grid"]["N"]), source)
    c = doc["compare"]
    # resolve catalog names eagerly so typos surface at load time
    if "generator" in c:
        build_generator(c["generator"], d)
    if "terminal" in c:
        build_terminal(c["terminal"], gen.m)
    return sc


def loads(text: str, source: str | None = None) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno, source=source) from None
    return from_dict(doc, source)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario: {exc.strerror}", source=str(path)) from None
    return loads(text, str(path))


def battery() -> list[Path]:
    """Shipped scenario files, sorted by name."""
    root = resources.files("mfbsde").joinpath("scenarios")
    return sorted(Path(str(p)) for p in root.iterdir() if str(p).endswith(".json"))

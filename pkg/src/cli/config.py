"""
Experiment config files.

A config is a JSON object naming an experiment kind, the problem it runs on
(a built-in name or an inline grammar definition) and the kind's parameters.
Layout problems raise ConfigParseError with a line and field; values that
parse but violate a precondition surface later as ConfigurationError.
"""

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

from src.engine.ensemble import ErrorMode
from src.errors import ConfigParseError, ConfigurationError
from src.model.builtin import builtin_names, builtin_problem, problem_from_config
from src.model.problem import SdeProblem
from src.noise.spec import NoiseSpec

_DYADIC = re.compile(r"^\s*2\s*(?:\^|\*\*)\s*(-?\d+)\s*$")

DEFAULT_SEED = 2024


class ExperimentKind(str, Enum):
    CONVERGENCE = "convergence"
    INVARIANT_MEASURE = "invariant_measure"
    PROBE_ASSUMPTIONS = "probe_assumptions"
    SAMPLER_VALIDATION = "sampler_validation"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: ExperimentKind
    source: str
    problem: SdeProblem | None = None
    noise: NoiseSpec | None = None
    seed: int = DEFAULT_SEED
    n_paths: int = 1000
    workers: int | None = None
    batch_size: int | None = None
    output_dir: str | None = None
    # convergence
    dt_list: tuple[float, ...] = ()
    reference_dt: float | None = None
    error_mode: ErrorMode = ErrorMode.TERMINAL
    # invariant_measure
    dt: float | None = None
    checkpoints: tuple[float, ...] = ()
    reference: dict[str, Any] | None = None
    k: float = 1.0
    moments: dict[str, Any] | None = None
    coupling: dict[str, Any] | None = None
    # probe_assumptions
    n_pairs: int = 10000
    radius: float = 5.0
    # sampler_validation
    n_samples: int = 100000
    raw: dict[str, Any] = field(default_factory=dict)

    @property
    def driver(self) -> NoiseSpec:
        if self.noise is not None:
            return self.noise
        if self.problem is None:
            raise ConfigurationError(f"{self.name}: neither a problem nor a noise block is configured")
        return self.problem.noise

    def with_overrides(self, n_paths: int | None = None, seed: int | None = None) -> "ExperimentConfig":
        changes: dict[str, Any] = {}
        if n_paths is not None:
            changes["n_paths"] = n_paths
        if seed is not None:
            changes["seed"] = seed
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict[str, Any]:
        out = dict(self.raw)
        out.update(name=self.name, kind=self.kind.value, seed=self.seed, n_paths=self.n_paths)
        return out


def parse_step(value: Any, where: str, source: str, text: str = "") -> float:
    """A positive step size given as a number or as "2^-j"."""
    if isinstance(value, bool):
        raise ConfigParseError(source, f"expected a step size, got {value!r}", _line_of(text, where), where)
    if isinstance(value, (int, float)):
        step = float(value)
    elif isinstance(value, str) and (m := _DYADIC.match(value)):
        step = 2.0 ** int(m.group(1))
    else:
        raise ConfigParseError(source, f"expected a number or '2^-j', got {value!r}", _line_of(text, where), where)
    if not step > 0:
        raise ConfigParseError(source, f"step size must be > 0, got {value!r}", _line_of(text, where), where)
    return step


def _line_of(text: str, key: str) -> int | None:
    """First line mentioning the (top-level part of the) key, for diagnostics."""
    name = key.split("[")[0].split(".")[-1]
    for number, line in enumerate(text.splitlines(), start=1):
        if f'"{name}"' in line:
            return number
    return None


class _Reader:
    """Typed field access with line/field diagnostics; nested blocks carry a dotted prefix."""

    def __init__(self, data: dict[str, Any], source: str, text: str, prefix: str = ""):
        self.data = data
        self.source = source
        self.text = text
        self.prefix = prefix

    def path(self, key: str) -> str:
        return f"{self.prefix}{key}"

    def fail(self, key: str, message: str) -> ConfigParseError:
        path = self.path(key)
        return ConfigParseError(self.source, message, _line_of(self.text, path), path)

    def get(self, key: str, kind: type | tuple[type, ...], default: Any = None, required: bool = False) -> Any:
        if key not in self.data or self.data[key] is None:
            if required:
                raise self.fail(key, "missing required field")
            return default
        value = self.data[key]
        if isinstance(value, bool) and kind is not bool:
            raise self.fail(key, f"expected {_type_name(kind)}, got {value!r}")
        if kind is float and isinstance(value, int):
            return float(value)
        if not isinstance(value, kind):
            raise self.fail(key, f"expected {_type_name(kind)}, got {type(value).__name__}")
        return value

    def number(self, key: str, required: bool = False) -> float | None:
        value = self.get(key, (int, float), required=required)
        return None if value is None else float(value)

    def integer(self, key: str) -> int | None:
        value = self.get(key, (int, float))
        if value is not None and not float(value).is_integer():
            raise self.fail(key, f"expected an integer, got {value!r}")
        return None if value is None else int(value)

    def child(self, key: str, required: bool = False) -> "_Reader | None":
        block = self.get(key, dict, required=required)
        return None if block is None else _Reader(block, self.source, self.text, f"{self.path(key)}.")

    def records(self, key: str, required: bool = False) -> list["_Reader"]:
        items = self.get(key, list, default=[], required=required)
        out = []
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                raise self.fail(f"{key}[{i}]", f"expected a mapping, got {item!r}")
            out.append(_Reader(item, self.source, self.text, f"{self.path(key)}[{i}]."))
        return out

    def step(self, key: str, required: bool = False) -> float | None:
        value = self.get(key, (int, float, str), required=required)
        return None if value is None else parse_step(value, key, self.source, self.text)

    def steps(self, key: str) -> tuple[float, ...]:
        values = self.get(key, list, required=True)
        if not values:
            raise self.fail(key, "must not be empty")
        return tuple(parse_step(v, f"{key}[{i}]", self.source, self.text) for i, v in enumerate(values))

    def times(self, key: str) -> tuple[float, ...]:
        values = self.get(key, list, required=True)
        if not values:
            raise self.fail(key, "must not be empty")
        out = []
        for i, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise self.fail(f"{key}[{i}]", f"expected a number, got {v!r}")
            out.append(float(v))
        return tuple(out)


def _type_name(kind: type | tuple[type, ...]) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _check_field_shape(block: _Reader, key: str, required: bool) -> None:
    for term in block.records(key, required=required):
        term.number("coef")
        term.integer("power")
        time = term.child("time")
        if time is not None:
            time.number("a", required=True)
            time.number("b", required=True)
            time.get("exponent", (int, float, str))


def _check_noise_shape(block: _Reader) -> None:
    block.get("levy_kind", str)
    for key in ("alpha", "lambda", "lam", "scale", "jump_rate", "gamma0", "gamma_inf"):
        block.number(key)
    block.integer("brownian_dim")
    block.get("centered", bool)
    law = block.child("jump_law")
    if law is not None:
        law.get("kind", str, required=True)
        for key in ("loc", "value", "scale", "tail"):
            law.number(key)


def _check_problem_shape(block: _Reader) -> None:
    """Layout of an inline problem; value ranges are left to the model."""
    block.get("name", str)
    block.get("description", str)
    _check_field_shape(block, "drift", required=True)
    _check_field_shape(block, "diffusion", required=False)
    block.number("x0")
    block.number("horizon", required=True)
    for i, probe in enumerate(block.get("probes", list, default=[])):
        if not isinstance(probe, str):
            raise block.fail(f"probes[{i}]", f"expected a probe name, got {probe!r}")
    noise = block.child("noise")
    if noise is not None:
        _check_noise_shape(noise)
    constants = block.child("constants")
    if constants is not None:
        for key in constants.data:
            constants.number(key)


def _problem(reader: _Reader) -> SdeProblem | None:
    ref = reader.data.get("problem")
    if ref is None:
        return None
    if isinstance(ref, str):
        if ref not in builtin_names():
            raise reader.fail("problem", f"unknown built-in problem {ref!r}; known: {', '.join(builtin_names())}")
        return builtin_problem(ref)
    if not isinstance(ref, dict):
        raise reader.fail("problem", "expected a built-in name or an inline definition")
    _check_problem_shape(_Reader(ref, reader.source, reader.text, "problem."))
    return problem_from_config(ref)


def config_from_mapping(data: Any, source: str = "<config>", text: str = "") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigParseError(source, "config must be a JSON object", 1)
    r = _Reader(data, source, text)
    raw_kind = r.get("kind", str, required=True)
    try:
        kind = ExperimentKind(raw_kind)
    except ValueError:
        known = ", ".join(k.value for k in ExperimentKind)
        raise r.fail("kind", f"unknown experiment kind {raw_kind!r}; expected one of {known}") from None

    problem = _problem(r)
    noise_block = r.child("noise")
    if noise_block is not None:
        _check_noise_shape(noise_block)
    noise = NoiseSpec.from_mapping(noise_block.data) if noise_block is not None else None
    if problem is not None and noise is not None:
        problem = replace(problem, noise=noise)
    if problem is None and kind != ExperimentKind.SAMPLER_VALIDATION:
        raise r.fail("problem", "missing required field")

    default_name = problem.name if problem is not None else kind.value
    name = r.get("name", str, default=default_name)
    if not re.fullmatch(r"[A-Za-z0-9._-]+", name):
        raise r.fail("name", f"name may only contain letters, digits, '.', '_' and '-', got {name!r}")

    seed = r.get("seed", int, default=DEFAULT_SEED)
    common: dict[str, Any] = dict(
        name=name,
        kind=kind,
        source=source,
        problem=problem,
        noise=noise,
        seed=seed,
        n_paths=r.get("n_paths", int, default=1000),
        workers=r.get("workers", int),
        batch_size=r.get("batch_size", int),
        output_dir=r.get("output_dir", str),
        raw=data,
    )

    if kind == ExperimentKind.CONVERGENCE:
        mode = r.get("error_mode", str, default=ErrorMode.TERMINAL.value)
        try:
            error_mode = ErrorMode(mode)
        except ValueError:
            raise r.fail("error_mode", f"unknown error mode {mode!r}") from None
        return ExperimentConfig(
            **common,
            dt_list=r.steps("dt_list"),
            reference_dt=r.step("reference_dt", required=True),
            error_mode=error_mode,
        )
    if kind == ExperimentKind.INVARIANT_MEASURE:
        reference = r.child("reference", required=True)
        ref_kind = reference.data.get("kind") if reference is not None else None
        if reference is None or ref_kind not in ("analytic_stable", "empirical_snapshot"):
            raise r.fail("reference", f"unknown reference kind {ref_kind!r}")
        for key in ("alpha", "theta", "noise_scale", "time"):
            reference.number(key)
        moments = r.child("moments")
        if moments is not None:
            moments.integer("n_steps")
        coupling = r.child("coupling")
        if coupling is not None:
            for key in ("x0_a", "x0_b", "horizon"):
                coupling.number(key)
        return ExperimentConfig(
            **common,
            dt=r.step("dt", required=True),
            checkpoints=r.times("checkpoints"),
            reference=reference.data,
            k=r.get("k", float, default=1.0),
            moments=r.get("moments", dict),
            coupling=r.get("coupling", dict),
        )
    if kind == ExperimentKind.PROBE_ASSUMPTIONS:
        return ExperimentConfig(
            **common,
            n_pairs=r.get("n_pairs", int, default=10000),
            radius=r.get("radius", float, default=5.0),
        )
    if problem is None and noise is None:
        raise r.fail("noise", "sampler validation needs a problem or a noise block")
    return ExperimentConfig(**common, n_samples=r.get("n_samples", int, default=100000))


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigParseError(str(path), "config file not found") from None
    except OSError as exc:
        raise ConfigParseError(str(path), f"cannot read config: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(str(path), f"{exc.msg} (column {exc.colno})", exc.lineno) from exc
    return config_from_mapping(data, str(path), text)

"""Scenario configuration: strict YAML parsing into runtime objects.

The on-disk format is a single YAML mapping, hand-editable, with all
matrices as row-major nested lists.  Parsing is strict: unknown keys,
wrong shapes, and out-of-range values raise ConfigurationError with the
offending path in the message, so a typo cannot silently fall back to a
default.  See the README for the full schema and an annotated example.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np
import yaml

from .errors import ConfigurationError
from .system import (
    FieldDescriptor,
    LinearField,
    LinearSinusoidalField,
    ModeModel,
    SwitchedSystem,
)

DEFAULT_MAX_VERTICES = 2**20


@dataclass(frozen=True)
class BoundedRandomInput:
    """Unknown input drawn uniformly in the ball of the given radius."""

    bound: float


@dataclass(frozen=True)
class GrowingRampInput:
    """Unknown input rate*k along a seeded fixed unit direction."""

    rate: float


@dataclass(frozen=True)
class SequenceInput:
    """Explicit per-step vectors (index 0..horizon)."""

    values: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class ZeroInput:
    pass


UnknownInputSignal = Union[BoundedRandomInput, GrowingRampInput, SequenceInput]
KnownInputSignal = Union[ZeroInput, SequenceInput]


@dataclass(frozen=True)
class GainsSpec:
    """How per-mode correction gains are chosen.

    kind "heuristic": the synthesized default for every mode.
    kind "scaled": heuristic times `factor`.
    kind "user": explicit per-mode matrices; a null entry keeps the
    heuristic for that mode.
    """

    kind: str
    factor: float = 1.0
    matrices: tuple[Any, ...] | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    system: SwitchedSystem
    true_mode: int  # 1-based
    horizon: int
    seed: int
    unknown_input: UnknownInputSignal
    known_input: KnownInputSignal
    gains: GainsSpec
    allow_uncertified: bool
    max_vertices: int
    output_dir: str | None


def _expect_mapping(obj: Any, context: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{context} must be a mapping, got {type(obj).__name__}")
    return obj


def _check_keys(mapping: dict, allowed: set[str], context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) {sorted(unknown)} in {context}; allowed: {sorted(allowed)}"
        )


def _require(mapping: dict, key: str, context: str) -> Any:
    if key not in mapping:
        raise ConfigurationError(f"missing required key '{key}' in {context}")
    return mapping[key]


def _matrix(obj: Any, context: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{context} is not a numeric matrix: {exc}") from exc
    if arr.ndim != 2:
        raise ConfigurationError(f"{context} must be a nested (row-major) list of rows")
    return arr


def _field(obj: Any, context: str) -> FieldDescriptor:
    spec = _expect_mapping(obj, context)
    kind = _require(spec, "kind", context)
    if kind == "linear":
        _check_keys(spec, {"kind", "a"}, context)
        return LinearField(a=_matrix(_require(spec, "a", context), f"{context}.a"))
    if kind == "linear_sinusoidal":
        _check_keys(spec, {"kind", "a_hat", "a_tilde"}, context)
        return LinearSinusoidalField(
            a_hat=_matrix(_require(spec, "a_hat", context), f"{context}.a_hat"),
            a_tilde=_matrix(_require(spec, "a_tilde", context), f"{context}.a_tilde"),
        )
    raise ConfigurationError(
        f"{context}.kind must be 'linear' or 'linear_sinusoidal', got {kind!r}"
    )


def _mode(obj: Any, context: str) -> ModeModel:
    spec = _expect_mapping(obj, context)
    _check_keys(
        spec, {"field", "b", "g", "c", "d", "h", "w", "lipschitz"}, context
    )
    kwargs: dict[str, Any] = {
        "field": _field(_require(spec, "field", context), f"{context}.field")
    }
    for key in ("b", "g", "c", "d", "h"):
        kwargs[key] = _matrix(_require(spec, key, context), f"{context}.{key}")
    if spec.get("w") is not None:
        kwargs["w"] = _matrix(spec["w"], f"{context}.w")
    if spec.get("lipschitz") is not None:
        kwargs["lipschitz"] = float(spec["lipschitz"])
    return ModeModel(**kwargs)


def _per_mode_floats(obj: Any, count: int, context: str) -> tuple[float, ...]:
    if isinstance(obj, (int, float)):
        return (float(obj),) * count
    if isinstance(obj, list):
        if len(obj) != count:
            raise ConfigurationError(
                f"{context} must have one entry per mode ({count}), got {len(obj)}"
            )
        return tuple(float(v) for v in obj)
    raise ConfigurationError(f"{context} must be a number or a per-mode list")


def _system(obj: Any, name: str) -> SwitchedSystem:
    spec = _expect_mapping(obj, "system")
    _check_keys(
        spec,
        {"modes", "eta_w", "eta_v", "delta_x0", "x_hat0", "r_x", "r_y"},
        "system",
    )
    raw_modes = _require(spec, "modes", "system")
    if not isinstance(raw_modes, list) or not raw_modes:
        raise ConfigurationError("system.modes must be a non-empty list")
    modes = tuple(
        _mode(entry, f"system.modes[{i + 1}]") for i, entry in enumerate(raw_modes)
    )
    count = len(modes)
    x_hat0 = np.asarray(_require(spec, "x_hat0", "system"), dtype=float)
    return SwitchedSystem(
        modes=modes,
        eta_w=_per_mode_floats(_require(spec, "eta_w", "system"), count, "system.eta_w"),
        eta_v=_per_mode_floats(_require(spec, "eta_v", "system"), count, "system.eta_v"),
        delta_x0=float(_require(spec, "delta_x0", "system")),
        x_hat0=x_hat0,
        r_x=None if spec.get("r_x") is None else float(spec["r_x"]),
        r_y=None if spec.get("r_y") is None else float(spec["r_y"]),
        name=name,
    )


def _vector_sequence(
    obj: Any, needed: int, dim: int, context: str
) -> tuple[tuple[float, ...], ...]:
    if not isinstance(obj, list) or len(obj) < needed:
        raise ConfigurationError(
            f"{context} must list at least horizon+1 = {needed} vectors"
        )
    out = []
    for i, entry in enumerate(obj):
        vec = np.asarray(entry, dtype=float).reshape(-1)
        if vec.size != dim:
            raise ConfigurationError(
                f"{context}[{i}] must have {dim} entries, got {vec.size}"
            )
        out.append(tuple(float(v) for v in vec))
    return tuple(out)


def _unknown_input(obj: Any, needed: int, dim: int) -> UnknownInputSignal:
    spec = _expect_mapping(obj, "unknown_input")
    kind = _require(spec, "kind", "unknown_input")
    if kind == "bounded_random":
        _check_keys(spec, {"kind", "bound"}, "unknown_input")
        bound = float(_require(spec, "bound", "unknown_input"))
        if bound < 0:
            raise ConfigurationError("unknown_input.bound must be >= 0")
        return BoundedRandomInput(bound=bound)
    if kind == "growing_ramp":
        _check_keys(spec, {"kind", "rate"}, "unknown_input")
        rate = float(_require(spec, "rate", "unknown_input"))
        if rate < 0:
            raise ConfigurationError("unknown_input.rate must be >= 0")
        return GrowingRampInput(rate=rate)
    if kind == "sequence":
        _check_keys(spec, {"kind", "values"}, "unknown_input")
        values = _vector_sequence(
            _require(spec, "values", "unknown_input"), needed, dim, "unknown_input.values"
        )
        return SequenceInput(values=values)
    raise ConfigurationError(
        "unknown_input.kind must be 'bounded_random', 'growing_ramp' or 'sequence',"
        f" got {kind!r}"
    )


def _known_input(obj: Any, needed: int, dim: int) -> KnownInputSignal:
    if obj is None:
        return ZeroInput()
    spec = _expect_mapping(obj, "known_input")
    kind = _require(spec, "kind", "known_input")
    if kind == "zero":
        _check_keys(spec, {"kind"}, "known_input")
        return ZeroInput()
    if kind == "sequence":
        _check_keys(spec, {"kind", "values"}, "known_input")
        values = _vector_sequence(
            _require(spec, "values", "known_input"), needed, dim, "known_input.values"
        )
        return SequenceInput(values=values)
    raise ConfigurationError(
        f"known_input.kind must be 'zero' or 'sequence', got {kind!r}"
    )


def _gains(obj: Any, count: int, base_dir: Path) -> GainsSpec:
    if obj is None:
        return GainsSpec(kind="heuristic")
    spec = _expect_mapping(obj, "gains")
    kind = _require(spec, "kind", "gains")
    if kind == "heuristic":
        _check_keys(spec, {"kind"}, "gains")
        return GainsSpec(kind="heuristic")
    if kind == "scaled":
        _check_keys(spec, {"kind", "factor"}, "gains")
        factor = float(_require(spec, "factor", "gains"))
        if factor <= 0:
            raise ConfigurationError("gains.factor must be positive")
        return GainsSpec(kind="scaled", factor=factor)
    if kind in ("user", "file"):
        if kind == "file":
            _check_keys(spec, {"kind", "path"}, "gains")
            path = base_dir / str(_require(spec, "path", "gains"))
            try:
                payload = yaml.safe_load(path.read_text())
            except OSError as exc:
                raise ConfigurationError(f"cannot read gains file {path}: {exc}") from exc
            payload = _expect_mapping(payload, f"gains file {path}")
            raw = _require(payload, "matrices", f"gains file {path}")
        else:
            _check_keys(spec, {"kind", "matrices"}, "gains")
            raw = _require(spec, "matrices", "gains")
        if not isinstance(raw, list) or len(raw) != count:
            raise ConfigurationError(
                f"gains.matrices must list one entry per mode ({count})"
            )
        matrices = tuple(
            None if entry is None else _matrix(entry, f"gains.matrices[{i + 1}]")
            for i, entry in enumerate(raw)
        )
        return GainsSpec(kind="user", matrices=matrices)
    raise ConfigurationError(
        f"gains.kind must be 'heuristic', 'scaled', 'user' or 'file', got {kind!r}"
    )


_TOP_KEYS = {
    "name",
    "description",
    "system",
    "true_mode",
    "horizon",
    "seed",
    "unknown_input",
    "known_input",
    "gains",
    "allow_uncertified",
    "max_vertices",
    "output_dir",
}


def parse_config(data: Any, *, name: str = "", base_dir: Path | None = None) -> ScenarioConfig:
    """Validate a parsed YAML mapping and build the runtime config."""
    base_dir = Path(".") if base_dir is None else base_dir
    spec = _expect_mapping(data, "config")
    _check_keys(spec, _TOP_KEYS, "config")
    cfg_name = str(spec.get("name") or name or "scenario")

    system = _system(_require(spec, "system", "config"), cfg_name)
    count = system.mode_count

    true_mode = int(_require(spec, "true_mode", "config"))
    if not 1 <= true_mode <= count:
        raise ConfigurationError(f"true_mode must be in 1..{count}, got {true_mode}")
    horizon = int(_require(spec, "horizon", "config"))
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    seed = int(spec.get("seed", 0))
    p_true = system.modes[true_mode - 1].p
    unknown = _unknown_input(
        _require(spec, "unknown_input", "config"), horizon + 1, p_true
    )
    known = _known_input(spec.get("known_input"), horizon + 1, system.m)
    gains = _gains(spec.get("gains"), count, base_dir)
    max_vertices = int(spec.get("max_vertices", DEFAULT_MAX_VERTICES))
    if max_vertices < 1:
        raise ConfigurationError("max_vertices must be >= 1")
    output_dir = spec.get("output_dir")
    return ScenarioConfig(
        name=cfg_name,
        system=system,
        true_mode=true_mode,
        horizon=horizon,
        seed=seed,
        unknown_input=unknown,
        known_input=known,
        gains=gains,
        allow_uncertified=bool(spec.get("allow_uncertified", False)),
        max_vertices=max_vertices,
        output_dir=None if output_dir is None else str(output_dir),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(data, name=path.stem, base_dir=path.parent)

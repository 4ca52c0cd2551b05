"""Run configuration: a flat YAML mapping validated into :class:`RunConfig`."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import yaml

from .dynamics import MAX_DT_U

MODES = ("simulate", "analytic", "ed", "compare", "front")
LAYOUTS = ("TI", "FULL")
ED_METHODS = ("auto", "dense", "krylov")
FRONT_SOURCES = ("simulate", "analytic")
OBDM_OUTPUTS = ("auto", "all", "cuts")
REQUIRED = ("mode", "sizes", "t_final")


class ConfigError(ValueError):
    """Carries every violation found, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    mode: str
    sizes: tuple[int, ...]
    t_final: float
    J_over_U: float = 0.1
    U: float = 1.0
    n_max: int = 3
    filling: int = 1
    dt: float = 0.01
    sample_stride: int = 10
    layout: str = "TI"
    obdm_output: str = "auto"
    # exact diagonalization
    ed_method: str = "auto"
    ed_cutoff: int | None = None
    krylov_dim: int = 30
    krylov_tol: float = 1e-12
    dense_budget: int = 6000
    # comparison and fronts
    compare_floor: float = 1e-4
    front_source: str = "simulate"
    front_threshold: float | None = None
    front_s_min: int = 3
    revival_window: float = 10.0
    revival_factor: float = 2.0
    output_dir: str = "output"
    seed: int = 0

    @property
    def J(self) -> float:
        return self.J_over_U * self.U

    @property
    def dimension(self) -> int:
        return len(self.sizes)

    @property
    def threshold(self) -> float:
        """Front threshold; defaults to 0.01/Z."""
        if self.front_threshold is not None:
            return self.front_threshold
        return 0.01 / (2 * self.dimension)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_INT_FIELDS = {"n_max", "filling", "sample_stride", "krylov_dim", "dense_budget", "front_s_min", "seed"}
_FLOAT_FIELDS = {
    "t_final", "J_over_U", "U", "dt", "krylov_tol", "compare_floor", "revival_window", "revival_factor",
}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(data: dict) -> RunConfig:
    """Build a RunConfig from a mapping, collecting all violations."""
    if not isinstance(data, dict):
        raise ConfigError(["configuration must be a mapping of keys to values"])
    errors = []
    for key in sorted(set(data) - set(_FIELDS)):
        errors.append(f"unknown key '{key}'")
    for key in REQUIRED:
        if key not in data:
            errors.append(f"missing required key '{key}'")
    values = {k: v for k, v in data.items() if k in _FIELDS}

    for key in _INT_FIELDS & values.keys():
        if not _is_int(values[key]):
            errors.append(f"'{key}' must be an integer, got {values[key]!r}")
    for key in _FLOAT_FIELDS & values.keys():
        if not _is_real(values[key]):
            errors.append(f"'{key}' must be a number, got {values[key]!r}")
        else:
            values[key] = float(values[key])

    def choice(key, options):
        if key in values and values[key] not in options:
            errors.append(f"'{key}' must be one of {', '.join(options)}, got {values[key]!r}")

    choice("mode", MODES)
    choice("layout", LAYOUTS)
    choice("ed_method", ED_METHODS)
    choice("front_source", FRONT_SOURCES)
    choice("obdm_output", OBDM_OUTPUTS)

    if "sizes" in values:
        sizes = values["sizes"]
        if _is_int(sizes):
            sizes = [sizes]
        if not isinstance(sizes, (list, tuple)) or not sizes or not all(_is_int(s) for s in sizes):
            errors.append(f"'sizes' must be a non-empty list of integers, got {values['sizes']!r}")
        else:
            if any(s < 3 for s in sizes):
                errors.append(f"every entry of 'sizes' must be >= 3, got {list(sizes)}")
            values["sizes"] = tuple(sizes)

    def number(key):
        v = values.get(key, _FIELDS[key].default)
        return v if _is_real(v) else None

    U, dt, ratio, t_final = number("U"), number("dt"), number("J_over_U"), number("t_final")
    if U is not None and U <= 0:
        errors.append(f"'U' must be positive, got {U}")
    if ratio is not None and ratio < 0:
        errors.append(f"'J_over_U' must be non-negative, got {ratio}")
    if t_final is not None and "t_final" in values and t_final < 0:
        errors.append(f"'t_final' must be non-negative, got {t_final}")
    if dt is not None and dt <= 0:
        errors.append(f"'dt' must be positive, got {dt}")
    elif dt is not None and U is not None and U > 0 and dt * U > MAX_DT_U + 1e-12:
        errors.append(f"'dt' * 'U' = {dt * U:g} exceeds the stability bound {MAX_DT_U}")
    n_max, filling = values.get("n_max", 3), values.get("filling", 1)
    if _is_int(n_max) and n_max < 2:
        errors.append(f"'n_max' must be >= 2, got {n_max}")
    if _is_int(filling) and filling < 1:
        errors.append(f"'filling' must be >= 1, got {filling}")
    if _is_int(n_max) and _is_int(filling) and filling >= n_max:
        errors.append(f"'filling' ({filling}) must be smaller than 'n_max' ({n_max})")
    for key in ("sample_stride", "krylov_dim", "dense_budget"):
        if _is_int(values.get(key)) and values[key] < 1:
            errors.append(f"'{key}' must be >= 1, got {values[key]}")
    if _is_int(values.get("front_s_min")) and values["front_s_min"] < 1:
        errors.append(f"'front_s_min' must be >= 1, got {values['front_s_min']}")
    for key in ("krylov_tol", "compare_floor", "revival_window", "revival_factor"):
        if _is_real(values.get(key)) and values[key] <= 0:
            errors.append(f"'{key}' must be positive, got {values[key]}")
    th = values.get("front_threshold")
    if th is not None:
        if not _is_real(th) or th <= 0:
            errors.append(f"'front_threshold' must be a positive number or null, got {th!r}")
        else:
            values["front_threshold"] = float(th)
    cut = values.get("ed_cutoff")
    if cut is not None and (not _is_int(cut) or cut < 1):
        errors.append(f"'ed_cutoff' must be a positive integer or null, got {cut!r}")
    if "output_dir" in values and not isinstance(values["output_dir"], str):
        errors.append(f"'output_dir' must be a string, got {values['output_dir']!r}")

    if errors:
        raise ConfigError(errors)
    return RunConfig(**values)


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"not valid YAML: {exc}"]) from exc
    return validate(data if data is not None else {})


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key=value`` strings; values are parsed as YAML scalars or lists."""
    out = dict(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError([f"override '{item}' is not of the form key=value"])
        out[key.strip()] = yaml.safe_load(raw)
    return out

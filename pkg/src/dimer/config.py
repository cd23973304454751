"""Run configuration files.

Plain text, one ``key = value`` per line, ``#`` starts a comment. Files ending
in ``.json`` are read as a flat JSON object with the same keys.

    g = -7
    kappa = 0.4
    grid_points = 181
    fixed_times = 3.2, 6.5
    g_axis = -10:0:11      # start:stop:count, or a comma list
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigurationError
from .experiments import ScenarioConfig, Tolerances
from .grid import GridSpec

SCENARIO_KEYS = {
    "g": float, "kappa": float, "epsilon": float, "d": float,
    "half_width": float, "grid_points": int,
    "retention": str, "size_cap": int,
    "time_step": float, "timing_step": float, "search_horizon": float,
    "fixed_times": "pair", "barrier": str, "n_orbitals": int,
    "completeness_tol": float, "timing_tol": float, "extrema_prominence": float,
    "cache_dir": str,
}
RUN_KEYS = {"g_axis": "axis", "kappa_axis": "axis", "times": "labels", "threads": int,
            "level": str, "out_dir": str}
DEFAULT_G_AXIS = tuple(np.linspace(-10.0, 0.0, 11).tolist())
DEFAULT_KAPPA_AXIS = tuple(np.linspace(0.0, 3.0, 13).tolist())


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = ScenarioConfig()
    g_axis: tuple[float, ...] = DEFAULT_G_AXIS
    kappa_axis: tuple[float, ...] = DEFAULT_KAPPA_AXIS
    times: tuple[str, ...] = ("tA", "tB")
    threads: int = 1
    level: str = "fast"
    out_dir: str = "."
    extra: dict = field(default_factory=dict, compare=False)


def _number(key, text, kind):
    try:
        v = kind(text) if not isinstance(text, str) else kind(text.strip())
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: cannot read {text!r} as {kind.__name__}") from None
    if kind is int and isinstance(text, float) and not float(text).is_integer():
        raise ConfigurationError(f"{key}: expected an integer, got {text!r}")
    if kind is float and not math.isfinite(v):
        raise ConfigurationError(f"{key}: value must be finite, got {text!r}")
    return v


def parse_axis(key: str, value) -> tuple[float, ...]:
    """Comma list, ``start:stop:count`` (inclusive linspace), or a JSON list."""
    if isinstance(value, (list, tuple)):
        items = [_number(key, v, float) for v in value]
    else:
        text = str(value).strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigurationError(f"{key}: range must be start:stop:count, got {text!r}")
            lo, hi = _number(key, parts[0], float), _number(key, parts[1], float)
            count = _number(key, parts[2], int)
            if count < 1:
                raise ConfigurationError(f"{key}: count must be >= 1")
            items = np.linspace(lo, hi, count).tolist()
        else:
            items = [_number(key, p, float) for p in text.split(",") if p.strip()]
    if not items:
        raise ConfigurationError(f"{key}: axis is empty")
    return tuple(float(v) for v in items)


def _labels(key, value) -> tuple[str, ...]:
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    labels = tuple(str(v).strip() for v in items if str(v).strip())
    bad = [lb for lb in labels if lb not in ("tA", "tB")]
    if bad or not labels:
        raise ConfigurationError(f"{key}: labels must be tA and/or tB, got {value!r}")
    return labels


def _pair(key, value) -> tuple[float, float] | None:
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    if len(items) != 2:
        raise ConfigurationError(f"{key}: expected 'tA,tB', got {value!r}")
    return (_number(key, items[0], float), _number(key, items[1], float))


def coerce(key: str, value) -> Any:
    kind = SCENARIO_KEYS.get(key, RUN_KEYS.get(key))
    if kind is None:
        raise ConfigurationError(f"unknown configuration key {key!r}")
    if kind == "axis":
        return parse_axis(key, value)
    if kind == "labels":
        return _labels(key, value)
    if kind == "pair":
        return _pair(key, value)
    if kind is str:
        return None if value is None else str(value).strip()
    return _number(key, value, kind)


def read_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path}: top level must be an object")
        return {k: coerce(k, v) for k, v in raw.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = coerce(key, value)
    return out


def _retention(value):
    if value in (None, "auto", "all"):
        return value or "auto"
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(f"retention must be 'auto', 'all' or a number, got {value!r}") from None


def build_run_config(values: Mapping[str, Any]) -> RunConfig:
    """Resolve a flat mapping of already-coerced values on top of the defaults."""
    base = ScenarioConfig()
    grid = GridSpec(values.get("half_width", base.grid.half_width),
                    values.get("grid_points", base.grid.n_points))
    tol = Tolerances(values.get("completeness_tol", base.tolerances.completeness),
                     values.get("timing_tol", base.tolerances.timing),
                     values.get("extrema_prominence", base.tolerances.extrema))
    scenario = ScenarioConfig(
        grid=grid,
        g=values.get("g", base.g),
        kappa=values.get("kappa", base.kappa),
        epsilon=values.get("epsilon", base.epsilon),
        d=values.get("d", base.d),
        retention=_retention(values.get("retention", base.retention)),
        size_cap=values.get("size_cap", base.size_cap),
        time_step=values.get("time_step", base.time_step),
        timing_step=values.get("timing_step", base.timing_step),
        search_horizon=values.get("search_horizon", base.search_horizon),
        fixed_times=values.get("fixed_times", base.fixed_times),
        barrier=values.get("barrier", base.barrier),
        n_orbitals=values.get("n_orbitals", base.n_orbitals),
        tolerances=tol,
        cache_dir=values.get("cache_dir", base.cache_dir),
    )
    level = values.get("level", "fast")
    if level not in ("fast", "full"):
        raise ConfigurationError(f"level must be fast or full, got {level!r}")
    threads = values.get("threads", 1)
    if threads < 1:
        raise ConfigurationError("threads must be >= 1")
    return RunConfig(scenario, values.get("g_axis", DEFAULT_G_AXIS), values.get("kappa_axis", DEFAULT_KAPPA_AXIS),
                     values.get("times", ("tA", "tB")), threads, level, values.get("out_dir", "."))


def scenario_echo(s: ScenarioConfig) -> dict[str, Any]:
    return {
        "g": s.g, "kappa": s.kappa, "epsilon": s.epsilon, "d": s.d,
        "half_width": s.grid.half_width, "grid_points": s.grid.n_points,
        "retention": s.retention, "size_cap": s.size_cap,
        "time_step": s.time_step, "timing_step": s.timing_step, "search_horizon": s.search_horizon,
        "fixed_times": list(s.fixed_times) if s.fixed_times else None,
        "barrier": s.barrier, "n_orbitals": s.n_orbitals,
        "completeness_tol": s.tolerances.completeness, "timing_tol": s.tolerances.timing,
        "extrema_prominence": s.tolerances.extrema, "cache_dir": s.cache_dir,
    }


def config_echo(run: RunConfig, include_axes: bool = True) -> dict[str, Any]:
    """Flat mapping that :func:`build_run_config` turns back into ``run``."""
    out = scenario_echo(run.scenario)
    out.update(times=list(run.times), threads=run.threads, level=run.level, out_dir=run.out_dir)
    if include_axes:
        out.update(g_axis=list(run.g_axis), kappa_axis=list(run.kappa_axis))
    return out


def config_from_echo(echo: Mapping[str, Any]) -> RunConfig:
    return build_run_config({k: coerce(k, v) for k, v in echo.items()})

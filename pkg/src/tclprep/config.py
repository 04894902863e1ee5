"""Run configuration: a strict TOML schema plus sweep expansion.

All physical parameters are ratios to the post-preparation system frequency
``omega`` (which is therefore 1): ``cutoff_over_omega``, ``beta_times_omega``,
``t_max_times_omega`` and so on.
"""
from __future__ import annotations

import copy
import itertools
import math
import re
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bath import Bath, OhmicSpectralDensity
from .operators import PAULI, projector
from . import scenarios as sc

RECIPES = ("factorized", "switched", "decoherence", "equilibration", "freezing", "flipping",
           "swapping")
TARGETS = {
    "ground": sc.GROUND,
    "excited": sc.EXCITED,
    "plus": np.array([1, 1], complex) / np.sqrt(2),
    "minus": np.array([1, -1], complex) / np.sqrt(2),
}

DEFAULTS = {
    "scenario": {
        "kind": "factorized",
        "cutoff_over_omega": 100.0,
        "coupling_eta": 0.05,
        "beta_times_omega": math.inf,
        "coupling_operator": "sigma_x",
        "target": "excited",
        "switch_time_times_cutoff": 16.0,
        "prep_depth_over_cutoff": 0.01,
        "prep_time_times_omega": 10.0,
    },
    "grid": {
        "t_max_times_omega": 5.0,
        "dt_times_cutoff": 0.05,
        "dt_times_omega": 0.0,
        "jolt_window_times_cutoff": 50.0,
        "decimate": 10,
        "estimate_error": True,
        "cutoff_sensitivity": True,
    },
    "output": {"directory": ".", "stem": "run"},
}
POSITIVE = {
    "scenario": ("cutoff_over_omega", "beta_times_omega", "prep_depth_over_cutoff",
                 "prep_time_times_omega"),
    "grid": ("t_max_times_omega", "dt_times_cutoff", "jolt_window_times_cutoff", "decimate"),
}
NON_NEGATIVE = {"scenario": ("coupling_eta", "switch_time_times_cutoff"),
                "grid": ("dt_times_omega",)}


class ConfigError(ValueError):
    pass


def _locate(text, key):
    """1-based (line, column) of the first line defining ``key``, or None."""
    if text is None:
        return None
    pat = re.compile(r'^\s*"?' + re.escape(key) + r'"?\s*=')
    for n, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return n, line.index(key.split(".")[-1]) + 1
    return None


def _fail(msg, text=None, key=None):
    where = _locate(text, key) if key else None
    if where:
        msg = f"line {where[0]}, column {where[1]}: {msg}"
    raise ConfigError(msg)


def parse_text(text):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None


def load(path):
    """Read a config or a run manifest; returns ``(config, source_text)``."""
    text = Path(path).read_text()
    raw = parse_text(text)
    if "run" in raw and "config" in raw:
        raw = raw["config"]
    return normalize(raw, text), text


def normalize(raw, text=None):
    """Merge defaults and enforce the schema; unknown keys are rejected."""
    cfg = copy.deepcopy(DEFAULTS)
    sweep = []
    for section, body in raw.items():
        if section == "sweep":
            sweep = _sweep(body, text)
            continue
        if section not in DEFAULTS:
            _fail(f"unknown section [{section}]", text, section)
        if not isinstance(body, dict):
            _fail(f"[{section}] must be a table", text, section)
        for key, value in body.items():
            if key not in DEFAULTS[section]:
                _fail(f"unknown key {section}.{key}", text, key)
            cfg[section][key] = _coerce(section, key, value, text)
    cfg["sweep"] = sweep
    _check_values(cfg, text)
    return cfg


def _coerce(section, key, value, text=None):
    default = DEFAULTS[section][key]
    if key == "target":
        if isinstance(value, str) and value in TARGETS:
            return value
        if isinstance(value, list) and len(value) == 2 and all(
                isinstance(v, (int, float)) for v in value):
            return [float(v) for v in value]
        _fail(f"target must be one of {sorted(TARGETS)} or [p_ground, p_excited]", text, key)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            _fail(f"{section}.{key} must be true or false", text, key)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            _fail(f"{section}.{key} must be an integer", text, key)
        return value
    if isinstance(default, float):
        if isinstance(value, str) and value.lower() in ("inf", "+inf"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail(f"{section}.{key} must be a number", text, key)
        return float(value)
    if not isinstance(value, str):
        _fail(f"{section}.{key} must be a string", text, key)
    return value


def _sweep(body, text):
    if not isinstance(body, list):
        _fail("sweep must be an array of tables ([[sweep]])", text, "sweep")
    out = []
    for entry in body:
        if not isinstance(entry, dict) or set(entry) != {"path", "values"}:
            _fail("each [[sweep]] entry needs exactly 'path' and 'values'", text, "path")
        path, values = entry["path"], entry["values"]
        parts = path.split(".") if isinstance(path, str) else []
        if len(parts) != 2 or parts[0] not in ("scenario", "grid") or parts[1] not in DEFAULTS[parts[0]]:
            _fail(f"sweep path {path!r} does not name a scenario or grid parameter", text, "path")
        if not isinstance(values, list) or not values:
            _fail(f"sweep values for {path} must be a non-empty array", text, "values")
        out.append({"path": path, "values": [_coerce(parts[0], parts[1], v, text) for v in values]})
    return out


def _check_values(cfg, text=None):
    s, g = cfg["scenario"], cfg["grid"]
    if s["kind"] not in RECIPES:
        _fail(f"scenario.kind must be one of {RECIPES}", text, "kind")
    if s["coupling_operator"] not in PAULI:
        _fail(f"scenario.coupling_operator must be one of {sorted(PAULI)}", text,
              "coupling_operator")
    for section, keys in POSITIVE.items():
        for k in keys:
            if not cfg[section][k] > 0:
                _fail(f"{section}.{k} must be positive", text, k)
    for section, keys in NON_NEGATIVE.items():
        for k in keys:
            if cfg[section][k] < 0:
                _fail(f"{section}.{k} must be non-negative", text, k)
    if g["dt_times_cutoff"] > 0.05 + 1e-12:
        _fail("grid.dt_times_cutoff must not exceed 0.05", text, "dt_times_cutoff")
    if g["t_max_times_omega"] < g["jolt_window_times_cutoff"] / s["cutoff_over_omega"]:
        _fail("grid.t_max_times_omega must cover the jolt window "
              "(jolt_window_times_cutoff / cutoff_over_omega)", text, "t_max_times_omega")
    if isinstance(s["target"], list):
        p = s["target"]
        if min(p) < 0 or abs(sum(p) - 1) > 1e-12:
            _fail("target populations must be non-negative and sum to 1", text, "target")


def set_path(cfg, path, value):
    section, key = path.split(".")
    if section not in DEFAULTS or key not in DEFAULTS[section]:
        raise ConfigError(f"unknown parameter {path}")
    cfg[section][key] = _coerce(section, key, value)


def parse_override(item):
    """``key=value`` with ``value`` read as a TOML literal (bare words become strings)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = item.split("=", 1)
    key, value = key.strip(), value.strip()
    try:
        parsed = tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value
    return key, parsed


def sweep_points(cfg):
    """Expand the sweep (Cartesian product) into a list of ``(assignments, config)``."""
    entries = cfg["sweep"]
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    if not entries:
        return [({}, copy.deepcopy(base))]
    points = []
    for combo in itertools.product(*(e["values"] for e in entries)):
        point = copy.deepcopy(base)
        assigned = {}
        for e, v in zip(entries, combo):
            set_path(point, e["path"], v)
            assigned[e["path"]] = v
        _check_values({**point, "sweep": []})
        points.append((assigned, point))
    return points


def target_state(target):
    if isinstance(target, str):
        return projector(TARGETS[target])
    return np.diag(np.asarray(target, dtype=complex))


def build_scenario(point):
    """Scenario for one fully resolved (sweep-free) config."""
    s, g = point["scenario"], point["grid"]
    Lam = s["cutoff_over_omega"]
    bath = Bath(OhmicSpectralDensity(Lam, s["coupling_eta"]), s["beta_times_omega"])
    H0 = sc.tls_hamiltonian(1.0)
    L = PAULI[s["coupling_operator"]]
    rho_t = target_state(s["target"])
    t_max = g["t_max_times_omega"]
    dt = g["dt_times_omega"] if g["dt_times_omega"] > 0 else g["dt_times_cutoff"] / Lam
    if g["dt_times_omega"] > 0 and dt > min(1.0 / Lam, 1.0) / 20 * (1 + 1e-9):
        _fail(f"grid.dt_times_omega = {dt:g} exceeds min(1/cutoff, 1/omega)/20")
    dt = min(dt, 1.0 / 20.0)  # omega = 1
    kind = s["kind"]
    try:
        if kind == "factorized":
            return sc.factorized(H0, L, bath, rho_t, t_max, dt)
        if kind == "switched":
            tau = s["switch_time_times_cutoff"] / Lam
            return sc.switched(H0, L, bath, rho_t, tau, t_max, min(dt, tau / 20) if tau else dt)
        if kind == "decoherence":
            return sc.prepare_by_decoherence(L, rho_t, bath, H0=H0, t_max=t_max, dt=dt)
        if kind == "equilibration":
            return sc.prepare_by_equilibration(rho_t, bath, L, H0, t_max, dt)[0]
        if kind == "freezing":
            return sc.prepare_by_freezing(rho_t, bath, L, H0, depth=s["prep_depth_over_cutoff"] * Lam,
                                          t_max=t_max, dt=dt)
        tau = s["prep_time_times_omega"]
        if kind == "flipping":
            return sc.prepare_by_flipping(_pure_vector(rho_t), tau, bath, L, H0, t_max, dt)
        return sc.prepare_by_swapping(rho_t, tau, bath, L, H0, t_max, dt)
    except ValueError as exc:
        raise ConfigError(f"cannot build {kind} scenario: {exc}") from None


def _pure_vector(rho):
    p, V = np.linalg.eigh(rho)
    if abs(p[-1] - 1) > 1e-10:
        raise ConfigError("this preparation needs a pure target state")
    return V[:, -1]

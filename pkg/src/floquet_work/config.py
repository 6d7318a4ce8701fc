"""Run configuration for the command-line tools.

Configs are flat text files of `section.key = value` lines; `#` starts a
comment.  Keys are validated against the schema of the subcommand being
run and unknown keys are rejected, so a typo fails loudly instead of
silently falling back to a default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .floquet import DriveProtocol
from .numerics import IntegratorConfig

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "load_run_config"]


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def parse_config_text(text):
    """Parse `key = value` lines into an ordered dict of strings."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _as_float(entries, key):
    try:
        return float(entries[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {entries[key]!r}") from None


def _as_int(entries, key):
    value = entries[key]
    try:
        result = int(value)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {value!r}") from None
    return result


def _as_choice(entries, key, choices):
    value = entries[key]
    if value not in choices:
        raise ConfigError(f"{key}: must be one of {sorted(choices)}, got {value!r}")
    return value


def _as_periods(entries, key):
    value = entries[key]
    if value == "inf":
        return math.inf
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer or 'inf', got {value!r}") from None
    if n < 1:
        raise ConfigError(f"{key}: period count must be positive")
    return n


# Keys shared by every subcommand.
_COMMON_KEYS = {
    "grid.n_k",
    "integrator.method",
    "integrator.steps_per_period",
    "integrator.rtol",
    "integrator.max_steps",
    "output.format",
}
_PROTOCOL_KEYS = {
    "protocol.kind",
    "protocol.h0",
    "protocol.amplitude",
    "protocol.omega0",
    "protocol.phi0",
    "protocol.table_path",
}

_TASK_KEYS = {
    "spectrum": set(),
    "cgf": {"task.s_min", "task.s_max", "task.s_count", "task.s_scale",
            "task.n_list"},
    "diagnose": {"task.k_max", "task.l_max", "task.tol_res", "task.tol_cdt",
                 "task.s_min", "task.s_max", "task.s_count"},
    "entropy": {"task.omega0_min", "task.omega0_max", "task.omega0_count",
                "task.beta", "task.length", "task.amplitude"},
    "workhist": {"task.length", "task.n", "task.bin_width"},
}

#: Subcommands whose protocol is fixed by the task block instead.
_NO_PROTOCOL = {"entropy"}


def _build_protocol(entries, base_dir):
    if "protocol.kind" not in entries:
        raise ConfigError("missing required key protocol.kind")
    kind = _as_choice(entries, "protocol.kind", {"sinusoidal", "tabulated"})
    if "protocol.omega0" not in entries:
        raise ConfigError("missing required key protocol.omega0")
    omega0 = _as_float(entries, "protocol.omega0")
    if omega0 <= 0.0:
        raise ConfigError("protocol.omega0 must be positive")
    if kind == "sinusoidal":
        for key in ("protocol.h0", "protocol.amplitude"):
            if key not in entries:
                raise ConfigError(f"missing required key {key}")
        if "protocol.table_path" in entries:
            raise ConfigError("protocol.table_path is only valid for tabulated protocols")
        return DriveProtocol.sinusoidal(
            h0=_as_float(entries, "protocol.h0"),
            amplitude=_as_float(entries, "protocol.amplitude"),
            omega0=omega0,
            phi0=_as_float(entries, "protocol.phi0") if "protocol.phi0" in entries else 0.0,
        )
    if "protocol.table_path" not in entries:
        raise ConfigError("missing required key protocol.table_path")
    for key in ("protocol.h0", "protocol.amplitude", "protocol.phi0"):
        if key in entries:
            raise ConfigError(f"{key} is not valid for tabulated protocols")
    path = Path(base_dir) / entries["protocol.table_path"]
    try:
        samples = np.loadtxt(path, dtype=float, ndmin=1)
    except OSError as exc:
        raise ConfigError(f"protocol.table_path: cannot read {path}: {exc}") from None
    try:
        return DriveProtocol.tabulated(samples, omega0=omega0)
    except ValueError as exc:
        raise ConfigError(f"protocol table: {exc}") from None


def _build_integrator(entries):
    kwargs = {}
    if "integrator.method" in entries:
        kwargs["method"] = _as_choice(entries, "integrator.method", {"rk4", "rk45"})
    if "integrator.steps_per_period" in entries:
        kwargs["steps_per_period"] = _as_int(entries, "integrator.steps_per_period")
    if "integrator.rtol" in entries:
        kwargs["rtol"] = _as_float(entries, "integrator.rtol")
    if "integrator.max_steps" in entries:
        kwargs["max_steps"] = _as_int(entries, "integrator.max_steps")
    try:
        return IntegratorConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from None


def _build_task(entries, command):
    task = {}
    if command == "cgf":
        for key, default in (("task.s_min", 0.0), ("task.s_max", 20.0)):
            task[key.split(".")[1]] = _as_float(entries, key) if key in entries else default
        task["s_count"] = _as_int(entries, "task.s_count") if "task.s_count" in entries else 81
        task["s_scale"] = (_as_choice(entries, "task.s_scale", {"linear", "log"})
                           if "task.s_scale" in entries else "linear")
        if task["s_min"] < 0 or task["s_max"] <= task["s_min"] or task["s_count"] < 2:
            raise ConfigError("task: need 0 <= s_min < s_max and s_count >= 2")
        if task["s_scale"] == "log" and task["s_min"] <= 0:
            raise ConfigError("task.s_min must be positive on a log scale")
        if "task.n_list" in entries:
            try:
                task["n_list"] = [int(v) for v in entries["task.n_list"].split(",")]
            except ValueError:
                raise ConfigError("task.n_list: expected comma-separated integers") from None
            if any(n < 1 for n in task["n_list"]):
                raise ConfigError("task.n_list: period counts must be positive")
        else:
            task["n_list"] = [1, 5, 50]
    elif command == "diagnose":
        task["k_max"] = _as_float(entries, "task.k_max") if "task.k_max" in entries else 0.05
        task["l_max"] = _as_int(entries, "task.l_max") if "task.l_max" in entries else 8
        task["tol_res"] = _as_float(entries, "task.tol_res") if "task.tol_res" in entries else 1e-9
        task["tol_cdt"] = _as_float(entries, "task.tol_cdt") if "task.tol_cdt" in entries else 1e-4
        s_keys = [k for k in ("task.s_min", "task.s_max", "task.s_count") if k in entries]
        if s_keys and len(s_keys) != 3:
            raise ConfigError("task: s_min, s_max and s_count must be given together")
        if s_keys:
            grid = (_as_float(entries, "task.s_min"), _as_float(entries, "task.s_max"),
                    _as_int(entries, "task.s_count"))
            if grid[0] <= 0 or grid[1] <= grid[0] or grid[2] < 8:
                raise ConfigError("task: need 0 < s_min < s_max and s_count >= 8")
            task["s_grid"] = np.geomspace(grid[0], grid[1], grid[2])
        else:
            task["s_grid"] = None
    elif command == "entropy":
        for key in ("task.omega0_min", "task.omega0_max", "task.omega0_count", "task.beta"):
            if key not in entries:
                raise ConfigError(f"missing required key {key}")
        lo = _as_float(entries, "task.omega0_min")
        hi = _as_float(entries, "task.omega0_max")
        count = _as_int(entries, "task.omega0_count")
        if lo <= 0 or hi <= lo or count < 2:
            raise ConfigError("task: need 0 < omega0_min < omega0_max and count >= 2")
        task["omega0_grid"] = np.linspace(lo, hi, count)
        task["beta"] = _as_float(entries, "task.beta")
        if task["beta"] <= 0:
            raise ConfigError("task.beta must be positive")
        task["length"] = _as_int(entries, "task.length") if "task.length" in entries else 1000
        task["amplitude"] = (_as_float(entries, "task.amplitude")
                             if "task.amplitude" in entries else 1.0)
        if task["length"] < 2 or task["length"] % 2:
            raise ConfigError("task.length must be a positive even integer")
    elif command == "workhist":
        for key in ("task.length", "task.bin_width"):
            if key not in entries:
                raise ConfigError(f"missing required key {key}")
        task["length"] = _as_int(entries, "task.length")
        if task["length"] < 2 or task["length"] % 2 or task["length"] > 20_000:
            raise ConfigError("task.length must be even and at most 20000")
        task["bin_width"] = _as_float(entries, "task.bin_width")
        if task["bin_width"] <= 0:
            raise ConfigError("task.bin_width must be positive")
        task["n"] = _as_periods(entries, "task.n") if "task.n" in entries else math.inf
    return task


@dataclass
class RunConfig:
    """Validated configuration for one CLI invocation."""

    command: str
    protocol: DriveProtocol | None
    n_k: int
    integrator: IntegratorConfig
    task: dict
    output_format: str
    raw: dict = field(default_factory=dict)


def load_run_config(path, command):
    """Read, parse and validate a config file for the given subcommand."""
    if command not in _TASK_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    entries = parse_config_text(text)

    allowed = _COMMON_KEYS | _TASK_KEYS[command]
    if command not in _NO_PROTOCOL:
        allowed |= _PROTOCOL_KEYS
    unknown = sorted(set(entries) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) for command {command!r}: {', '.join(unknown)}")

    protocol = None
    if command not in _NO_PROTOCOL:
        protocol = _build_protocol(entries, path.parent)
    n_k = _as_int(entries, "grid.n_k") if "grid.n_k" in entries else 2000
    if n_k < 64:
        raise ConfigError("grid.n_k must be at least 64")
    integrator = _build_integrator(entries)
    task = _build_task(entries, command)
    output_format = (_as_choice(entries, "output.format", {"csv", "json", "both"})
                     if "output.format" in entries else "both")
    if command == "workhist" and protocol is not None:
        if n_k != task["length"] // 2:
            # The histogram needs the physical anti-periodic momenta.
            n_k = task["length"] // 2
    return RunConfig(
        command=command,
        protocol=protocol,
        n_k=n_k,
        integrator=integrator,
        task=task,
        output_format=output_format,
        raw=dict(entries),
    )

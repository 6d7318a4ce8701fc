"""CSV and JSON writers for the artifact types.

All CSV output is deterministic: comma separated, LF line endings, one
header row, and floats printed with 17 significant digits so values
round-trip exactly.  JSON documents carry a provenance block with the
raw run configuration and use stable key ordering.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .floquet import DriveProtocol, SpectrumTable
from .numerics import IntegratorConfig

__all__ = [
    "format_float",
    "provenance_block",
    "write_json",
    "write_csv",
    "write_spectrum_csv",
    "write_spectrum_json",
    "load_spectrum_json",
    "write_curve_csv",
    "write_histogram_csv",
]


def format_float(value):
    """17-significant-digit scientific notation (round-trip exact)."""
    return f"{float(value):.16e}"


def _encode_inf(value):
    return "inf" if math.isinf(value) else value


def provenance_block(raw_config=None, **extra):
    block = {"tool": "floquet-work", "version": __version__}
    if raw_config is not None:
        block["config"] = dict(raw_config)
    block.update(extra)
    return block


def write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def write_csv(path, header, columns, comments=(), footer=()):
    """Write aligned columns (pre-formatted strings or floats) as CSV."""
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    rows = zip(*[
        [cell if isinstance(cell, str) else format_float(cell) for cell in col]
        for col in columns
    ])
    lines.extend(",".join(row) for row in rows)
    lines.extend(f"# {c}" for c in footer)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_spectrum_csv(table, path):
    write_csv(
        path,
        header=["k", "E_k", "mu_k", "r_plus_sq", "xi_k"],
        columns=[table.k, table.energy, table.quasi_energy,
                 table.r_plus_sq, table.xi],
    )


def _integrator_dict(config):
    return {
        "method": config.method,
        "steps_per_period": config.steps_per_period,
        "rtol": config.rtol,
        "max_steps": config.max_steps,
    }


def write_spectrum_json(table, path, raw_config=None):
    payload = {
        "provenance": provenance_block(raw_config),
        "protocol": table.protocol.describe(),
        "integrator": _integrator_dict(table.config),
        "grid": {"n_k": table.n_k, "scheme": "midpoint"},
        "modes": {
            "k": table.k.tolist(),
            "E_k": table.energy.tolist(),
            "mu_k": table.quasi_energy.tolist(),
            "r_plus_sq": table.r_plus_sq.tolist(),
            "xi_k": table.xi.tolist(),
            "u_re": table.u.real.tolist(),
            "u_im": table.u.imag.tolist(),
            "v_re": table.v.real.tolist(),
            "v_im": table.v.imag.tolist(),
            "degenerate": [bool(d) for d in table.degenerate],
        },
    }
    write_json(path, payload)


def load_spectrum_json(path):
    """Rebuild a SpectrumTable from its JSON serialization."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    proto = payload["protocol"]
    if proto["kind"] == "sinusoidal":
        protocol = DriveProtocol.sinusoidal(
            h0=proto["h0"], amplitude=proto["amplitude"],
            omega0=proto["omega0"], phi0=proto["phi0"])
    else:
        protocol = DriveProtocol.tabulated(proto["samples"], omega0=proto["omega0"])
    config = IntegratorConfig(**payload["integrator"])
    modes = payload["modes"]
    return SpectrumTable(
        protocol=protocol,
        config=config,
        k=np.asarray(modes["k"]),
        energy=np.asarray(modes["E_k"]),
        u=np.asarray(modes["u_re"]) + 1j * np.asarray(modes["u_im"]),
        v=np.asarray(modes["v_re"]) + 1j * np.asarray(modes["v_im"]),
        quasi_energy=np.asarray(modes["mu_k"]),
        r_plus_sq=np.asarray(modes["r_plus_sq"]),
        xi=np.asarray(modes["xi_k"]),
        degenerate=np.asarray(modes["degenerate"], dtype=bool),
    )


def write_curve_csv(path, names, columns, comments=()):
    write_csv(path, header=list(names), columns=list(columns), comments=comments)


def write_histogram_csv(hist, path):
    comments = [
        f"L = {hist.length}",
        f"n = {_encode_inf(hist.n)}",
        f"bin_width = {format_float(hist.bin_width)}",
        f"threshold = {format_float(hist.threshold)}",
        f"delta0_weight = {format_float(hist.delta0_weight)}",
    ]
    if hist.approximation:
        comments.append(f"approximation = {hist.approximation}")
    footer = [f"total_probability = {format_float(hist.total_probability)}"]
    write_csv(
        path,
        header=["W_lo", "W_hi", "probability"],
        columns=[hist.w_lo, hist.w_hi, hist.probability],
        comments=comments,
        footer=footer,
    )

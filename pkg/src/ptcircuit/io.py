"""Text formats: circuit definitions, traces, spectra, sweeps and plot data.

Every number is written with 17 significant digits so files round-trip
losslessly and identical inputs give byte-identical outputs.
"""

import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .model import PhysicalCircuit, params_from_targets
from .trace import Trace

PHYSICAL_KEYS = ("L_henry", "C_farad", "C0_farad", "R_ohm", "RL_ohm")
DIMENSIONLESS_KEYS = ("c", "gamma", "gamma_l")
TRACE_HEADER = ("tau", "V1", "V2", "dV1", "dV2")
MEASURED_HEADER = ("tau", "V")
SPECTRUM_HEADER = ("branch_id", "omega_r", "omega_i", "residual")
SWEEP_HEADER = ("gamma", "omega_r_1", "omega_i_1", "omega_r_2", "omega_i_2", "real_gap", "overlap")


def fmt(x):
    return f"{float(x):.17g}"


def parse_circuit_text(text, source="<string>"):
    """Parse ``key=value`` lines into ``(form, values)``.

    ``form`` is ``"physical"`` or ``"dimensionless"``. Keys from both forms in
    one file, unknown keys, duplicates and non-numeric values are format
    errors.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in PHYSICAL_KEYS and key not in DIMENSIONLESS_KEYS:
            raise FormatError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise FormatError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(value)
        except ValueError:
            raise FormatError(f"{source}:{lineno}: value of {key!r} is not a number: {value!r}") from None
    physical = [k for k in values if k in PHYSICAL_KEYS]
    dimensionless = [k for k in values if k in DIMENSIONLESS_KEYS]
    if physical and dimensionless:
        raise FormatError(f"{source}: mixes physical keys {physical} with dimensionless keys {dimensionless}")
    return ("physical" if physical else "dimensionless"), values


def circuit_from_values(form, values, source="<string>"):
    """Build a PhysicalCircuit or DimensionlessParams from parsed values."""
    try:
        if form == "physical":
            missing = [k for k in PHYSICAL_KEYS[:4] if k not in values]
            if missing:
                raise FormatError(f"{source}: missing keys {missing}")
            return PhysicalCircuit(L=values["L_henry"], C=values["C_farad"], C0=values["C0_farad"],
                                   R=values["R_ohm"], R_L=values.get("RL_ohm", 0.0))
        missing = [k for k in DIMENSIONLESS_KEYS[:2] if k not in values]
        if missing:
            raise FormatError(f"{source}: missing keys {missing}")
        return params_from_targets(values["c"], values["gamma"], values.get("gamma_l", 0.0))
    except DomainError as exc:
        raise FormatError(f"{source}: {exc}") from None


def read_circuit_file(path):
    text = _read_text(path)
    form, values = parse_circuit_text(text, source=str(path))
    return circuit_from_values(form, values, source=str(path))


def _read_text(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from None


def format_trace(trace):
    buf = io.StringIO()
    header = MEASURED_HEADER if trace.is_single_node else TRACE_HEADER
    buf.write(",".join(header) + "\n")
    for t, row in zip(trace.times, trace.samples):
        buf.write(fmt(t) + "," + ",".join(fmt(x) for x in row) + "\n")
    return buf.getvalue()


def parse_trace(text, source="<string>"):
    """Read the five-column state form or the two-column ``tau,V`` form."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{source}: empty trace file")
    header = tuple(h.strip() for h in lines[0].split(","))
    if header not in (TRACE_HEADER, MEASURED_HEADER):
        raise FormatError(f"{source}: header must be {','.join(TRACE_HEADER)} or {','.join(MEASURED_HEADER)}, "
                          f"got {lines[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise FormatError(f"{source}:{lineno}: expected {len(header)} columns, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise FormatError(f"{source}:{lineno}: non-numeric field in {line!r}") from None
    if len(rows) < 2:
        raise FormatError(f"{source}: trace needs at least 2 samples")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{source}: trace contains non-finite values")
    tau = data[:, 0]
    n = tau.size
    # the writer emits t0 + dt*i, so the first step usually reproduces dt exactly
    candidates = [tau[1] - tau[0], (tau[-1] - tau[0]) / (n - 1)]
    errors = [np.max(np.abs(tau[0] + dt * np.arange(n) - tau)) for dt in candidates]
    dt = candidates[int(np.argmin(errors))]
    if dt <= 0 or np.max(np.abs(np.diff(tau) - dt)) > 1e-6 * dt:
        raise FormatError(f"{source}: time column is not uniformly spaced")
    try:
        return Trace(dt=float(dt), samples=data[:, 1:], t0=float(tau[0]))
    except DomainError as exc:
        raise FormatError(f"{source}: {exc}") from None


def write_text(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc.strerror or exc}") from None


def write_trace(trace, path):
    write_text(path, format_trace(trace))


def read_trace(path):
    return parse_trace(_read_text(path), source=str(path))


def format_spectrum(sp, scale=1.0):
    lines = [",".join(SPECTRUM_HEADER)]
    for j, (w, r) in enumerate(zip(sp.eigenfrequencies, sp.residuals), 1):
        lines.append(f"{j},{fmt(w.real * scale)},{fmt(w.imag * scale)},{fmt(r)}")
    return "\n".join(lines) + "\n"


def format_sweep(sweep, scale=1.0):
    lines = [",".join(SWEEP_HEADER)]
    nan = math.nan
    for i, g in enumerate(sweep.grid):
        if sweep.branches is not None:
            w1, w2 = sweep.branches[i]
            gap = abs(w1.real - w2.real)
            overlap = sweep.coalescence[i].overlap if sweep.coalescence else nan
            row = [g, w1.real * scale, w1.imag * scale, w2.real * scale, w2.imag * scale, gap * scale, overlap]
        else:
            est = sweep.estimates[i]
            if est is None:
                row = [g] + [nan] * 6
            else:
                f = list(est.frequencies) + [nan] * (2 - len(est.frequencies))
                gap = f[0] - f[1]
                row = [g, f[0] * scale, est.envelope_rate * scale, f[1] * scale, nan, gap * scale, nan]
        lines.append(",".join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _write_curve(directory, name, xlabel, ylabel, x, y):
    text = f"{xlabel},{ylabel}\n" + "".join(f"{fmt(a)},{fmt(b)}\n" for a, b in zip(x, y))
    write_text(os.path.join(directory, name), text)


def emit_plot_data(data, mode, directory):
    """Write two-column curve files plus ``manifest.json``; returns the manifest.

    ``fig2`` takes a direct sweep and writes real and imaginary parts of both
    tracked branches against gamma. ``fig3`` takes a trace and writes V1 and
    V2 against tau. ``None`` or an empty sweep gives a manifest with no curves.
    """
    if mode not in ("fig2", "fig3"):
        raise DomainError(f"plot mode must be fig2 or fig3, got {mode!r}")
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create {directory}: {exc.strerror or exc}") from None
    curves = []
    if mode == "fig2" and data is not None and len(data.grid) > 0:
        if data.branches is None:
            raise DomainError("fig2 plot data needs a DIRECT_EIGEN sweep")
        for b in (0, 1):
            for part, values in (("omega_r", data.branches[:, b].real), ("omega_i", data.branches[:, b].imag)):
                name = f"fig2_{part}_branch{b + 1}.csv"
                _write_curve(directory, name, "gamma", part, data.grid, values)
                curves.append({"file": name, "label": f"{part} branch {b + 1}, gamma_l={fmt(data.gamma_l)}"})
    elif mode == "fig3" and data is not None:
        if data.is_single_node:
            raise DomainError("fig3 plot data needs both node voltages")
        for ch in (1, 2):
            name = f"fig3_V{ch}.csv"
            _write_curve(directory, name, "tau", f"V{ch}", data.times, data.voltage(ch))
            curves.append({"file": name, "label": f"V{ch}"})
    manifest = {"mode": mode, "curves": curves}
    write_text(os.path.join(directory, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest

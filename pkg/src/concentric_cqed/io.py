"""Flat-file formats.

Spectrum   ``freq_mhz,value[,sigma]``
Trace      ``# bin_width_s=<value>`` then ``bin_index,counts``
Truth      ``start_s,end_s``
Survival   ``tau_ms,survived,trials``

All files have a header line, use a decimal point and LF line endings.
Floats are written with ``repr`` so that rewriting a file is byte-stable.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataError
from .spectra import Spectrum
from .trace import PhotonTrace
from .units import MHZ, MS


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header, rows, preamble=()):
    path = Path(path)
    with path.open("w", newline="", encoding="ascii") as fh:
        for line in preamble:
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _read_rows(path, allowed_headers):
    """Yield ``(line_number, header, fields)``; comment lines are returned separately."""
    path = Path(path)
    comments = []
    rows = []
    header = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if header is None:
                    comments.append(line[1:].strip())
                    continue
                raise DataError(f"{path}:{lineno}: comment lines only allowed before the header")
            fields = next(csv.reader([line]))
            if header is None:
                header = tuple(f.strip() for f in fields)
                if header not in allowed_headers:
                    expected = " or ".join(",".join(h) for h in allowed_headers)
                    raise DataError(f"{path}:{lineno}: header {','.join(header)!r}, expected {expected}")
                continue
            if len(fields) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
            rows.append((lineno, fields))
    if header is None:
        raise DataError(f"{path}: missing header line")
    return comments, header, rows


def _number(path, lineno, text, kind=float):
    try:
        value = kind(text.strip())
    except ValueError:
        raise DataError(f"{path}:{lineno}: cannot parse {text!r} as {kind.__name__}") from None
    if kind is float and not np.isfinite(value):
        raise DataError(f"{path}:{lineno}: non-finite value {text!r}")
    return value


def write_spectrum(path, spectrum: Spectrum):
    freq = spectrum.frequency / MHZ
    if spectrum.sigma is None:
        return _write_rows(path, ("freq_mhz", "value"), zip(freq, spectrum.value))
    return _write_rows(path, ("freq_mhz", "value", "sigma"), zip(freq, spectrum.value, spectrum.sigma))


def read_spectrum(path) -> Spectrum:
    _, header, rows = _read_rows(path, {("freq_mhz", "value"), ("freq_mhz", "value", "sigma")})
    cols = [[_number(path, n, f) for f in fields] for n, fields in rows]
    if not cols:
        raise DataError(f"{path}: no data rows")
    prev = None
    for (lineno, _), row in zip(rows, cols):
        if prev is not None and not row[0] > prev:
            raise DataError(f"{path}:{lineno}: frequencies must be strictly increasing")
        if row[1] < 0:
            raise DataError(f"{path}:{lineno}: negative value")
        if len(row) == 3 and not row[2] > 0:
            raise DataError(f"{path}:{lineno}: sigma must be positive")
        prev = row[0]
    arr = np.array(cols)
    sigma = arr[:, 2] if arr.shape[1] == 3 else None
    return Spectrum(arr[:, 0] * MHZ, arr[:, 1], sigma)


def write_trace(path, trace: PhotonTrace):
    return _write_rows(path, ("bin_index", "counts"), enumerate(trace.counts),
                       preamble=(f"# bin_width_s={trace.bin_width!r}",))


def truth_path(trace_path):
    trace_path = Path(trace_path)
    return trace_path.with_name(trace_path.stem + ".truth.csv")


def write_truth(path, intervals):
    return _write_rows(path, ("start_s", "end_s"), intervals)


def read_trace(path, truth=None) -> PhotonTrace:
    """Read a trace file; the truth sidecar is loaded when ``truth`` names an existing file."""
    comments, _, rows = _read_rows(path, {("bin_index", "counts")})
    bin_width = None
    for c in comments:
        key, _, value = c.partition("=")
        if key.strip() == "bin_width_s":
            bin_width = _number(path, 1, value)
    if bin_width is None:
        raise DataError(f"{path}: missing '# bin_width_s=<value>' header")
    counts = []
    for i, (lineno, (idx, cnt)) in enumerate(rows):
        if _number(path, lineno, idx, int) != i:
            raise DataError(f"{path}:{lineno}: bin_index {idx.strip()} out of sequence, expected {i}")
        c = _number(path, lineno, cnt, int)
        if c < 0:
            raise DataError(f"{path}:{lineno}: negative count")
        counts.append(c)
    intervals = None
    if truth is not None and Path(truth).exists():
        intervals = read_truth(truth)
    return PhotonTrace(np.array(counts, dtype=np.int64), bin_width, intervals)


def read_truth(path):
    _, _, rows = _read_rows(path, {("start_s", "end_s")})
    out = []
    for lineno, (a, b) in rows:
        start, end = _number(path, lineno, a), _number(path, lineno, b)
        if end < start:
            raise DataError(f"{path}:{lineno}: interval ends before it starts")
        out.append((start, end))
    return out


def write_survival(path, rows):
    return _write_rows(path, ("tau_ms", "survived", "trials"), ((t / MS, s, n) for t, s, n in rows))


def read_survival(path):
    """Return ``(tau_s, fraction, trials)`` rows."""
    _, _, rows = _read_rows(path, {("tau_ms", "survived", "trials")})
    out = []
    for lineno, (t, s, n) in rows:
        tau, survived, trials = _number(path, lineno, t), _number(path, lineno, s, int), _number(path, lineno, n, int)
        if trials < 1 or not 0 <= survived <= trials:
            raise DataError(f"{path}:{lineno}: need 0 <= survived <= trials and trials >= 1")
        out.append((tau * MS, survived / trials, trials))
    return out


def write_table(path, header, rows):
    return _write_rows(path, header, rows)

"""Deterministic, atomic file output."""

from __future__ import annotations

import json
import math
import os
import tempfile

TIMESERIES_COLUMNS = (
    "t", "a", "n", "x", "re_rho_eg", "im_rho_eg", "re_m_eg", "im_m_eg",
    "re_rho_egeg", "im_rho_egeg", "Gamma", "Gamma_bar", "adot", "xi", "chi_re", "chi_im",
)


def fmt(value):
    """17 significant digits, enough to round-trip any double."""
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, data):
    atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def timeseries_rows(series):
    for r in series:
        s, q = r.state, r.rates
        yield (r.t, s.a, s.n, s.x, s.rho_eg.real, s.rho_eg.imag, s.m_eg.real, s.m_eg.imag,
               s.rho_egeg.real, s.rho_egeg.imag, q.Gamma, q.Gamma_bar, r.adot, r.xi,
               r.chi.real, r.chi.imag)


def write_timeseries(path, series):
    write_csv(path, TIMESERIES_COLUMNS, timeseries_rows(series))


def read_csv(path):
    """Header and float rows of a file written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            rows.append([float(v) if _is_number(v) else v for v in line.strip().split(",")])
    return header, rows


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True

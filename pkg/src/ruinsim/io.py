"""CSV emission and parsing.

Dialect: comma separated, one header row, LF line endings, floats written
with ``repr`` so that every value parses back bit-identically.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .cycles import CycleBatch
from .ruin import PerpetuityBatch, RuinEstimate

CYCLE_COLUMNS = ("m", "q", "t")
PERPETUITY_COLUMNS = ("y_inf", "n_trunc", "a_trunc", "flagged")
RUIN_COLUMNS = ("u", "lower", "upper", "direct", "stderr_lower", "stderr_direct", "n_paths")
TAIL_COLUMNS = ("estimator", "value", "ci_lo", "ci_hi", "k_or_window")
KESTEN_COLUMNS = ("quantity", "value", "stderr", "n_cycles", "beta")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))  # nan: undefined or saturated
    return str(x)


def write_rows(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_rows(path, columns=None) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        r = csv.DictReader(fh)
        if columns is not None and tuple(r.fieldnames or ()) != tuple(columns):
            raise ValueError(f"{path}: expected columns {','.join(columns)}, got {','.join(r.fieldnames or ())}")
        return list(r)


def _f(s: str) -> float:
    return float(s) if s != "" else math.nan


def write_cycles(path, batch: CycleBatch) -> Path:
    return write_rows(path, CYCLE_COLUMNS, zip(batch.m, batch.q, batch.t))


def read_cycles(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = read_rows(path, CYCLE_COLUMNS)
    arr = np.array([[_f(r[c]) for c in CYCLE_COLUMNS] for r in rows], dtype=float).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def write_perpetuities(path, batch: PerpetuityBatch) -> Path:
    return write_rows(path, PERPETUITY_COLUMNS, zip(batch.y_inf, batch.n_trunc, batch.a_trunc, batch.flagged))


def read_perpetuities(path) -> PerpetuityBatch:
    rows = read_rows(path, PERPETUITY_COLUMNS)
    y = np.array([_f(r["y_inf"]) for r in rows])
    n = np.array([int(r["n_trunc"]) for r in rows], dtype=np.int64)
    a = np.array([_f(r["a_trunc"]) for r in rows])
    flagged = np.array([r["flagged"] == "1" for r in rows], dtype=bool)
    sat = np.isnan(y)
    return PerpetuityBatch(y, n, a, flagged, sat)


def write_ruin_table(path, estimates: list[RuinEstimate]) -> Path:
    rows = (
        (e.u, e.lower, e.upper if e.upper_defined else "", e.direct, e.gbar_u_stderr, e.direct_stderr, e.n_paths)
        for e in estimates
    )
    return write_rows(path, RUIN_COLUMNS, rows)


def read_ruin_table(path) -> list[dict[str, float]]:
    """Rows as dicts; an undefined upper bound reads back as ``nan``."""
    out = []
    for r in read_rows(path, RUIN_COLUMNS):
        d = {c: _f(r[c]) for c in RUIN_COLUMNS if c != "n_paths"}
        d["n_paths"] = int(r["n_paths"])
        out.append(d)
    return out


def write_tail_report(path, rows) -> Path:
    return write_rows(path, TAIL_COLUMNS, rows)


def read_tail_report(path) -> list[tuple]:
    return [(r["estimator"], _f(r["value"]), _f(r["ci_lo"]), _f(r["ci_hi"]), r["k_or_window"])
            for r in read_rows(path, TAIL_COLUMNS)]


def write_kesten(path, diag) -> Path:
    rows = [
        ("e_m_beta", diag.e_m_beta.value, diag.e_m_beta.stderr, diag.n_cycles, diag.beta),
        ("e_m_beta_logm_plus", diag.e_m_beta_logm_plus.value, diag.e_m_beta_logm_plus.stderr, diag.n_cycles, diag.beta),
        ("e_q_beta", diag.e_q_beta.value, diag.e_q_beta.stderr, diag.n_cycles, diag.beta),
    ]
    return write_rows(path, KESTEN_COLUMNS, rows)


def read_kesten(path) -> dict[str, tuple[float, float]]:
    return {r["quantity"]: (_f(r["value"]), _f(r["stderr"])) for r in read_rows(path, KESTEN_COLUMNS)}

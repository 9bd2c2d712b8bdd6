"""CSV artifacts: matrices, run summaries and iteration traces.

Matrix files start with a ``dims,<rows>,<cols>`` line followed by the rows.
Floats are written with ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .problem import IterationRecord, ProjNewtonError

SUMMARY_COLUMNS = ["scenario", "trial", "algorithm", "outer_iters", "time_s", "f_star", "residual", "projnorm", "status"]
TRACE_COLUMNS = ["k", "f", "residual", "projnorm", "step_type", "alpha", "elapsed"]


class CsvParseError(ProjNewtonError, ValueError):
    def __init__(self, path, line: int, reason: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def write_matrix(path, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dims", M.shape[0], M.shape[1]])
        for row in M:
            w.writerow([repr(float(v)) for v in row])


def read_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    while rows and not rows[-1]:
        rows.pop()
    if not rows:
        raise CsvParseError(path, 1, "empty file")
    head = rows[0]
    if len(head) != 3 or head[0].strip() != "dims":
        raise CsvParseError(path, 1, "expected header 'dims,<rows>,<cols>'")
    try:
        m, n = int(head[1]), int(head[2])
    except ValueError:
        raise CsvParseError(path, 1, "dimensions must be integers") from None
    if m < 1 or n < 1:
        raise CsvParseError(path, 1, "dimensions must be positive")
    body = rows[1:]
    if len(body) != m:
        raise CsvParseError(path, len(rows) + 1 if len(body) < m else m + 2,
                            f"expected {m} data rows, found {len(body)}")
    out = np.empty((m, n))
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != n:
            raise CsvParseError(path, line, f"expected {n} values, found {len(row)}")
        for j, tok in enumerate(row):
            try:
                out[i, j] = float(tok)
            except ValueError:
                raise CsvParseError(path, line, f"column {j + 1}: cannot parse {tok!r} as a float") from None
    return out


def write_rows(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: fmt(r.get(c, "")) for c in columns})


def trace_rows(trace: Sequence[IterationRecord], f0: float | None = None,
               residual0: float = math.nan, projnorm0: float = math.nan):
    if f0 is not None:
        yield {"k": 0, "f": f0, "residual": residual0, "projnorm": projnorm0,
               "step_type": "Start", "alpha": math.nan, "elapsed": 0.0}
    for rec in trace:
        yield {"k": rec.k, "f": rec.f, "residual": rec.residual, "projnorm": rec.projnorm,
               "step_type": rec.step_type, "alpha": rec.alpha, "elapsed": rec.elapsed}


def write_trace(path, trace, **start) -> None:
    write_rows(path, TRACE_COLUMNS, trace_rows(trace, **start))


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p

"""Dataset ingestion and result serialization."""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from io import StringIO
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

from covroc.errors import InvalidInputError
from covroc.estimators import Curve, PairedSample

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class StudyDataset:
    """Diseased (F) and healthy (G) samples of (covariate, marker)."""

    diseased: PairedSample
    healthy: PairedSample
    marker_name: str = "marker"
    covariate_name: str = "covariate"
    negated: bool = False
    dropped_rows: int = 0

    @classmethod
    def from_arrays(cls, x_f, y_f, x_g, y_g, **meta) -> StudyDataset:
        return cls(PairedSample(x_f, y_f), PairedSample(x_g, y_g), **meta)

    @property
    def sizes(self) -> tuple[int, int]:
        return len(self.diseased), len(self.healthy)

    def pooled_covariate(self) -> np.ndarray:
        return np.concatenate([self.diseased.covariate, self.healthy.covariate])


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_numeric(col: pd.Series, name: str, rows: np.ndarray) -> np.ndarray:
    # astype parses with correct rounding; to_numeric's fast path can be 1 ulp off
    try:
        values = col.astype(np.float64).to_numpy()
        bad = ~np.isfinite(values)
    except ValueError:
        bad = ~np.isfinite(pd.to_numeric(col, errors="coerce").to_numpy(dtype=np.float64))
    if np.any(bad):
        where = rows[bad][:10].tolist()
        raise InvalidInputError(
            f"column {name!r} has non-numeric values at data rows {where}"
        )
    return values


def read_csv(
    path: str | os.PathLike,
    status_col: str,
    marker_col: str,
    covariate_col: str,
    negate_marker: bool = False,
    *,
    positive_label: str = "1",
    negative_label: str = "0",
    delimiter: str = ",",
) -> StudyDataset:
    """Read a two-population dataset from a headed, UTF-8 CSV file.

    Rows with a missing value in any used column are dropped (and counted);
    every remaining cell must parse as a number, with ``.`` as decimal
    point.  Rows are assigned to the diseased population when the status
    equals ``positive_label`` and to the healthy one when it equals
    ``negative_label``; any other status is an error.  With
    ``negate_marker`` the stored marker is the negated column, which turns a
    marker that is *lower* in the diseased population into one that is
    higher.

    Row numbers in error messages count data rows from 1 (header excluded).
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"input file not found: {path}")
    try:
        df = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False,
                         encoding="utf-8", skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"cannot parse {path}: {exc}") from exc

    used = [status_col, marker_col, covariate_col]
    missing = [c for c in used if c not in df.columns]
    if missing:
        raise InvalidInputError(
            f"column(s) {missing} not found in {path}; available: {list(df.columns)}"
        )

    rows = np.arange(1, len(df) + 1)
    sub = df[used].apply(lambda s: s.str.strip())
    na_tokens = {"", "NA", "N/A", "NaN", "nan", "null", "NULL", "."}
    is_missing = sub.isin(na_tokens).any(axis=1).to_numpy()
    dropped = int(is_missing.sum())
    if dropped:
        log.warning("dropped %d row(s) with missing values in %s", dropped, used)
    sub = sub.loc[~is_missing]
    rows = rows[~is_missing]

    status = sub[status_col].to_numpy()
    pos = status == positive_label
    neg = status == negative_label
    unknown = ~(pos | neg)
    if np.any(unknown):
        raise InvalidInputError(
            f"status column {status_col!r} has values other than "
            f"{positive_label!r}/{negative_label!r} at data rows {rows[unknown][:10].tolist()} "
            f"(e.g. {status[unknown][0]!r})"
        )
    marker = _parse_numeric(sub[marker_col], marker_col, rows)
    covariate = _parse_numeric(sub[covariate_col], covariate_col, rows)
    if negate_marker:
        marker = -marker
    if not np.any(pos):
        raise InvalidInputError(f"no diseased rows (status {positive_label!r}) in {path}")
    if not np.any(neg):
        raise InvalidInputError(f"no healthy rows (status {negative_label!r}) in {path}")

    return StudyDataset(
        diseased=PairedSample(covariate[pos], marker[pos]),
        healthy=PairedSample(covariate[neg], marker[neg]),
        marker_name=("-" + marker_col) if negate_marker else marker_col,
        covariate_name=covariate_col,
        negated=negate_marker,
        dropped_rows=dropped,
    )


def write_dataset_csv(data: StudyDataset, path: str | os.PathLike,
                      status_col: str = "status", marker_col: str = "marker",
                      covariate_col: str = "covariate") -> None:
    """Write a dataset in the layout :func:`read_csv` accepts (diseased first)."""
    def rows():
        for label, s in (("1", data.diseased), ("0", data.healthy)):
            for x, y in zip(s.covariate, s.marker):
                yield [label, repr(float(y)), repr(float(x))]

    _atomic_write_csv(path, [status_col, marker_col, covariate_col], rows())


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------

def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    if not path.parent.is_dir():
        raise InvalidInputError(f"output directory does not exist: {path.parent}")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_csv(path, header: list[str], rows: Iterable[list[Any]]) -> None:
    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# TestResult serialization
# ---------------------------------------------------------------------------

def _curve_to_json(c: Curve) -> dict:
    return {"grid": c.grid.tolist(), "values": c.values.tolist()}


def result_to_json(result) -> dict:
    rec = result.split_record
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "test_result",
        "B": result.B,
        "seed": result.seed,
        "rho": rec.rho,
        "split_seed": rec.seed,
        "bandwidths": {"diseased": result.bandwidths[0], "healthy": result.bandwidths[1]},
        "statistics": {k.value: v for k, v in result.statistics.items()},
        "p_values": {k.value: v for k, v in result.p_values.items()},
        "auc": result.auc,
        "aauc": result.aauc,
        "roc_curve": _curve_to_json(result.roc_curve),
        "aroc_curve": _curve_to_json(result.aroc_curve),
        "bootstrap_replicates": {k.value: v.tolist() for k, v in result.bootstrap_replicates.items()},
        "split_record": {
            "roc_diseased": rec.roc_diseased.tolist(),
            "roc_healthy": rec.roc_healthy.tolist(),
            "aroc_diseased": rec.aroc_diseased.tolist(),
            "aroc_healthy": rec.aroc_healthy.tolist(),
        },
    }


def result_from_json(doc: dict):
    from covroc.testing import DistanceKind, SplitRecord, TestResult

    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported schema_version {doc.get('schema_version')!r}")
    sr = doc["split_record"]

    def idx(v):
        return np.asarray(v, dtype=np.intp)

    def ro(a):
        a = np.asarray(a, dtype=np.float64)
        a.flags.writeable = False
        return a

    return TestResult(
        statistics={DistanceKind.parse(k): float(v) for k, v in doc["statistics"].items()},
        p_values={DistanceKind.parse(k): float(v) for k, v in doc["p_values"].items()},
        bootstrap_replicates={DistanceKind.parse(k): ro(v) for k, v in doc["bootstrap_replicates"].items()},
        roc_curve=Curve(doc["roc_curve"]["grid"], doc["roc_curve"]["values"]),
        aroc_curve=Curve(doc["aroc_curve"]["grid"], doc["aroc_curve"]["values"]),
        split_record=SplitRecord(
            roc_diseased=idx(sr["roc_diseased"]),
            roc_healthy=idx(sr["roc_healthy"]),
            aroc_diseased=idx(sr["aroc_diseased"]),
            aroc_healthy=idx(sr["aroc_healthy"]),
            rho=float(doc["rho"]),
            seed=int(doc["split_seed"]),
        ),
        bandwidths=(float(doc["bandwidths"]["diseased"]), float(doc["bandwidths"]["healthy"])),
        B=int(doc["B"]),
        seed=int(doc["seed"]),
    )


def write_result(result, path: str | os.PathLike, format: str = "json") -> None:
    """Write a TestResult as JSON (lossless) or sectioned CSV.

    The CSV file has a ``# curves`` block (``p,roc,aroc``, one row per grid
    point) followed by a ``# summary`` block of ``name,value`` rows.
    """
    if format == "json":
        atomic_write_text(path, dumps_json(result_to_json(result)))
    elif format == "csv":
        atomic_write_text(path, result_to_csv(result))
    else:
        raise InvalidInputError(f"unknown result format {format!r}; use 'json' or 'csv'")


def result_to_csv(result) -> str:
    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write("# curves\n")
    w.writerow(["p", "roc", "aroc"])
    for p, r, a in zip(result.roc_curve.grid, result.roc_curve.values, result.aroc_curve.values):
        w.writerow([repr(float(p)), repr(float(r)), repr(float(a))])
    buf.write("# summary\n")
    w.writerow(["name", "value"])
    for k, v in result.statistics.items():
        w.writerow([f"{k.value}.statistic", repr(float(v))])
        w.writerow([f"{k.value}.p_value", repr(float(result.p_values[k]))])
    for name, v in (("auc", result.auc), ("aauc", result.aauc),
                    ("bandwidth.diseased", result.bandwidths[0]),
                    ("bandwidth.healthy", result.bandwidths[1]),
                    ("rho", result.rho)):
        w.writerow([name, repr(float(v))])
    w.writerow(["B", result.B])
    w.writerow(["seed", result.seed])
    return buf.getvalue()


def read_result(path: str | os.PathLike):
    """Read a TestResult written with ``format="json"``."""
    with open(path, encoding="utf-8") as fh:
        return result_from_json(json.load(fh))


def read_sectioned_csv(path: str | os.PathLike) -> dict[str, list[list[str]]]:
    """Split a ``# name`` sectioned CSV into ``{name: rows}`` (header row first)."""
    sections: dict[str, list[list[str]]] = {}
    current = None
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                current = line[2:].strip()
                sections[current] = []
            elif line and current is not None:
                sections[current].append(next(csv.reader([line])))
    return sections


# ---------------------------------------------------------------------------
# Rejection tables and curve payloads
# ---------------------------------------------------------------------------

REJECTION_COLUMNS = ["scenario", "n_f", "n_g", "rho", "distance", "alpha",
                     "rejections", "n_s", "proportion", "lo", "hi"]


def rejection_table_to_json(table) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "rejection_table",
        "B": table.B,
        "seed": table.seed,
        "rows": [{c: getattr(r, c) for c in REJECTION_COLUMNS} for r in table.rows],
        "p_values": [
            {"n_f": k[0], "n_g": k[1], "rho": k[2], "distance": k[3], "values": v.tolist()}
            for k, v in table.p_values.items()
        ],
    }


def rejection_table_to_csv(table) -> str:
    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REJECTION_COLUMNS)
    for r in table.rows:
        w.writerow([getattr(r, c) if not isinstance(getattr(r, c), float) else repr(getattr(r, c))
                    for c in REJECTION_COLUMNS])
    return buf.getvalue()


def write_rejection_table(table, path: str | os.PathLike, format: str = "csv") -> None:
    if format == "json":
        atomic_write_text(path, dumps_json(rejection_table_to_json(table)))
    elif format == "csv":
        atomic_write_text(path, rejection_table_to_csv(table))
    else:
        raise InvalidInputError(f"unknown table format {format!r}; use 'json' or 'csv'")


def curves_to_csv(payload: dict) -> str:
    """Sectioned CSV for a ``curves`` payload: one row per grid point, then a summary."""
    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cond = payload["conditional"]
    buf.write("# curves\n")
    w.writerow(["p", "roc", "aroc"] + [f"roc_x={c['x']!r}" for c in cond])
    for i, p in enumerate(payload["grid"]):
        w.writerow([repr(p), repr(payload["roc"][i]), repr(payload["aroc"][i])]
                   + [repr(c["values"][i]) for c in cond])
    buf.write("# summary\n")
    w.writerow(["name", "value"])
    w.writerow(["auc", repr(payload["auc"])])
    w.writerow(["aauc", repr(payload["aauc"])])
    for c in cond:
        w.writerow([f"auc_x={c['x']!r}", repr(c["auc"])])
    w.writerow(["bandwidth.diseased", repr(payload["bandwidths"]["diseased"])])
    w.writerow(["bandwidth.healthy", repr(payload["bandwidths"]["healthy"])])
    return buf.getvalue()

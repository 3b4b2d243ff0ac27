"""CSV and JSON writers for run outputs.

Every CSV starts with a ``# config_hash=<hash>`` comment line followed by the
header row; columns are written in the order documented on each writer.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .calibration import CalibrationResult
from .gpsr import DerivativeEstimate
from .sampling import MagnetizationEstimate
from .trainer import LossReport

FLOAT_FORMAT = "{:.12g}"


class SchemaError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return FLOAT_FORMAT.format(v)
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], config_hash: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, columns, rows, config_hash: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows, config_hash))
    return path


def write_json(path: Path, doc, config_hash: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"config_hash": config_hash, **doc} if config_hash else doc
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(v):
    if hasattr(v, "item"):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def read_csv(path: Path, required: Sequence[str]) -> list[dict[str, str]]:
    """Rows of a CSV written by this module (comment lines skipped)."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path} not found")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise SchemaError(f"{path} is empty; expected columns {', '.join(required)}")
    reader = csv.DictReader(lines)
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        raise SchemaError(f"{path} lacks columns {', '.join(missing)}")
    rows = list(reader)
    if not rows:
        raise SchemaError(f"{path} has a header but no data rows")
    return rows


# --- specific tables ----------------------------------------------------------

EVALUATION_COLUMNS = ("x", "theta", "value", "std_error", "shots")


def write_evaluations(path, results: Mapping[tuple[float, float], MagnetizationEstimate], config_hash=""):
    """Columns ``x, theta, value, std_error, shots`` (shots empty in exact mode)."""
    rows = [(x, t, e.value, e.std_error, e.shots) for (x, t), e in sorted(results.items())]
    return write_csv(path, EVALUATION_COLUMNS, rows, config_hash)


def read_evaluations(path) -> dict[tuple[float, float], MagnetizationEstimate]:
    out = {}
    for i, row in enumerate(read_csv(path, EVALUATION_COLUMNS[:4]), start=1):
        try:
            x, theta = float(row["x"]), float(row["theta"])
            value, se = float(row["value"]), float(row["std_error"])
            shots = int(row["shots"]) if row.get("shots") else None
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"row {i}: {exc}") from exc
        if not all(map(math.isfinite, (x, theta, value, se))):
            raise SchemaError(f"row {i}: non-finite entry")
        out[(x, theta)] = MagnetizationEstimate(value, se, shots)
    return out


def derivative_columns(n_shifts: int) -> list[str]:
    cols = ["x", "theta", "derivative", "std_error"]
    for k in range(1, n_shifts + 1):
        cols += [f"shift_{k}_plus", f"shift_{k}_minus"]
    return cols


def write_derivatives(path, theta_derivs: Mapping[float, Mapping[float, DerivativeEstimate]], config_hash=""):
    """One row per (theta, x); shift columns hold the shifted raw outputs."""
    n = max((len(d.evaluations) // 2 for ds in theta_derivs.values() for d in ds.values()), default=0)
    rows = []
    for theta in sorted(theta_derivs):
        for x, d in sorted(theta_derivs[theta].items()):
            rows.append([x, theta, d.value, d.std_error] + [e.value for _, e in d.evaluations])
    return write_csv(path, derivative_columns(n), rows, config_hash)


def write_fig2(path, theta_derivs, theta_values, config_hash=""):
    """Columns ``theta, x, f, df, df_std_error``: scaled model and derivative per theta."""
    rows = []
    for theta in sorted(theta_derivs):
        for x, d in sorted(theta_derivs[theta].items()):
            rows.append((theta, x, theta_values[theta][x], d.value, d.std_error))
    return write_csv(path, ("theta", "x", "f", "df", "df_std_error"), rows, config_hash)


def write_baseline(path, baselines: Mapping[float, tuple], config_hash=""):
    """Columns ``theta, x, f_smoothed, df_smoothed`` (raw magnetization units)."""
    rows = []
    for theta in sorted(baselines):
        xs, z, dz = baselines[theta]
        rows += [(theta, float(a), float(b), float(c)) for a, b, c in zip(xs, z, dz)]
    return write_csv(path, ("theta", "x", "f_smoothed", "df_smoothed"), rows, config_hash)


def write_losses(path, reports: Sequence[LossReport], config_hash=""):
    """Columns ``theta, sqrt_l_d, l_b, total``."""
    rows = [(r.theta, r.sqrt_l_d, r.l_b, r.total) for r in sorted(reports, key=lambda r: r.theta)]
    return write_csv(path, ("theta", "sqrt_l_d", "l_b", "total"), rows, config_hash)


def write_qel(path, derivs: Mapping[float, DerivativeEstimate], values: Mapping[float, tuple], config_hash=""):
    """Columns ``x, f, f_std_error, df, df_std_error`` on the extended grid."""
    rows = [(x, values[x][0], values[x][1], d.value, d.std_error) for x, d in sorted(derivs.items())]
    return write_csv(path, ("x", "f", "f_std_error", "df", "df_std_error"), rows, config_hash)


def write_calibration(out_dir: Path, result: CalibrationResult, config_hash="", stem="calibration"):
    out_dir = Path(out_dir)
    write_csv(out_dir / f"{stem}_scan.csv", ("delta_offset", "weighted_rmsd"), result.scan, config_hash)
    return write_json(out_dir / f"{stem}.json", result.to_dict(), config_hash)

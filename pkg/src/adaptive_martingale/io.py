"""CSV and JSON serialization for ensembles, strategies, reports and quotes.

CSV floats are written with 17 significant digits (``%.17g``) so that every
value round-trips exactly. JSON relies on Python's shortest round-trip repr.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import UsageError
from .martingale import MartingaleReport
from .stochastic import PathEnsemble, TimeGrid
from .strategy import TradingStrategy

ENSEMBLE_COLUMNS = ("path", "time_index", "time", "value")
STRATEGY_COLUMNS = ("path", "time_index", "time", "a", "b")
REPORT_COLUMNS = ("iter", "theta", "max_defect")


def fmt(x: float) -> str:
    return "%.17g" % x


def _rows(times: np.ndarray, *mats: np.ndarray):
    tcol = [fmt(t) for t in times]
    for p in range(mats[0].shape[0]):
        cols = [[fmt(v) for v in m[p]] for m in mats]
        for i, t in enumerate(tcol):
            yield ",".join([str(p), str(i), t, *(c[i] for c in cols)])


def ensemble_to_csv(ens: PathEnsemble) -> str:
    lines = [",".join(ENSEMBLE_COLUMNS)]
    lines.extend(_rows(ens.grid.times, ens.values))
    return "\n".join(lines) + "\n"


def ensemble_to_json(ens: PathEnsemble) -> str:
    doc = {
        "kind": ens.kind,
        "seed": ens.seed,
        "grid": ens.grid.times.tolist(),
        "n_paths": ens.n_paths,
        "values": ens.values.tolist(),
    }
    return json.dumps(doc) + "\n"


def strategy_to_csv(strategy: TradingStrategy) -> str:
    lines = [",".join(STRATEGY_COLUMNS)]
    lines.extend(_rows(strategy.grid.times, strategy.a, strategy.b))
    return "\n".join(lines) + "\n"


def strategy_to_json(strategy: TradingStrategy, seed: int) -> str:
    doc = {
        "kind": "strategy",
        "seed": seed,
        "grid": strategy.grid.times.tolist(),
        "n_paths": strategy.n_paths,
        "a": strategy.a.tolist(),
        "b": strategy.b.tolist(),
    }
    return json.dumps(doc) + "\n"


def _read_table(text: str, columns: tuple[str, ...]):
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    if header != columns:
        raise UsageError(f"expected CSV header {','.join(columns)}, got {','.join(header)}")
    rows = [r for r in reader if r]
    if not rows:
        raise UsageError("CSV has no data rows")
    paths = np.array([int(r[0]) for r in rows])
    idx = np.array([int(r[1]) for r in rows])
    n_paths, n_times = paths.max() + 1, idx.max() + 1
    if len(rows) != n_paths * n_times:
        raise UsageError("CSV is not a complete path x time table")
    times = np.empty(n_times)
    times[idx] = [float(r[2]) for r in rows]
    data = []
    for k in range(3, len(columns)):
        m = np.empty((n_paths, n_times))
        m[paths, idx] = [float(r[k]) for r in rows]
        data.append(m)
    return TimeGrid(times), data


def ensemble_from_csv(text: str, seed: int, kind: str) -> PathEnsemble:
    """CSV carries no seed or kind, so the caller supplies them."""
    grid, (values,) = _read_table(text, ENSEMBLE_COLUMNS)
    return PathEnsemble(values, grid, seed, kind)


def ensemble_from_json(text: str) -> PathEnsemble:
    doc = json.loads(text)
    values = np.array(doc["values"], dtype=np.float64)
    if values.shape[0] != doc["n_paths"]:
        raise UsageError(f"n_paths {doc['n_paths']} disagrees with {values.shape[0]} value rows")
    return PathEnsemble(values, TimeGrid(doc["grid"]), int(doc["seed"]), doc["kind"])


def strategy_from_csv(text: str) -> TradingStrategy:
    grid, (a, b) = _read_table(text, STRATEGY_COLUMNS)
    return TradingStrategy.unchecked(a, b, grid)


def strategy_from_json(text: str) -> TradingStrategy:
    doc = json.loads(text)
    if doc.get("kind") != "strategy":
        raise UsageError(f"expected kind 'strategy', got {doc.get('kind')!r}")
    return TradingStrategy.unchecked(doc["a"], doc["b"], TimeGrid(doc["grid"]))


def report_to_json(report: MartingaleReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def report_to_csv(report: MartingaleReport) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for k, (theta, worst) in enumerate(zip(report.theta_history, report.defect_history)):
        lines.append(f"{k},{fmt(theta)},{fmt(worst)}")
    return "\n".join(lines) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)

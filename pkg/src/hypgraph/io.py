"""Reading and writing run artefacts: solution CSV, metadata and reports."""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import geometry as geo
from .solver import Solution, SolverConfig, StageRecord, build_grid

SOLUTION_CSV = "solution.csv"
SOLUTION_META = "solution_meta.json"


def _plain(obj):
    """JSON fallback for numpy scalars/arrays and infinities."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _finite(obj):
    # json would emit the non-standard token Infinity; spell it out instead
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps(payload: dict) -> str:
    plain = json.loads(json.dumps(payload, default=_plain))
    return json.dumps(_finite(plain), sort_keys=True, indent=2) + "\n"


def write_report(path, payload: dict, config: dict) -> Path:
    """Write ``payload`` with the resolved config embedded and the wall-clock
    time kept in its own ``timestamp`` field."""
    out = dict(payload)
    out["config"] = config
    out["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(out))
    return path


def write_solution(solution: Solution, out_dir, config: dict) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    F = solution.F()
    csv_path = out_dir / SOLUTION_CSV
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u", "d_x", "F_residual"])
        for (x, y), u, d, f in zip(solution.points, solution.u, solution.dist, F):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(u)), repr(float(d)), repr(float(f))])
    meta = {
        "domain": solution.grid.domain.to_dict(),
        "h": solution.grid.h,
        "n": solution.n,
        "tau": solution.tau,
        "tau_schedule": [s.tau for s in solution.history],
        "iterations": [s.iterations for s in solution.history],
        "stage_residuals": [s.residual for s in solution.history],
        "stage_tolerances": [s.tolerance for s in solution.history],
        "final_residual": solution.residual,
        "max_abs_F": float(np.max(np.abs(F))),
        "nodes": int(solution.grid.size),
        "solver": solution.config.to_dict(),
    }
    meta_path = write_report(out_dir / SOLUTION_META, meta, config)
    return csv_path, meta_path


def read_solution(path) -> Solution:
    """Rebuild a :class:`Solution` from a directory written by
    :func:`write_solution` (or from the path of its CSV)."""
    path = Path(path)
    base = path if path.is_dir() else path.parent
    csv_path = base / SOLUTION_CSV if path.is_dir() else path
    meta = json.loads((base / SOLUTION_META).read_text())
    domain = geo.DomainSpec.from_dict(meta["domain"])
    grid = build_grid(domain, float(meta["h"]))
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 5:
        raise ValueError(f"{csv_path}: expected 5 columns, got {data.shape[1]}")
    ij = np.rint((data[:, :2] - grid.origin) / grid.h).astype(int)
    idx = grid.index[ij[:, 0], ij[:, 1]]
    if len(idx) != grid.size or np.any(idx < 0) or len(np.unique(idx)) != grid.size:
        raise ValueError(f"{csv_path}: nodes do not match the rebuilt grid")
    u = np.empty(grid.size)
    u[idx] = data[:, 2]
    cfg = SolverConfig(**{k: v for k, v in meta["solver"].items() if k in SolverConfig.__dataclass_fields__})
    history = [
        StageRecord(t, i, r, tol)
        for t, i, r, tol in zip(meta["tau_schedule"], meta["iterations"], meta["stage_residuals"], meta["stage_tolerances"])
    ]
    return Solution(grid, u, float(meta["tau"]), float(meta["final_residual"]), int(meta["n"]), cfg, history)

"""Policy files and CSV output.

A policy file is JSON with a fixed key order and one line per threshold row,
so files diff cleanly and ``write -> read -> write`` is byte-identical.
Rows of ``tau`` run over ``d = 0..d_max``; columns over ``l = 1..b-1``;
``null`` marks blocks that do not exist (``d < b - l``).
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelParams, state_space
from .solver import ThresholdTable

FORMAT = "aosync-policy"
VERSION = 1
OUTPUT_DIR_ENV = "AOSYNC_OUTPUT_DIR"

SWEEP_COLUMNS = ("p", "policy", "avg_aos", "se_aos", "avg_aoi", "se_aoi", "horizon",
                 "replications", "error")
THRESHOLD_COLUMNS = ("p", "d", "l", "tau")


class PolicyFileError(ValueError):
    pass


@dataclass
class PolicyFile:
    params: ModelParams
    thresholds: ThresholdTable
    method: str
    iterations: int
    residual: float
    converged: bool
    epsilon: float
    values: np.ndarray | None = None
    kind: str = "threshold"


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _num(x) -> str:
    return json.dumps(float(x)) if isinstance(x, (float, np.floating)) else json.dumps(x)


def dumps(pf: PolicyFile) -> str:
    prm = pf.params
    b = prm.b
    header = [
        ("format", FORMAT),
        ("version", VERSION),
        ("kind", pf.kind),
        ("params", {"p": prm.p, "b": b, "d_max": prm.d_max, "alpha": prm.alpha}),
        ("solver", {"method": pf.method, "iterations": int(pf.iterations),
                    "residual": float(pf.residual), "converged": bool(pf.converged),
                    "epsilon": float(pf.epsilon)}),
    ]
    parts = [f"  {json.dumps(k)}: {json.dumps(v)}" for k, v in header]
    rows = []
    for d in range(prm.d_max + 1):
        row = [int(pf.thresholds.tau[d, l]) if d >= b - l else None for l in range(1, b)]
        rows.append("    " + json.dumps(row))
    parts.append('  "tau": [\n' + ",\n".join(rows) + "\n  ]")
    if pf.values is not None:
        vals = [float(v) for v in pf.values]
        lines = ["    " + ", ".join(_num(v) for v in vals[i:i + 8]) for i in range(0, len(vals), 8)]
        parts.append('  "values": [\n' + ",\n".join(lines) + "\n  ]")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def loads(text: str) -> PolicyFile:
    if not text.strip():
        raise PolicyFileError("empty policy file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyFileError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise PolicyFileError("not an aosync policy file")
    if doc.get("version") != VERSION:
        raise PolicyFileError(f"unsupported version {doc.get('version')!r}")
    if doc.get("kind") != "threshold":
        raise PolicyFileError(f"unsupported policy kind {doc.get('kind')!r}")
    try:
        raw = doc["params"]
        params = ModelParams(p=raw["p"], b=raw["b"], d_max=raw["d_max"], alpha=raw["alpha"])
        solver = doc["solver"]
        rows = doc["tau"]
    except (KeyError, TypeError, ValueError) as exc:
        raise PolicyFileError(f"bad header: {exc}") from exc
    b = params.b
    if not isinstance(rows, list) or len(rows) != params.d_max + 1:
        raise PolicyFileError("tau must have d_max + 1 rows")
    tau = np.full((params.d_max + 1, b), -1, dtype=np.int64)
    for d, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != b - 1:
            raise PolicyFileError(f"tau row {d} must have b - 1 entries")
        for l, t in enumerate(row, start=1):
            if d < b - l:
                if t is not None:
                    raise PolicyFileError(f"tau[{d}][l={l}] must be null")
                continue
            if not isinstance(t, int) or isinstance(t, bool) or not 0 <= t <= b:
                raise PolicyFileError(f"tau[{d}][l={l}] must be an integer in [0, b]")
            tau[d, l] = t
    values = None
    if "values" in doc:
        values = np.asarray(doc["values"], dtype=np.float64)
        if values.shape != (len(state_space(b, params.d_max)),):
            raise PolicyFileError("values do not match the state space of params")
    try:
        table = ThresholdTable(tau=tau, params=params, method=str(solver["method"]),
                               iterations=int(solver["iterations"]),
                               residual=float(solver["residual"]))
        return PolicyFile(params=params, thresholds=table, method=table.method,
                          iterations=table.iterations, residual=table.residual,
                          converged=bool(solver["converged"]),
                          epsilon=float(solver["epsilon"]), values=values)
    except (KeyError, TypeError, ValueError) as exc:
        raise PolicyFileError(f"bad solver metadata: {exc}") from exc


def write_policy(pf: PolicyFile, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(pf), encoding="utf-8")
    return path


def read_policy(path) -> PolicyFile:
    return loads(Path(path).read_text(encoding="utf-8"))


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(rows, columns, stream):
    """Write dict rows with a fixed column order; floats use ``repr``."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])


def threshold_rows(table: ThresholdTable):
    p = table.params.p
    for (d, l), t in table.items():
        yield {"p": p, "d": d, "l": l, "tau": t}

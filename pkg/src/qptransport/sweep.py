"""Parameter sweeps over (lambda, Gamma, L) with phase averaging and caching.

Files written for a sweep called ``name`` inside ``output``:

``name.cache.jsonl``
    append-only journal, one completed point per line, keyed by
    :func:`cache_key`; a rerun skips every key already present.
``name.csv``
    final table in ``(lambda, Gamma, L)`` order, columns ``CSV_COLUMNS``.
``name.json``
    sidecar with the config echo, phase-grid convention, sizes and version.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import EmptyRange, QPTransportError
from .models import THETA_GRID_CONVENTION, ChainSpec, DriveSpec, potential_kind, theta_grid
from .solver import SolverOptions, solve_ness

log = logging.getLogger(__name__)

CSV_COLUMNS = ("model", "lambda", "Gamma", "L", "gamma", "f1", "fL", "theta_samples", "J",
               "J_stderr", "kappa", "residual", "solver_method", "error", "wall_time_s")
TIMING_COLUMNS = ("wall_time_s",)


def fibonacci_sizes(min_size: int, max_size: int) -> list:
    """Fibonacci numbers 2, 3, 5, 8, ... lying in ``[min_size, max_size]``."""
    if not 2 <= min_size <= max_size:
        raise ValueError(f"need 2 <= min <= max, got ({min_size}, {max_size})")
    out = []
    a, b = 2, 3
    while a <= max_size:
        if a >= min_size:
            out.append(a)
        a, b = b, a + b
    if not out:
        raise EmptyRange(f"no Fibonacci number in [{min_size}, {max_size}]")
    return out


@dataclass
class SweepConfig:
    model: str
    lambdas: list
    gammas: list
    sizes: list
    theta_samples: int = 100
    gamma: float = 1.0
    f1: float = 1.0
    fL: float = 0.0
    residual_tolerance: float = 1e-9
    homogeneity_tolerance: float = 1e-8
    precision: str = "auto"
    output: str | None = None
    name: str = "sweep"
    workers: int = 1
    use_cache: bool = True

    def __post_init__(self):
        potential_kind(self.model)
        self.model = self.model.strip().lower()
        if self.model == "fib":
            self.model = "fibonacci"
        self.lambdas = [float(x) for x in self.lambdas]
        self.gammas = [float(x) for x in self.gammas]
        self.sizes = [int(x) for x in self.sizes]
        if any(G < 0 for G in self.gammas) or any(lam < 0 for lam in self.lambdas):
            raise ValueError("lambdas and gammas must be non-negative")
        if not (self.lambdas and self.gammas and self.sizes):
            raise ValueError("lambdas, gammas and sizes must all be non-empty")
        if self.sizes != sorted(self.sizes):
            raise ValueError("sizes must be sorted ascending")
        if int(self.theta_samples) < 1:
            raise ValueError("theta_samples must be >= 1")
        self.theta_samples = int(self.theta_samples)
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        SolverOptions(residual_tolerance=self.residual_tolerance,
                      homogeneity_tolerance=self.homogeneity_tolerance, precision=self.precision)
        DriveSpec(self.gamma, self.f1, self.fL, 0.0)

    @property
    def phases(self) -> int:
        return self.theta_samples if self.model == "aah" else 1

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        sizes = data.get("sizes")
        if isinstance(sizes, dict):
            data["sizes"] = fibonacci_sizes(int(sizes["min"]), int(sizes["max"]))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def points(self):
        """Grid points in output order."""
        for lam in sorted(self.lambdas):
            for G in sorted(self.gammas):
                for L in self.sizes:
                    yield {"model": self.model, "lambda": lam, "Gamma": G, "L": L,
                           "gamma": self.gamma, "f1": self.f1, "fL": self.fL,
                           "theta_samples": self.phases,
                           "residual_tolerance": self.residual_tolerance,
                           "homogeneity_tolerance": self.homogeneity_tolerance,
                           "precision": self.precision}


@dataclass
class SweepRecord:
    model: str
    lam: float
    Gamma: float
    L: int
    gamma: float
    f1: float
    fL: float
    theta_samples: int
    J: float
    J_stderr: float
    kappa: float
    residual: float
    solver_method: str
    error: str = ""
    wall_time_s: float = 0.0
    artifact_version: str = field(default=__version__)

    def row(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {c: d[c] for c in CSV_COLUMNS}

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        def num(v):
            return float(v) if v not in ("", None) else math.nan
        return cls(model=row["model"], lam=float(row["lambda"]), Gamma=float(row["Gamma"]),
                   L=int(row["L"]), gamma=float(row["gamma"]), f1=float(row["f1"]),
                   fL=float(row["fL"]), theta_samples=int(row["theta_samples"]),
                   J=num(row["J"]), J_stderr=num(row["J_stderr"]), kappa=num(row["kappa"]),
                   residual=num(row["residual"]), solver_method=row["solver_method"],
                   error=row.get("error") or "", wall_time_s=num(row.get("wall_time_s", 0.0)),
                   artifact_version=row.get("artifact_version", __version__))

    @property
    def ok(self) -> bool:
        return not self.error


def cache_key(point: dict, version: str = __version__) -> str:
    """SHA-256 of the canonical JSON of ``point`` plus the artifact version."""
    payload = json.dumps({"point": point, "version": version}, sort_keys=True,
                         separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def solve_point(point: dict) -> SweepRecord:
    """Phase-averaged NESS for one grid point; solver failures become an error record."""
    start = time.perf_counter()
    opts = SolverOptions(residual_tolerance=point["residual_tolerance"],
                         homogeneity_tolerance=point["homogeneity_tolerance"],
                         precision=point["precision"])
    drive = DriveSpec(point["gamma"], point["f1"], point["fL"], point["Gamma"])
    n = point["theta_samples"]
    thetas = theta_grid(n) if point["model"] == "aah" else [None]
    currents, residual, method, escalated = [], 0.0, "", False
    try:
        for theta in thetas:
            kind = potential_kind(point["model"], theta)
            sol = solve_ness(ChainSpec(point["L"], point["lambda"], kind), drive, opts)
            currents.append(sol.current)
            residual = max(residual, sol.residual)
            method = sol.method
            escalated |= sol.precision_bits > 53
    except (QPTransportError, ValueError) as exc:
        return SweepRecord(point["model"], point["lambda"], point["Gamma"], point["L"],
                           point["gamma"], point["f1"], point["fL"], n, math.nan, math.nan,
                           math.nan, math.nan, "", f"{type(exc).__name__}: {exc}",
                           time.perf_counter() - start)
    J = float(np.mean(currents))
    stderr = float(np.std(currents, ddof=1) / math.sqrt(len(currents))) if len(currents) > 1 else 0.0
    bias = drive.bias
    kappa = J * point["L"] / bias if bias != 0 else math.nan
    if escalated:
        method += "+extended"
    return SweepRecord(point["model"], point["lambda"], point["Gamma"], point["L"], point["gamma"],
                       point["f1"], point["fL"], n, J, stderr, kappa, residual, method, "",
                       time.perf_counter() - start)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, *, include_timing: bool = True) -> str:
    cols = [c for c in CSV_COLUMNS if include_timing or c not in TIMING_COLUMNS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = r.row()
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return [SweepRecord.from_row(row) for row in csv.DictReader(fh)]


def _load_journal(path) -> dict:
    done = {}
    if not os.path.exists(path):
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                log.warning("skipping truncated journal line in %s", path)
                continue
            done[entry["key"]] = SweepRecord.from_row(entry["record"])
    return done


def _journal_line(key, rec):
    row = rec.row()
    row["artifact_version"] = rec.artifact_version
    return json.dumps({"key": key, "record": row}, allow_nan=True) + "\n"


def run_sweep(config: SweepConfig) -> list:
    """Solve every grid point and return records ordered by ``(lambda, Gamma, L)``.

    With ``config.output`` set, completed points are journaled as they finish
    and the final CSV and JSON sidecar are written at the end.
    """
    points = list(config.points())
    keys = [cache_key(p) for p in points]
    journal = None
    done = {}
    if config.output:
        os.makedirs(config.output, exist_ok=True)
        journal = os.path.join(config.output, f"{config.name}.cache.jsonl")
        if config.use_cache:
            done = _load_journal(journal)
        elif os.path.exists(journal):
            os.remove(journal)
    todo = [(k, p) for k, p in zip(keys, points) if k not in done]
    log.info("sweep %s: %d points, %d cached", config.name, len(points), len(points) - len(todo))

    fh = open(journal, "a") if journal else None
    try:
        def collect(key, rec):
            done[key] = rec
            if fh:
                fh.write(_journal_line(key, rec))
                fh.flush()
            status = rec.error or f"J={rec.J:.6g}"
            log.info("lambda=%g Gamma=%g L=%d: %s (%.2fs)", rec.lam, rec.Gamma, rec.L, status,
                     rec.wall_time_s)

        if config.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [(k, pool.submit(solve_point, p)) for k, p in todo]
                for k, fut in futures:
                    collect(k, fut.result())
        else:
            for k, p in todo:
                collect(k, solve_point(p))
    finally:
        if fh:
            fh.close()

    records = [done[k] for k in keys]
    if config.output:
        write_outputs(config, records)
    return records


def write_outputs(config: SweepConfig, records) -> tuple:
    csv_path = os.path.join(config.output, f"{config.name}.csv")
    meta_path = os.path.join(config.output, f"{config.name}.json")
    with open(csv_path, "w", newline="") as fh:
        fh.write(records_to_csv(records))
    meta = {
        "config": config.to_dict(),
        "theta_grid": THETA_GRID_CONVENTION,
        "sizes": list(config.sizes),
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "records": len(records),
        "errors": sum(1 for r in records if r.error),
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return csv_path, meta_path


def series(records, lam, Gamma=None, *, by="L", value="J"):
    """Pull a ScalingSeries out of sweep records (error rows are skipped)."""
    from .analysis import ScalingSeries

    rows = [r for r in records if r.ok and r.lam == lam and (Gamma is None or r.Gamma == Gamma)]
    pairs = [(getattr(r, by), getattr(r, value)) for r in rows]
    return ScalingSeries.from_pairs(pairs, lam=lam, Gamma=Gamma, value=value)


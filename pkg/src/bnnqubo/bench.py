"""Benchmark suites producing CSV records and a JSON summary.

Seeds: with suite seed ``s``, instance ``k`` uses
``sample_instances(..., seed=s)[k]`` for its data and ``s * 1000 + k``
for the annealer and the embedding search.  Timing fields are the only
nondeterministic output.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

from .bnn import BnnArchitecture, LabeledDataset, distance, enumerate_optimal_weights
from .builder import BuildOptions, build_training_qubo, decode_weights
from .dataio import SparseBinaryDataset, sample_instances, synthetic_adult_like
from .embedding import HardwareGraph, chimera_graph, embed_qubo, find_embedding, unembed
from .solvers import SaSchedule, solve_sa

__all__ = [
    "SCHEMA",
    "BenchRecord",
    "write_records",
    "read_records",
    "run_type_suite",
    "SCALING_ARCHITECTURES",
    "scaling_dataset",
    "run_scaling_suite",
    "log_linear_fit",
    "summarize",
]

SCHEMA = "bnnqubo.bench/1"


@dataclass
class BenchRecord:
    suite: str
    instance: int
    formulation: str
    solver: str
    runtime_ms: float
    best_energy: float
    distance: int
    seed: int
    num_vars: int
    num_weights: int
    chain_break_fraction: float | None = None
    schema: str = SCHEMA

    def __post_init__(self):
        if self.formulation not in ("qubo", "equbo"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.solver not in ("exhaustive", "sa", "oracle"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.distance < 0:
            raise ValueError("distance must be non-negative")
        if not self.runtime_ms > 0:
            raise ValueError("runtime must be positive")


_FIELDS = [f.name for f in fields(BenchRecord)]
_INT_FIELDS = {"instance", "distance", "seed", "num_vars", "num_weights"}


def write_records(records, path) -> None:
    """Append ``records`` to the CSV at ``path``; the header is written once."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=_FIELDS)
        if new:
            w.writeheader()
        for r in records:
            row = asdict(r)
            row["best_energy"] = repr(r.best_energy)
            row["runtime_ms"] = repr(r.runtime_ms)
            if r.chain_break_fraction is None:
                row["chain_break_fraction"] = ""
            else:
                row["chain_break_fraction"] = repr(r.chain_break_fraction)
            w.writerow(row)


def read_records(source) -> list[BenchRecord]:
    """Parse a CSV written by :func:`write_records` (a path or the text itself)."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(source)
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        if row["schema"] != SCHEMA:
            raise ValueError(f"unsupported bench schema {row['schema']!r}")
        kw = {}
        for name in _FIELDS:
            v = row[name]
            if name in _INT_FIELDS:
                kw[name] = int(v)
            elif name in ("runtime_ms", "best_energy"):
                kw[name] = float(v)
            elif name == "chain_break_fraction":
                kw[name] = float(v) if v != "" else None
            else:
                kw[name] = v
        out.append(BenchRecord(**kw))
    return out


def _ms(t0: float) -> float:
    # perf_counter can tick 0 on a very fast step; runtimes must stay positive
    return max((time.perf_counter() - t0) * 1e3, 1e-6)


def run_type_suite(
    points: int,
    seed: int = 0,
    count: int = 20,
    data: SparseBinaryDataset | None = None,
    arch: BnnArchitecture | None = None,
    penalty: int = 50,
    schedule: SaSchedule | None = None,
    hardware: HardwareGraph | None = None,
    embed: bool = True,
    suite: str | None = None,
) -> list[BenchRecord]:
    """Oracle, SA on the QUBO and SA on the embedded QUBO for each sampled instance.

    ``points=4`` gives Type-A instances, ``points=8`` Type-B.  ``data``
    defaults to :func:`synthetic_adult_like`.
    """
    data = data if data is not None else synthetic_adult_like()
    arch = arch or BnnArchitecture([3, 3, 1])
    schedule = schedule or SaSchedule()
    hardware = hardware if hardware is not None else chimera_graph(16)
    suite = suite or {4: "typeA", 8: "typeB"}.get(points, f"D{points}")
    records = []
    for inst in sample_instances(data, arch.input_size, points, count, seed):
        k = inst.index
        ds = inst.data
        run_seed = seed * 1000 + k
        q, reg = build_training_qubo(arch, ds, BuildOptions(penalty=penalty))
        common = dict(suite=suite, instance=k, seed=run_seed, num_weights=arch.num_weights)

        t0 = time.perf_counter()
        oracle = enumerate_optimal_weights(arch, ds)
        records.append(BenchRecord(formulation="qubo", solver="oracle", runtime_ms=_ms(t0),
                                   best_energy=oracle.min_loss, distance=0,
                                   num_vars=arch.num_weights, **common))

        sched = SaSchedule(schedule.sweeps, schedule.restarts, schedule.t_start, schedule.t_end, run_seed)
        t0 = time.perf_counter()
        ss = solve_sa(q, sched)
        rt = _ms(t0)
        dist = distance(decode_weights(ss.first.bits, reg), ds, oracle.min_loss)
        records.append(BenchRecord(formulation="qubo", solver="sa", runtime_ms=rt,
                                   best_energy=ss.first.energy, distance=dist,
                                   num_vars=q.num_vars, **common))
        if not embed:
            continue
        emb = find_embedding(q, hardware, seed=run_seed)
        eq = embed_qubo(q, emb, hardware)
        t0 = time.perf_counter()
        ess = solve_sa(eq.qubo, sched)
        rt = _ms(t0)
        bits, broken = unembed(ess.first.bits, emb, q.num_vars)
        dist = distance(decode_weights(bits, reg), ds, oracle.min_loss)
        records.append(BenchRecord(formulation="equbo", solver="sa", runtime_ms=rt,
                                   best_energy=ess.first.energy, distance=dist,
                                   num_vars=eq.qubo.num_vars, chain_break_fraction=broken, **common))
    return records


# Architectures with 6, 9, ..., 24 weights.
SCALING_ARCHITECTURES = {
    6: (1, 3, 1),
    9: (3, 1, 3, 1),
    12: (3, 3, 1),
    15: (1, 3, 3, 1),
    18: (3, 3, 1, 3, 1),
    21: (3, 3, 3, 1),
    24: (7, 3, 1),
}


def scaling_dataset(arch: BnnArchitecture, num_points: int, rng: np.random.Generator) -> LabeledDataset:
    """Random spin data whose first two rows are ``x`` and ``-x`` with one label.

    Without biases the network is odd (``f(-x) = -f(x)``), so that pair always
    costs one error: the optimum is positive and the oracle cannot stop early.
    """
    x = rng.choice(np.array([-1, 1], dtype=np.int8), size=(num_points, arch.input_size))
    y = rng.choice(np.array([-1, 1], dtype=np.int8), size=num_points)
    x[1] = -x[0]
    y[1] = y[0]
    return LabeledDataset(x, y)


def run_scaling_suite(
    seed: int = 0,
    weight_counts=tuple(SCALING_ARCHITECTURES),
    num_points: int = 8,
    repeats: int = 3,
) -> list[BenchRecord]:
    """Oracle runtime against weight count; each runtime is the minimum of ``repeats``."""
    rng = np.random.default_rng(seed)
    records = []
    for n_w in weight_counts:
        arch = BnnArchitecture(SCALING_ARCHITECTURES[n_w])
        ds = scaling_dataset(arch, num_points, rng)
        best_ms = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            res = enumerate_optimal_weights(arch, ds)
            best_ms = min(best_ms, _ms(t0))
        records.append(BenchRecord(suite="scaling", instance=n_w, formulation="qubo", solver="oracle",
                                   runtime_ms=best_ms, best_energy=res.min_loss, distance=0,
                                   seed=seed, num_vars=n_w, num_weights=n_w))
    return records


def log_linear_fit(x, runtime_ms) -> dict:
    """Least-squares line through ``(x, log2 runtime)``."""
    fit = stats.linregress(np.asarray(x, dtype=float), np.log2(np.asarray(runtime_ms, dtype=float)))
    return {"slope": float(fit.slope), "intercept": float(fit.intercept), "r2": float(fit.rvalue ** 2)}


def summarize(records: list[BenchRecord], bins: int = 10) -> dict:
    """Histograms of log10 runtime and of distance per (formulation, solver)."""
    groups: dict[str, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault(f"{r.formulation}/{r.solver}", []).append(r)
    out = {"schema": SCHEMA, "groups": {}}
    for name, rs in sorted(groups.items()):
        logt = np.log10([r.runtime_ms for r in rs])
        counts, edges = np.histogram(logt, bins=bins)
        dists = [r.distance for r in rs]
        dcounts = np.bincount(dists)
        out["groups"][name] = {
            "count": len(rs),
            "log10_runtime_ms": {"counts": counts.tolist(), "edges": edges.tolist()},
            "distance": {str(d): int(c) for d, c in enumerate(dcounts) if c},
            "zero_distance": int(sum(d == 0 for d in dists)),
        }
    scaling = [r for r in records if r.suite == "scaling"]
    if len(scaling) >= 2:
        out["scaling_fit"] = log_linear_fit([r.num_vars for r in scaling], [r.runtime_ms for r in scaling])
    return out

"""Benchmark grids over (dataset, method, init seed, EM seed) and rank counting.

Seeds
-----
Every random stream is seeded from a stable 64-bit hash of its cell key::

    derive_seed(*parts) = int.from_bytes(blake2b("\\x1f".join(map(str, parts)),
                                                 digest_size=8), "little")

The initializer of cell ``(dataset, method, i)`` uses
``derive_seed(base, dataset, method.label, i, "init")`` and is shared by all
EM runs of that cell; EM run ``j`` uses
``derive_seed(base, dataset, method.label, i, j, "em")``. Results therefore
do not depend on execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .em import EmConfig, em_run
from .init import MethodSpec, run_method

CRITERIA = ("mean_initial", "mean_final", "var_initial", "var_final")

RECORD_COLUMNS = (
    "dataset_id", "method", "alpha", "s", "init_seed", "em_seed",
    "nll_initial", "nll_final", "resamples", "mixes", "keeps", "millis",
)


def derive_seed(*parts) -> int:
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RunRecord:
    dataset_id: str
    method: MethodSpec
    init_seed: int  # index of the init stream within the cell
    em_seed: int  # index of the EM stream
    nll_initial: float
    nll_final: float
    resamples: int = 0
    mixes: int = 0
    keeps: int = 0
    millis: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.nll_initial) and math.isfinite(self.nll_final)):
            raise ValueError("negative log-likelihoods must be finite")

    @property
    def clean(self) -> bool:
        return self.resamples == self.mixes == self.keeps == 0

    def key(self) -> tuple:
        return (self.dataset_id, self.method.label, self.init_seed, self.em_seed)


@dataclass(frozen=True)
class CellFailure:
    dataset_id: str
    method: str
    init_seed: int
    error: str


@dataclass
class GridResult:
    records: list[RunRecord]
    failures: list[CellFailure] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures


# ---------------------------------------------------------------------------
# grid execution

_WORKER_DATA: dict[str, np.ndarray] = {}


def _set_worker_data(data: dict[str, np.ndarray]) -> None:
    global _WORKER_DATA
    _WORKER_DATA = data


def _run_cell(dataset_id: str, X: np.ndarray, method: MethodSpec, K: int, init_index: int,
              em_seeds: int, cfg: EmConfig, base_seed: int, timing: bool):
    t0 = time.perf_counter()
    rng = np.random.default_rng(derive_seed(base_seed, dataset_id, method.label, init_index, "init"))
    try:
        theta0 = run_method(X, K, method, rng)
    except ValueError as exc:
        return [], [CellFailure(dataset_id, method.label, init_index, str(exc))]
    init_ms = (time.perf_counter() - t0) * 1000.0
    records = []
    for j in range(em_seeds):
        t1 = time.perf_counter()
        em_rng = np.random.default_rng(
            derive_seed(base_seed, dataset_id, method.label, init_index, j, "em"))
        _, trace = em_run(X, theta0, cfg, em_rng)
        ms = init_ms + (time.perf_counter() - t1) * 1000.0
        records.append(RunRecord(
            dataset_id, method, init_index, j,
            nll_initial=-trace.initial_log_likelihood,
            nll_final=-trace.log_likelihoods[-1],
            resamples=trace.resample_events,
            mixes=trace.covariance_mix_events,
            keeps=trace.covariance_keep_events,
            millis=int(round(ms)) if timing else 0,
        ))
    return records, []


def _run_cell_worker(dataset_id, method, K, init_index, em_seeds, cfg, base_seed, timing):
    return _run_cell(dataset_id, _WORKER_DATA[dataset_id], method, K, init_index,
                     em_seeds, cfg, base_seed, timing)


def run_grid(datasets: Mapping[str, np.ndarray] | Sequence[tuple[str, np.ndarray]],
             methods: Sequence[MethodSpec], K: int, init_seeds: int = 30, em_seeds: int = 3,
             cfg: EmConfig = EmConfig(), base_seed: int = 0, jobs: int = 1,
             timing: bool = True) -> GridResult:
    """Initialize and fit every (dataset, method, init seed, EM seed) cell.

    Initializer argument errors mark the whole init cell as failed; failed
    cells produce no records. Records come back sorted by cell key in the
    order the datasets and methods were given.
    """
    items = list(datasets.items()) if isinstance(datasets, Mapping) else list(datasets)
    if not items or not methods:
        raise ValueError("need at least one dataset and one method")
    if init_seeds < 1 or em_seeds < 1:
        raise ValueError("seed counts must be >= 1")
    data = {ds_id: np.ascontiguousarray(X, dtype=np.float64) for ds_id, X in items}
    if len(data) != len(items):
        raise ValueError("dataset ids must be unique")
    tasks = [(ds_id, m, i) for ds_id, _ in items for m in methods for i in range(init_seeds)]
    if jobs <= 1:
        results = [_run_cell(ds, data[ds], m, K, i, em_seeds, cfg, base_seed, timing)
                   for ds, m, i in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_set_worker_data,
                                 initargs=(data,)) as pool:
            futures = [pool.submit(_run_cell_worker, ds, m, K, i, em_seeds, cfg, base_seed, timing)
                       for ds, m, i in tasks]
            results = [f.result() for f in futures]
    ds_order = {ds_id: n for n, (ds_id, _) in enumerate(items)}
    m_order = {m.label: n for n, m in enumerate(methods)}
    records = [r for recs, _ in results for r in recs]
    failures = [f for _, fails in results for f in fails]
    records.sort(key=lambda r: (ds_order[r.dataset_id], m_order[r.method.label], r.init_seed, r.em_seed))
    failures.sort(key=lambda f: (ds_order[f.dataset_id], m_order[f.method], f.init_seed))
    return GridResult(records, failures)


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class Summary:
    n_runs: int
    mean_initial: float
    var_initial: float
    mean_final: float
    var_final: float

    @property
    def single(self) -> bool:
        """True when a variance was set to 0 because only one value was available."""
        return self.n_runs < 2

    def value(self, criterion: str) -> float:
        if criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {criterion!r}")
        return getattr(self, criterion)


def _mean_var(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, math.fsum((v - mean) ** 2 for v in values) / (n - 1)


def summarize(records: Iterable[RunRecord], best_of_em: bool = False) -> dict[tuple[str, str], Summary]:
    """Mean and unbiased variance of the NLL per (dataset, method label).

    Final NLLs pool every (init, EM) pair, or with ``best_of_em`` only the
    best EM run per init seed. Initial NLLs count once per init seed since
    all EM runs of a seed share the same starting point.
    """
    cells: dict[tuple[str, str], dict[int, list[RunRecord]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        cells[(r.dataset_id, r.method.label)][r.init_seed].append(r)
    out = {}
    for key in sorted(cells):
        by_init = cells[key]
        initial = [min(rs, key=lambda r: r.em_seed).nll_initial for _, rs in sorted(by_init.items())]
        if best_of_em:
            final = [min(r.nll_final for r in rs) for _, rs in sorted(by_init.items())]
        else:
            final = sorted(r.nll_final for rs in by_init.values() for r in rs)
        mi, vi = _mean_var(sorted(initial))
        mf, vf = _mean_var(sorted(final))
        out[key] = Summary(len(final), mi, vi, mf, vf)
    return out


@dataclass
class RankTable:
    """How often each method reached rank 1..M under one criterion."""

    criterion: str
    counts: dict[str, list[int]]
    n_datasets: int

    @property
    def methods(self) -> list[str]:
        return list(self.counts)

    def __add__(self, other: "RankTable") -> "RankTable":
        if self.criterion != other.criterion or set(self.counts) != set(other.counts):
            raise ValueError("can only add rank tables over the same criterion and methods")
        return RankTable(
            self.criterion,
            {m: [a + b for a, b in zip(self.counts[m], other.counts[m])] for m in self.counts},
            self.n_datasets + other.n_datasets,
        )


def _datasets_and_methods(summaries: Mapping[tuple[str, str], Summary]) -> tuple[list[str], list[str]]:
    datasets, methods = [], []
    for ds, m in summaries:
        if ds not in datasets:
            datasets.append(ds)
        if m not in methods:
            methods.append(m)
    missing = [(ds, m) for ds in datasets for m in methods if (ds, m) not in summaries]
    if missing:
        raise ValueError(f"summaries missing for {missing[:3]}{'...' if len(missing) > 3 else ''}")
    return datasets, methods


def dataset_ranks(summaries: Mapping[tuple[str, str], Summary], criterion: str) -> dict[str, dict[str, int]]:
    """Competition ranks (1224 style, lower value is better) per dataset."""
    datasets, methods = _datasets_and_methods(summaries)
    out = {}
    for ds in datasets:
        vals = {m: summaries[(ds, m)].value(criterion) for m in methods}
        out[ds] = {m: 1 + sum(v < vals[m] for v in vals.values()) for m in methods}
    return out


def rank_methods(summaries: Mapping[tuple[str, str], Summary], criterion: str) -> RankTable:
    ranks = dataset_ranks(summaries, criterion)
    _, methods = _datasets_and_methods(summaries)
    counts = {m: [0] * len(methods) for m in methods}
    for per_ds in ranks.values():
        for m, r in per_ds.items():
            counts[m][r - 1] += 1
    return RankTable(criterion, counts, len(ranks))


def rank_all(summaries: Mapping[tuple[str, str], Summary]) -> list[RankTable]:
    return [rank_methods(summaries, c) for c in CRITERIA]


# ---------------------------------------------------------------------------
# reports


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def record_row(r: RunRecord) -> list[str]:
    return [
        r.dataset_id, r.method.kind.value, _fmt(r.method.alpha), _fmt(r.method.s),
        str(r.init_seed), str(r.em_seed), repr(r.nll_initial), repr(r.nll_final),
        str(r.resamples), str(r.mixes), str(r.keeps), str(r.millis),
    ]


def write_records_csv(path, records: Iterable[RunRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(record_row(r))


def read_records_csv(path) -> list[RunRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            method = MethodSpec(
                row["method"],
                alpha=float(row["alpha"]) if row["alpha"] else None,
                s=float(row["s"]) if row["s"] else None,
            )
            out.append(RunRecord(
                row["dataset_id"], method, int(row["init_seed"]), int(row["em_seed"]),
                float(row["nll_initial"]), float(row["nll_final"]),
                int(row["resamples"]), int(row["mixes"]), int(row["keeps"]), int(row["millis"]),
            ))
    return out


def write_rank_tables_csv(path, tables: Sequence[RankTable]) -> None:
    width = max((len(t.counts) for t in tables), default=0)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "criterion"] + [f"rank_{i}" for i in range(1, width + 1)])
        for t in tables:
            for m, counts in t.counts.items():
                w.writerow([m, t.criterion] + [str(c) for c in counts])


def write_summaries_csv(path, summaries: Mapping[tuple[str, str], Summary]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset_id", "method", "n_runs", *CRITERIA])
        for (ds, m), s in summaries.items():
            w.writerow([ds, m, s.n_runs] + [repr(s.value(c)) for c in CRITERIA])


def export_report(tables: Sequence[RankTable], records: Sequence[RunRecord], out_dir,
                  fmt: str = "csv", failures: Sequence[CellFailure] = ()) -> list[Path]:
    """Write rank tables and raw records to ``out_dir``.

    ``fmt="csv"`` writes ``records.csv`` and ``ranks.csv``; ``fmt="json"``
    writes a single ``report.json``. Both also get ``status.json`` saying
    whether any cells failed.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if fmt == "csv":
            written.append(out_dir / "records.csv")
            write_records_csv(written[-1], records)
            written.append(out_dir / "ranks.csv")
            write_rank_tables_csv(written[-1], tables)
        elif fmt == "json":
            obj = {
                "records": [dict(zip(RECORD_COLUMNS, record_row(r))) for r in records],
                "rank_tables": [asdict(t) for t in tables],
            }
            written.append(out_dir / "report.json")
            written[-1].write_text(json.dumps(obj, indent=1) + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        status = {
            "status": "partial" if failures else "complete",
            "failures": [asdict(f) for f in failures],
        }
        written.append(out_dir / "status.json")
        written[-1].write_text(json.dumps(status, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc.strerror or exc}") from exc
    return written

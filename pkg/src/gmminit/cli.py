"""Command-line interface: ``gmminit {generate,fit,bench,rank}``.

Every command prints its resolved configuration (seed included) as one JSON
line before doing any work.

Bench manifest (JSON)::

    {
      "k": 10,                       # default K, datasets may override
      "datasets": [{"id": "a", "path": "a.csv", "label_columns": [3], "k": 5}, ...],
      "methods": ["Uniform", "Kmeans++", "Adaptive(0.5)", ...],   # default: all eight
      "init_seeds": 30, "em_seeds": 3, "rounds": 50, "seed": 0, "best_of_em": false
    }

Relative dataset paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .datagen import GeneratorSpec, eccentricity, generate_dataset, separation
from .em import EmConfig, em_run
from .init import STANDARD_METHODS, MethodKind, MethodSpec, run_method
from .io import CsvFormatError, read_dataset_csv, write_dataset_csv, write_gmm_json

METHOD_CHOICES = {
    "uniform": MethodKind.UNIFORM,
    "kmeanspp": MethodKind.KMEANSPP,
    "gonzalez": MethodKind.GONZALEZ,
    "adaptive": MethodKind.ADAPTIVE,
    "gonzalez-for-gmm": MethodKind.GONZALEZ_FOR_GMM,
    "kwedlos-gonzalez": MethodKind.KWEDLOS_GONZALEZ,
    "agglomerative": MethodKind.AGGLOMERATIVE,
}


class CliError(Exception):
    """Runtime failure reported to the user with exit code 1."""


def _announce(command: str, config: dict) -> None:
    print(f"config: {json.dumps({'command': command, **config}, sort_keys=True)}", flush=True)


def _label_columns(values: list[str] | None) -> list:
    out = []
    for v in values or ():
        out.append(int(v) if v.lstrip("-").isdigit() else v)
    return out


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args, parser) -> int:
    if not args.sep > 0:
        parser.error("--sep must be positive")
    if not 0 <= args.noise < 1:
        parser.error("--noise must lie in [0, 1)")
    ecc = tuple(args.ecc_range) if args.ecc_range else args.ecc
    try:
        spec = GeneratorSpec(
            k=args.k, d=args.d, separation=args.sep, weight_exponent=args.weights_exp,
            eccentricity=ecc, size_mode=args.size, side=args.side, n_points=args.n,
            noise_fraction=args.noise, seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
    out = Path(args.out)
    _announce("generate", {
        "k": spec.k, "d": spec.d, "separation": spec.separation,
        "weight_exponent": spec.weight_exponent, "eccentricity": spec.eccentricity,
        "size_mode": spec.size_mode, "side": spec.cube_side, "n_points": spec.n_points,
        "noise_fraction": spec.noise_fraction, "seed": spec.seed, "out": str(out),
    })
    ds = generate_dataset(spec)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(out / f"{args.name}.csv", ds.data, ds.labels if args.labels else None)
    write_gmm_json(out / f"{args.name}.truth.json", ds.truth)
    n_noise = ds.n_noise
    print(f"rows: {ds.data.shape[0]} ({ds.data.shape[0] - n_noise} signal, {n_noise} noise)")
    if ds.truth.k >= 2:
        print(f"separation: {separation(ds.truth):.12g}")
    eccs = ", ".join(f"{eccentricity(c.covariance):.6g}" for c in ds.truth)
    print(f"eccentricities: {eccs}")
    return 0


# ---------------------------------------------------------------------------
# fit


def _method_from_args(args) -> MethodSpec:
    kind = METHOD_CHOICES[args.method]
    if kind is MethodKind.ADAPTIVE:
        return MethodSpec(kind, alpha=args.alpha)
    if kind in (MethodKind.GONZALEZ_FOR_GMM, MethodKind.KWEDLOS_GONZALEZ, MethodKind.AGGLOMERATIVE):
        return MethodSpec(kind, s=args.s)
    return MethodSpec(kind)


def cmd_fit(args, parser) -> int:
    try:
        method = _method_from_args(args)
        cfg = EmConfig(rounds=args.rounds, seed=args.em_seed)
    except ValueError as exc:
        parser.error(str(exc))
    out = Path(args.out)
    _announce("fit", {
        "dataset": str(args.dataset), "method": method.label, "k": args.k,
        "seed": args.seed, "em_seed": args.em_seed, "rounds": args.rounds, "out": str(out),
        "label_columns": args.label_columns or [],
    })
    try:
        X, _, _ = read_dataset_csv(args.dataset, _label_columns(args.label_columns))
    except (CsvFormatError, ValueError) as exc:
        raise CliError(f"cannot parse dataset: {exc}") from None
    except OSError as exc:
        raise CliError(f"cannot read dataset {args.dataset}: {exc.strerror}") from None
    if args.k > X.shape[0]:
        parser.error(f"--k {args.k} exceeds the number of points ({X.shape[0]})")
    try:
        theta0 = run_method(X, args.k, method, np.random.default_rng(args.seed))
    except ValueError as exc:
        parser.error(str(exc))
    theta, trace = em_run(X, theta0, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_gmm_json(out / "model.json", theta, {
        "method": method.label, "nll_initial": -trace.initial_log_likelihood,
        "nll_final": -trace.log_likelihoods[-1],
    })
    with (out / "trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "log_likelihood", "nll"])
        for i, ll in enumerate(trace.log_likelihoods, 1):
            w.writerow([i, repr(ll), repr(-ll)])
    print(f"initial NLL: {-trace.initial_log_likelihood:.10g}")
    print(f"final NLL:   {-trace.log_likelihoods[-1]:.10g}")
    print(f"degeneracy events: resample={trace.resample_events} "
          f"mix={trace.covariance_mix_events} keep={trace.covariance_keep_events}")
    return 0


# ---------------------------------------------------------------------------
# bench / rank


def load_manifest(path) -> dict:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise CliError(f"cannot read manifest {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"manifest {path} is not valid JSON: {exc}") from None
    if not obj.get("datasets"):
        raise CliError(f"manifest {path} lists no datasets")
    base = path.parent
    datasets = []
    for n, entry in enumerate(obj["datasets"]):
        if isinstance(entry, str):
            entry = {"path": entry}
        p = Path(entry["path"])
        p = p if p.is_absolute() else base / p
        ds_id = str(entry.get("id", p.stem))
        k = entry.get("k", obj.get("k"))
        if k is None:
            raise CliError(f"dataset entry {n} ({ds_id}) has no K and the manifest sets none")
        datasets.append({"id": ds_id, "path": str(p), "k": int(k),
                         "label_columns": entry.get("label_columns", [])})
    methods = [m.label for m in STANDARD_METHODS]
    if obj.get("methods"):
        methods = [MethodSpec.parse(m).label for m in obj["methods"]]
    return {
        "datasets": datasets,
        "methods": methods,
        "init_seeds": int(obj.get("init_seeds", 30)),
        "em_seeds": int(obj.get("em_seeds", 3)),
        "rounds": int(obj.get("rounds", 50)),
        "seed": int(obj.get("seed", 0)),
        "best_of_em": bool(obj.get("best_of_em", False)),
    }


def format_rank_table(table: bench.RankTable) -> str:
    width = max(len(m) for m in table.counts)
    m = len(table.counts)
    lines = [f"[{table.criterion}] over {table.n_datasets} dataset(s)",
             " " * width + "".join(f"{'#' + str(i):>6}" for i in range(1, m + 1))]
    for name, counts in table.counts.items():
        lines.append(name.ljust(width) + "".join(f"{(c if c else ''):>6}" for c in counts))
    return "\n".join(lines)


def _print_tables(tables) -> None:
    for t in tables:
        print(format_rank_table(t))


def cmd_bench(args, parser) -> int:
    manifest = load_manifest(args.manifest)
    if args.seed is not None:
        manifest["seed"] = args.seed
    if args.best_of_em:
        manifest["best_of_em"] = True
    out = Path(args.out)
    _announce("bench", {**manifest, "jobs": args.jobs, "timing": not args.no_timing,
                        "format": args.format, "out": str(out)})
    for entry in manifest["datasets"]:
        if not Path(entry["path"]).is_file():
            raise CliError(f"dataset {entry['id']!r}: file not found: {entry['path']}")
    methods = [MethodSpec.parse(m) for m in manifest["methods"]]
    cfg = EmConfig(rounds=manifest["rounds"])
    records, failures = [], []
    for entry in manifest["datasets"]:
        try:
            X, _, _ = read_dataset_csv(entry["path"], entry["label_columns"])
        except (CsvFormatError, ValueError) as exc:
            raise CliError(f"dataset {entry['id']!r}: {exc}") from None
        result = bench.run_grid([(entry["id"], X)], methods, entry["k"],
                                init_seeds=manifest["init_seeds"], em_seeds=manifest["em_seeds"],
                                cfg=cfg, base_seed=manifest["seed"], jobs=args.jobs,
                                timing=not args.no_timing)
        records.extend(result.records)
        failures.extend(result.failures)
    # rank only datasets on which every method produced at least one record
    present = {(r.dataset_id, r.method.label) for r in records}
    rankable = {e["id"] for e in manifest["datasets"]
                if all((e["id"], m.label) in present for m in methods)}
    summaries = bench.summarize([r for r in records if r.dataset_id in rankable],
                                best_of_em=manifest["best_of_em"])
    tables = bench.rank_all(summaries) if summaries else []
    bench.export_report(tables, records, out, fmt=args.format, failures=failures)
    if summaries:
        bench.write_summaries_csv(out / "summary.csv", summaries)
    _print_tables(tables)
    if failures:
        print(f"PARTIAL: {len(failures)} initialization cell(s) failed; see status.json", file=sys.stderr)
        return 1
    return 0


def cmd_rank(args, parser) -> int:
    out = Path(args.out)
    _announce("rank", {"records": str(args.records), "best_of_em": args.best_of_em, "out": str(out)})
    try:
        records = bench.read_records_csv(args.records)
    except OSError as exc:
        raise CliError(f"cannot read {args.records}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise CliError(f"malformed records file {args.records}: {exc}") from None
    out.mkdir(parents=True, exist_ok=True)
    summaries = bench.summarize(records, best_of_em=args.best_of_em)
    try:
        tables = bench.rank_all(summaries) if summaries else []
    except ValueError as exc:
        raise CliError(str(exc)) from None
    bench.write_rank_tables_csv(out / "ranks.csv", tables)
    if summaries:
        bench.write_summaries_csv(out / "summary.csv", summaries)
    _print_tables(tables)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmminit", description=(
        "Initialize and fit Gaussian mixtures with EM, and benchmark initializers."))
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic mixture dataset")
    g.add_argument("--k", type=int, default=10, help="number of components")
    g.add_argument("--d", type=int, default=2, help="dimension")
    g.add_argument("--n", type=int, default=10_000, help="total number of points")
    g.add_argument("--sep", type=float, default=2.0, help="target separation (> 0)")
    g.add_argument("--weights-exp", type=float, default=0.0,
                   help="weight exponent c_w; weights proportional to 2^(c_w i)")
    g.add_argument("--ecc", type=float, default=1.0, help="fixed eccentricity (>= 1)")
    g.add_argument("--ecc-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="draw each component's eccentricity uniformly from [LO, HI]")
    g.add_argument("--size", choices=("constant", "different"), default="constant")
    g.add_argument("--side", type=float, default=None, help="side of the mean cube")
    g.add_argument("--noise", type=float, default=0.0, help="fraction of uniform noise points")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--labels", action="store_true", help="append the component label column")
    g.add_argument("--name", default="data", help="output file stem")
    g.add_argument("--out", default=".", help="output directory")

    f = sub.add_parser("fit", help="initialize and run EM on a CSV dataset")
    f.add_argument("dataset", type=Path)
    f.add_argument("--method", choices=sorted(METHOD_CHOICES), default="kmeanspp")
    f.add_argument("--alpha", type=float, default=0.5, help="Adaptive mixing parameter")
    f.add_argument("--s", type=float, default=0.1, help="sample fraction for sampled methods")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--seed", type=int, default=0, help="initialization seed")
    f.add_argument("--em-seed", type=int, default=0, help="seed of EM's degeneracy handling")
    f.add_argument("--rounds", type=int, default=50)
    f.add_argument("--label-columns", nargs="*", help="columns to drop (index or header name)")
    f.add_argument("--out", default=".", help="output directory")

    b = sub.add_parser("bench", help="run a benchmark grid described by a JSON manifest")
    b.add_argument("manifest", type=Path)
    b.add_argument("--out", default="bench_out")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--seed", type=int, default=None, help="override the manifest seed")
    b.add_argument("--best-of-em", action="store_true",
                   help="use the best EM run per init seed instead of pooling")
    b.add_argument("--no-timing", action="store_true",
                   help="write millis=0 so reports are byte-reproducible")
    b.add_argument("--format", choices=("csv", "json"), default="csv")

    r = sub.add_parser("rank", help="re-aggregate an existing records CSV")
    r.add_argument("records", type=Path)
    r.add_argument("--out", default=".")
    r.add_argument("--best-of-em", action="store_true")
    return parser


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "bench": cmd_bench, "rank": cmd_rank}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line harness: dataset generation, evaluation, benchmarks.

Subcommands::

    olpkit generate            label random scenarios with optimal precoders
    olpkit eval                spectral-efficiency metrics and CDF data
    olpkit bench               wall-clock stage timings per precoder
    olpkit verify              re-check stored-dataset invariants
    olpkit train-export-check  validate externally trained weights against
                               this inference engine

``--jobs N`` (or the ``OLPKIT_THREADS`` environment variable) enables
sample-level parallelism where it applies; outputs are written once at the
end from state aggregated in sample order, so results are independent of
the worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import maximum_ratio, zero_forcing
from .channel_sim import EnvironmentKind, EnvironmentSpec, environment_preset, generate_scenario
from .dataset_io import (
    DatasetIOError,
    DatasetManifest,
    SampleRecord,
    read_dataset,
    read_weights,
    record_channel,
    validate_record,
    write_dataset,
)
from .gnn_inference import apply_network, forward
from .graph_builder import build_graph, deprocess_and_postprocess, input_features
from .metrics import build_report, cdf_rows
from .olp_socp import OlpSolverError, SolverConfig, constraint_residual, solve_olp
from .system_model import ChannelMatrix, Precoder, RankDeficientChannelError, SystemConfig, min_sinr, sinr

PRECODER_NAMES = ("olp", "zf", "mr", "gnn")


def _resolve_jobs(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("OLPKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            print(f"warning: ignoring non-integer OLPKIT_THREADS={env!r}", file=sys.stderr)
    return 1


def _load_environment(spec: str, rho_d: float | None) -> EnvironmentSpec:
    """Named preset (los60 / urban2 / rural450) or a path to a JSON spec."""
    try:
        return environment_preset(EnvironmentKind(spec), rho_d=rho_d)
    except ValueError:
        pass
    path = Path(spec)
    if not path.exists():
        names = ", ".join(k.value for k in EnvironmentKind)
        raise SystemExit(f"error: --env {spec!r} is neither a preset ({names}) nor a JSON file")
    with open(path, encoding="utf-8") as fh:
        env = EnvironmentSpec.from_json_dict(json.load(fh))
    if rho_d is not None:
        data = env.to_json_dict()
        data["rho_d"] = rho_d
        env = EnvironmentSpec.from_json_dict(data)
    return env


def _generate_one(task) -> tuple[int, SampleRecord | None, str | None]:
    index, seed, config, env, solver = task
    scenario = generate_scenario(config, env, seed)
    try:
        result = solve_olp(scenario.channel, env.rho_d, solver)
    except (RankDeficientChannelError, OlpSolverError) as exc:
        return index, None, f"seed {seed}: {type(exc).__name__}: {exc}"
    if not result.converged:
        return index, None, f"seed {seed}: bisection exhausted its iteration budget"
    if result.num_numerical_trouble > 0 and result.t_star == 0.0:
        return index, None, f"seed {seed}: feasibility solver failed even after the rescaled retry"
    record = SampleRecord(
        channel=scenario.channel.entries,
        channel_pinv=scenario.channel.pinv,
        precoder=result.precoder.entries,
        t_star=result.t_star,
        seed=seed,
    )
    return index, record, None


def cmd_generate(args) -> int:
    env = _load_environment(args.env, args.rho_d)
    config = SystemConfig(num_aps=args.aps, num_ues=args.ues, rho_d=env.rho_d)
    solver = SolverConfig(epsilon=args.epsilon)
    jobs = _resolve_jobs(args.jobs)
    tasks = [(i, args.seed + i, config, env, solver) for i in range(args.count)]

    results: list[tuple[int, SampleRecord | None, str | None]] = []
    started = time.perf_counter()
    if jobs == 1:
        for task in tasks:
            results.append(_generate_one(task))
            done = len(results)
            if done % max(1, args.count // 10) == 0 or done == args.count:
                print(f"generate: {done}/{args.count} solved ({time.perf_counter() - started:.1f}s)")
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for done, outcome in enumerate(pool.map(_generate_one, tasks, chunksize=1), start=1):
                results.append(outcome)
                if done % max(1, args.count // 10) == 0 or done == args.count:
                    print(f"generate: {done}/{args.count} solved ({time.perf_counter() - started:.1f}s)")
    results.sort(key=lambda item: item[0])

    records = [record for _, record, _ in results if record is not None]
    failures = [message for _, record, message in results if record is None]
    for message in failures:
        print(f"generate: skipped {message}", file=sys.stderr)

    manifest = DatasetManifest(
        environment=env,
        num_aps=args.aps,
        num_ues=args.ues,
        rho_d=env.rho_d,
        num_samples=len(records),
        solver=solver,
        seed_base=args.seed,
        created_by=args.created_by,
    )
    write_dataset(args.out, manifest, records)
    print(f"generate: wrote {len(records)} records to {args.out} ({len(failures)} failed solves)")
    if len(failures) > 0.01 * args.count:
        print(f"error: {len(failures)}/{args.count} solves failed (>1%)", file=sys.stderr)
        return 1
    return 0


def _eval_one(task):
    index, record, rho_d, names, solver, weight_params = task
    channel = record_channel(record)
    se_rows = {}
    sinr_rows = {}
    for name in names:
        if name == "olp":
            delta = Precoder(record.precoder)
        elif name == "zf":
            delta = zero_forcing(channel, rho_d)
        elif name == "mr":
            delta = maximum_ratio(channel, rho_d, solver)
        else:
            delta = forward(channel, weight_params)
        metrics = sinr(channel, delta, rho_d)
        se_rows[name] = metrics.se
        sinr_rows[name] = float(metrics.sinr.min())
    return index, se_rows, sinr_rows


def cmd_eval(args) -> int:
    names = tuple(dict.fromkeys(args.precoders.split(",")))
    for name in names:
        if name not in PRECODER_NAMES:
            raise SystemExit(f"error: unknown precoder {name!r}; choose from {','.join(PRECODER_NAMES)}")
    weights = None
    if "gnn" in names:
        if not args.weights:
            raise SystemExit("error: --weights is required when evaluating the gnn precoder")
        weights = read_weights(args.weights).to_weights()
    manifest, records = read_dataset(args.dataset)
    jobs = _resolve_jobs(args.jobs)
    tasks = [
        (i, record, manifest.rho_d, names, manifest.solver, weights)
        for i, record in enumerate(records)
    ]
    if jobs == 1:
        outcomes = [_eval_one(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_eval_one, tasks, chunksize=1))
    outcomes.sort(key=lambda item: item[0])

    se = {name: np.array([out[1][name] for out in outcomes]) for name in names}
    min_sinrs = {name: np.array([out[2][name] for out in outcomes]) for name in names}
    report = build_report(se, min_sinrs)

    out_dir = Path(args.out) if args.out else Path(args.dataset)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = report.to_json_dict()
    payload["dataset"] = str(args.dataset)
    payload["num_samples"] = len(records)
    payload["M"] = manifest.num_aps
    payload["K"] = manifest.num_ues
    payload["rho_d"] = manifest.rho_d
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "cdf.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["precoder", "se", "cdf"])
        for row in cdf_rows(report):
            writer.writerow([row[0], repr(row[1]), repr(row[2])])

    for name in names:
        pm = report.precoders[name]
        loss = (
            f" median_loss={pm.median_loss_vs_olp_pct:.2f}%"
            f" p95_likely_loss={pm.p95_likely_loss_vs_olp_pct:.2f}%"
            if pm.median_loss_vs_olp_pct is not None
            else ""
        )
        print(f"eval: {name}: median_se={pm.median_se:.4f} p5_se={pm.p5_se:.4f}{loss}")
    print(f"eval: wrote {out_dir / 'metrics.json'} and {out_dir / 'cdf.csv'}")
    return 0


def _bench_sample(name: str, record: SampleRecord, rho_d: float, solver, weights) -> dict[str, float]:
    stages = {}
    if name == "gnn":
        t0 = time.perf_counter()
        channel = ChannelMatrix(record.channel)
        channel.pinv  # noqa: B018 - preprocessing includes the pseudo-inverse
        graph = build_graph(channel.num_aps, channel.num_ues)
        feats = input_features(channel, weights.feature_stats)
        t1 = time.perf_counter()
        raw = apply_network(weights, graph, feats)
        t2 = time.perf_counter()
        delta = deprocess_and_postprocess(channel, raw, weights.feature_stats)
        t3 = time.perf_counter()
        stages = {"preprocess": t1 - t0, "solve": t2 - t1, "postprocess": t3 - t2}
        del delta
    elif name == "olp":
        t0 = time.perf_counter()
        channel = ChannelMatrix(record.channel)
        channel.pinv  # noqa: B018
        t1 = time.perf_counter()
        result = solve_olp(channel, rho_d, solver)
        t2 = time.perf_counter()
        constraint_residual(channel, result.precoder, rho_d, result.t_star)
        t3 = time.perf_counter()
        stages = {"preprocess": t1 - t0, "solve": t2 - t1, "postprocess": t3 - t2}
    elif name == "zf":
        t0 = time.perf_counter()
        channel = ChannelMatrix(record.channel)
        channel.pinv  # noqa: B018
        t1 = time.perf_counter()
        delta = zero_forcing(channel, rho_d)
        t2 = time.perf_counter()
        delta.row_norms()
        t3 = time.perf_counter()
        stages = {"preprocess": t1 - t0, "solve": t2 - t1, "postprocess": t3 - t2}
    elif name == "mr":
        t0 = time.perf_counter()
        channel = ChannelMatrix(record.channel)
        t1 = time.perf_counter()
        delta = maximum_ratio(channel, rho_d, solver)
        t2 = time.perf_counter()
        min_sinr(channel, delta, rho_d)
        t3 = time.perf_counter()
        stages = {"preprocess": t1 - t0, "solve": t2 - t1, "postprocess": t3 - t2}
    return stages


def cmd_bench(args) -> int:
    names = tuple(dict.fromkeys(args.precoders.split(",")))
    for name in names:
        if name not in PRECODER_NAMES:
            raise SystemExit(f"error: unknown precoder {name!r}")
    weights = None
    if "gnn" in names:
        if not args.weights:
            raise SystemExit("error: --weights is required when benchmarking the gnn precoder")
        weights = read_weights(args.weights).to_weights()
    manifest, records = read_dataset(args.dataset)
    per_rep: dict[str, dict[str, list[float]]] = {
        name: {"preprocess": [], "solve": [], "postprocess": []} for name in names
    }
    for _ in range(args.repetitions):
        sums = {name: {"preprocess": 0.0, "solve": 0.0, "postprocess": 0.0} for name in names}
        for record in records:
            for name in names:
                stages = _bench_sample(name, record, manifest.rho_d, manifest.solver, weights)
                for stage, seconds in stages.items():
                    sums[name][stage] += seconds
        for name in names:
            for stage in sums[name]:
                per_rep[name][stage].append(1e3 * sums[name][stage] / len(records))

    payload = {
        "dataset": str(args.dataset),
        "repetitions": args.repetitions,
        "num_samples": len(records),
        "precoders": {
            name: {
                stage: {
                    "mean_ms": float(np.mean(values)),
                    "std_ms": float(np.std(values)),
                    "per_rep_ms": [float(v) for v in values],
                }
                for stage, values in stages.items()
            }
            for name, stages in per_rep.items()
        },
    }
    out_path = Path(args.out) if args.out else Path(args.dataset) / "timings.json"
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name in names:
        parts = ", ".join(
            f"{stage}={np.mean(values):.3f}ms" for stage, values in per_rep[name].items()
        )
        print(f"bench: {name}: {parts}")
    print(f"bench: wrote {out_path}")
    return 0


def cmd_verify(args) -> int:
    try:
        manifest, records = read_dataset(args.dataset)
    except DatasetIOError as exc:
        print(f"verify: FAIL: {exc}", file=sys.stderr)
        return 1
    violations = []
    for index, record in enumerate(records):
        try:
            validate_record(record, manifest.rho_d, index)
        except DatasetIOError as exc:
            violations.append(str(exc))
    for message in violations:
        print(f"verify: FAIL: {message}", file=sys.stderr)
    if violations:
        return 1
    print(f"verify: OK: {len(records)} records pass all invariants")
    return 0


def cmd_train_export_check(args) -> int:
    artifact = read_weights(args.weights)
    weights = artifact.to_weights()
    manifest, records = read_dataset(args.dataset)
    records = records[: args.num_samples]
    samples = []
    for index, record in enumerate(records):
        channel = record_channel(record)
        delta = forward(channel, weights)
        samples.append(
            {
                "index": index,
                "seed": record.seed,
                "min_sinr": min_sinr(channel, delta, manifest.rho_d),
                "delta_re": delta.entries.real.tolist(),
                "delta_im": delta.entries.imag.tolist(),
            }
        )
    payload = {
        "weights": str(args.weights),
        "dataset": str(args.dataset),
        "num_samples": len(samples),
        "samples": samples,
    }
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"train-export-check: wrote {len(samples)} forward outputs to {args.emit}")
    if args.compare:
        with open(args.compare, encoding="utf-8") as fh:
            other = json.load(fh)
        if len(other["samples"]) != len(samples):
            print(
                f"train-export-check: FAIL: sample count mismatch"
                f" ({len(other['samples'])} vs {len(samples)})",
                file=sys.stderr,
            )
            return 1
        worst = 0.0
        for mine, theirs in zip(samples, other["samples"]):
            a = np.array(mine["delta_re"]) + 1j * np.array(mine["delta_im"])
            b = np.array(theirs["delta_re"]) + 1j * np.array(theirs["delta_im"])
            scale = max(np.abs(b).max(), 1e-300)
            worst = max(worst, float(np.abs(a - b).max() / scale))
        if worst > args.rtol:
            print(
                f"train-export-check: FAIL: max relative precoder difference {worst:.3e}"
                f" exceeds rtol {args.rtol:.1e}",
                file=sys.stderr,
            )
            return 1
        print(f"train-export-check: OK: max relative precoder difference {worst:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="olpkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled dataset")
    p.add_argument("--env", required=True, help="environment preset (los60/urban2/rural450) or JSON path")
    p.add_argument("--aps", type=int, required=True)
    p.add_argument("--ues", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="base seed; sample i uses seed+i")
    p.add_argument("--out", required=True)
    p.add_argument("--rho-d", type=float, default=None, help="override the environment downlink SNR")
    p.add_argument("--epsilon", type=float, default=0.01, help="bisection precision")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--created-by", default="olpkit")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="spectral-efficiency metrics on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--precoders", default="olp,zf,mr", help="comma list from olp,zf,mr,gnn")
    p.add_argument("--weights", default=None)
    p.add_argument("--out", default=None, help="output directory (default: dataset dir)")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="wall-clock stage timings")
    p.add_argument("--dataset", required=True)
    p.add_argument("--precoders", default="olp,zf,mr")
    p.add_argument("--weights", default=None)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--out", default=None, help="timings.json path (default: dataset dir)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="re-check dataset invariants")
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train-export-check", help="validate trained weights in this engine")
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--num-samples", type=int, default=5)
    p.add_argument("--emit", default=None, help="write forward outputs to this JSON file")
    p.add_argument("--compare", default=None, help="compare against forward outputs in this JSON file")
    p.add_argument("--rtol", type=float, default=1e-4)
    p.set_defaults(func=cmd_train_export_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DatasetIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

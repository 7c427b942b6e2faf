"""Command-line entry point: preprocess, train, evaluate, sweep, generate."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from . import plotting
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig, load_config
from .corpus import IntervalGraphs, ParseError, build_graphs, load_graphs, load_log, save_graphs, write_log
from .evaluator import MetricsReport
from .model import ModelInputs, Recommender
from .refine import RefinementReport, refine_all
from .synthetic import SyntheticSpec, generate_synthetic
from .trainer import DivergenceError, evaluate_model, leakage_violations, split_target, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
THREADS_ENV = "SEQREFINE_THREADS"
SWEEP_AXES = ("beta", "lambda1", "min_sim")

log = logging.getLogger("seqrefine")


class DataError(RuntimeError):
    pass


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _echo_config(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.txt"), "w") as fh:
        fh.write(cfg.to_text())


def prepare(cfg: ExperimentConfig) -> tuple[IntervalGraphs, RefinementReport | None]:
    """Slice the log into T + 1 intervals and refine the T input intervals."""
    if not cfg.dataset:
        raise ConfigError("`dataset` is not set")
    try:
        interactions = load_log(cfg.dataset)
    except FileNotFoundError as exc:
        raise DataError(f"dataset not found: {cfg.dataset}") from exc
    return refine_inputs(build_graphs(interactions, cfg.T + 1), cfg)


def refine_inputs(graphs: IntervalGraphs, cfg: ExperimentConfig) -> tuple[IntervalGraphs, RefinementReport | None]:
    """Refine every interval except the last; the held-out one is appended untouched."""
    if cfg.disable_refine:
        return graphs, None
    T = graphs.T - 1
    refined, report = refine_all(graphs.head(T), cfg.refine_config())
    out = graphs.copy()
    out.user_item[:T] = refined.user_item
    report.initial.append(graphs.user_item[T].nnz)
    report.noisy.append(0)
    report.augmented.append(0)
    return out, report


def fit(cfg: ExperimentConfig, graphs: IntervalGraphs):
    data = split_target(graphs)
    inputs = ModelInputs.from_graphs(data.inputs, cfg.max_seq)
    problems = leakage_violations(data, inputs)
    if problems:
        raise DataError("held-out interactions leaked into inputs: " + "; ".join(problems[:3]))
    state = train(data, cfg.model_config(), cfg.loss_config(), cfg.train_config())
    metrics = evaluate_model(state.model, inputs, data, cfg.topn, cfg.sampled_negatives, cfg.seed)
    return state, data, metrics


def cmd_preprocess(cfg: ExperimentConfig) -> dict:
    _echo_config(cfg)
    graphs, report = prepare(cfg)
    save_graphs(graphs, os.path.join(cfg.out, "graphs"))
    result = report.to_dict() if report else RefinementReport(
        [g.nnz for g in graphs.user_item], [0] * graphs.T, [0] * graphs.T).to_dict()
    result["refined"] = report is not None
    _write_json(os.path.join(cfg.out, "refinement_report.json"), result)
    plotting.plot_refinement(result, os.path.join(cfg.out, "refinement.png"))
    print(json.dumps(result, indent=2))
    return result


def _load_prepared(cfg: ExperimentConfig) -> IntervalGraphs:
    try:
        graphs = load_graphs(os.path.join(cfg.out, "graphs"))
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc
    if graphs.T != cfg.T + 1:
        raise ConfigError(f"graphs in {cfg.out} have {graphs.T} intervals, config expects T+1 = {cfg.T + 1}; "
                          "rerun `preprocess`")
    return graphs


def _emit_metrics(cfg: ExperimentConfig, metrics: MetricsReport, stem: str = "metrics") -> None:
    _write_json(os.path.join(cfg.out, f"{stem}.json"), metrics.to_dict())
    table = metrics.to_table()
    with open(os.path.join(cfg.out, f"{stem}.txt"), "w") as fh:
        fh.write(table + "\n")
    print(table)


def cmd_train(cfg: ExperimentConfig) -> MetricsReport:
    _echo_config(cfg)
    graphs = _load_prepared(cfg)
    state, data, metrics = fit(cfg, graphs)
    meta = {"num_users": graphs.num_users, "num_items": graphs.num_items, "T": cfg.T,
            "epochs_run": state.epoch, "config": cfg.to_text()}
    save_checkpoint(os.path.join(cfg.out, "checkpoint"),
                    {k: v.data for k, v in state.model.params.items()}, meta)
    _write_json(os.path.join(cfg.out, "training_log.json"), state.history)
    if state.history:
        plotting.plot_losses(state.history, os.path.join(cfg.out, "loss_curve.png"))
    _emit_metrics(cfg, metrics)
    return metrics


def cmd_evaluate(cfg: ExperimentConfig, checkpoint: str) -> MetricsReport:
    graphs = _load_prepared(cfg)
    try:
        tensors, meta = load_checkpoint(checkpoint)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc
    data = split_target(graphs)
    model = Recommender(graphs.num_users, graphs.num_items, cfg.T, cfg.model_config(), cfg.seed)
    missing = set(model.params) ^ set(tensors)
    if missing:
        raise ConfigError(f"checkpoint does not match the configured model: {sorted(missing)[:5]}")
    for name, arr in tensors.items():
        if arr.shape != model.params[name].data.shape:
            raise ConfigError(f"checkpoint tensor {name} has shape {arr.shape}, "
                              f"model expects {model.params[name].data.shape}")
        model.params[name].data = arr
    inputs = ModelInputs.from_graphs(data.inputs, cfg.max_seq)
    metrics = evaluate_model(model, inputs, data, cfg.topn, cfg.sampled_negatives, cfg.seed)
    os.makedirs(cfg.out, exist_ok=True)
    _emit_metrics(cfg, metrics, "eval_metrics")
    return metrics


def cmd_sweep(cfg: ExperimentConfig, axis: str, values: list[float]) -> list[dict]:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    _echo_config(cfg)
    cfg = cfg.replace(topn=tuple(sorted(set(cfg.topn) | {10})))
    rows = []
    for v in values:
        run = cfg.replace(**{axis: v})
        graphs, _ = prepare(run)
        _, _, metrics = fit(run, graphs)
        rows.append({axis: v, "HR@10": metrics.hr[10], "NDCG@10": metrics.ndcg[10]})
        log.info("%s=%g HR@10=%.4f NDCG@10=%.4f", axis, v, metrics.hr[10], metrics.ndcg[10])
    path = os.path.join(cfg.out, f"sweep_{axis}.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[axis, "HR@10", "NDCG@10"])
        writer.writeheader()
        writer.writerows(rows)
    plotting.plot_sweep(axis, rows, os.path.join(cfg.out, f"sweep_{axis}.png"))
    with open(path) as fh:
        print(fh.read(), end="")
    return rows


def cmd_generate(args) -> None:
    spec = SyntheticSpec(n_users=args.users, n_items=args.items, n_communities=args.communities,
                         noise_rate=args.noise, drift=args.drift, n_intervals=args.intervals,
                         events_per_interval=args.events, seed=args.seed)
    data = generate_synthetic(spec)
    write_log(data.log, args.output)
    print(f"wrote {len(data.log)} interactions ({len(data.noise)} planted noise) to {args.output}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqrefine", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="output directory (overrides `out` in the config)")
        return p

    with_config("preprocess", "slice, build and refine the interval graphs")
    with_config("train", "train on preprocessed graphs and report held-out metrics")
    p = with_config("evaluate", "score a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--topn", type=_ints)
    p = with_config("sweep", "retrain across one hyper-parameter")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, type=_floats)

    g = sub.add_parser("generate", help="write a seeded synthetic interaction log")
    g.add_argument("output")
    g.add_argument("--users", type=int, default=20)
    g.add_argument("--items", type=int, default=30)
    g.add_argument("--communities", type=int, default=3)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--drift", type=float, default=0.0)
    g.add_argument("--intervals", type=int, default=5)
    g.add_argument("--events", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    return parser


def _threads() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def run(args) -> int:
    if args.command == "generate":
        cmd_generate(args)
        return EXIT_OK
    overrides = {"out": args.out}
    if getattr(args, "topn", None):
        overrides["topn"] = args.topn
    cfg = load_config(args.config, **overrides)
    if args.command == "preprocess":
        cmd_preprocess(cfg)
    elif args.command == "train":
        cmd_train(cfg)
    elif args.command == "evaluate":
        cmd_evaluate(cfg, args.checkpoint)
    elif args.command == "sweep":
        cmd_sweep(cfg, args.axis, args.values)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=_threads()):
            return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ParseError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands:
    generate   draw a synthetic dataset and write it with its generator file
    train      fit one learner on a dataset file and save the model and log
    evaluate   score a saved model against a generator's exact oracle
    sweep      run a config-driven comparative experiment end to end
    plot       render an emitted results table as an SVG chart

Exit codes: 0 on success, 1 for usage or configuration errors, 2 when runs
failed (training divergence, or failed rows in a sweep). The HLEARNER_OUT
environment variable supplies the default output directory; flags override
it, and the fallback is the current directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .data import generate_dataset, load_dataset, load_dgp, sample_dgp, save_dataset, save_dgp
from .data import TreatmentSpec, enumerate_eval_treatments
from .harness import ExperimentConfig, emit_csv, load_table, run_experiment
from .learners import ALL_LEARNERS, TrainConfig, TrainingDiverged, load_model, save_model, train
from .metrics import factual_rmse, pehe_composite

OUTPUT_DIR_ENV = "HLEARNER_OUT"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on bad usage, not argparse's default 2
        raise _UsageError(message)


def _out_dir(flag_value: str | None) -> str:
    return flag_value or os.environ.get(OUTPUT_DIR_ENV) or "."


def build_parser() -> _Parser:
    parser = _Parser(prog="hlearner", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic dataset")
    g.add_argument("--p", type=int, default=10, help="covariate dimension")
    g.add_argument("--binary", type=int, default=4, help="binary treatment components")
    g.add_argument("--continuous", type=int, default=1, help="continuous treatment components")
    g.add_argument("--outcomes", type=int, default=2, help="outcome count M")
    g.add_argument("--gamma", type=float, default=1.0, help="confounding strength")
    g.add_argument("--sigma-y", type=float, default=0.1, help="outcome noise scale")
    g.add_argument("--dgp-seed", type=int, default=0, help="coefficient seed")
    g.add_argument("--n", type=int, default=1000, help="number of records")
    g.add_argument("--data-seed", type=int, default=0, help="sampling seed")
    g.add_argument("--name", default="dataset", help="output file stem")
    g.add_argument("--out", default=None, help="output directory")

    t = sub.add_parser("train", help="fit a learner on a dataset file")
    t.add_argument("--dataset", required=True, help="dataset table from `generate`")
    t.add_argument("--dgp", required=True, help="generator file from `generate`")
    t.add_argument("--learner", required=True, choices=ALL_LEARNERS)
    t.add_argument("--train-config", default=None, help="JSON file of TrainConfig fields")
    t.add_argument("--seed", type=int, default=None, help="override the training seed")
    t.add_argument("--name", default="model", help="output file stem")
    t.add_argument("--out", default=None, help="output directory")

    e = sub.add_parser("evaluate", help="score a saved model against the oracle")
    e.add_argument("--model", required=True, help="model file from `train`")
    e.add_argument("--dgp", required=True, help="generator file from `generate`")
    e.add_argument("--n-test", type=int, default=1000)
    e.add_argument("--grid", type=int, default=5, help="grid points per continuous component")
    e.add_argument("--eval-seed", type=int, default=10_000)
    e.add_argument("--all-pairs", action="store_true", help="contrast all ordered treatment pairs")
    e.add_argument("--report", default=None, help="also write the report JSON here")

    s = sub.add_parser("sweep", help="run a comparative experiment from a config file")
    s.add_argument("--config", required=True, help="experiment config JSON")
    s.add_argument("--out", default=None, help="override the output directory")
    s.add_argument("--no-plot", action="store_true", help="skip chart emission")
    s.add_argument("--quiet", action="store_true", help="suppress per-run progress lines")

    p = sub.add_parser("plot", help="render emitted results as a chart")
    p.add_argument("--raw", required=True, help="raw results table")
    p.add_argument("--agg", default=None, help="aggregate table (recomputed when absent)")
    p.add_argument("--svg", required=True, help="output chart path")
    p.add_argument("--title", default=None)

    return parser


def _cmd_generate(args) -> int:
    out = _out_dir(args.out)
    os.makedirs(out, exist_ok=True)
    spec = TreatmentSpec.from_counts(args.binary, args.continuous)
    dgp = sample_dgp(args.p, spec, args.outcomes, args.gamma, args.sigma_y, args.dgp_seed)
    dataset = generate_dataset(dgp, args.n, args.data_seed)
    data_path = os.path.join(out, f"{args.name}.csv")
    dgp_path = os.path.join(out, f"{args.name}_dgp.json")
    save_dataset(dataset, data_path)
    save_dgp(dgp, dgp_path)
    print(data_path)
    print(dgp_path)
    return 0


def _cmd_train(args) -> int:
    out = _out_dir(args.out)
    os.makedirs(out, exist_ok=True)
    dgp = load_dgp(args.dgp)
    dataset = load_dataset(args.dataset, dgp)
    if args.train_config is not None:
        with open(args.train_config) as fh:
            cfg = TrainConfig.from_dict(json.load(fh))
    else:
        cfg = TrainConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    try:
        model, log = train(args.learner, dataset, cfg)
    except TrainingDiverged as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    model_path = os.path.join(out, f"{args.name}_model.json")
    log_path = os.path.join(out, f"{args.name}_log.json")
    save_model(model, model_path, cfg)
    with open(log_path, "w") as fh:
        json.dump(log, fh)
        fh.write("\n")
    print(model_path)
    print(log_path)
    return 0


def _cmd_evaluate(args) -> int:
    model, _ = load_model(args.model)
    dgp = load_dgp(args.dgp)
    test = generate_dataset(dgp, args.n_test, args.eval_seed)
    combos = enumerate_eval_treatments(dgp.spec, args.grid)
    report = pehe_composite(model, dgp, test.x, combos, all_pairs=args.all_pairs)
    report.factual_rmse = factual_rmse(model, test)
    blob = json.dumps(report.to_dict(), indent=2)
    print(blob)
    if args.report is not None:
        with open(args.report, "w") as fh:
            fh.write(blob + "\n")
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        doc = json.load(fh)
    cfg = ExperimentConfig.from_dict(doc)
    out = _out_dir(args.out or cfg.output_dir)
    os.makedirs(out, exist_ok=True)

    def progress(row):
        if args.quiet:
            return
        if row.status == "ok":
            print(
                f"{row.axis}={row.axis_value} seed={row.seed} {row.learner}: "
                f"pehe={row.pehe_composite:.6g}"
            )
        else:
            print(
                f"{row.axis}={row.axis_value} seed={row.seed} {row.learner}: "
                f"FAILED ({row.error})",
                file=sys.stderr,
            )

    table = run_experiment(cfg, progress=progress)
    paths = emit_csv(table, out, cfg.name)
    with open(os.path.join(out, f"{cfg.name}_config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=1)
        fh.write("\n")
    if not args.no_plot and table.agg:
        from .plotting import emit_plot

        emit_plot(table, os.path.join(out, f"{cfg.name}.svg"), title=cfg.name)
        paths["plot"] = os.path.join(out, f"{cfg.name}.svg")
    for path in paths.values():
        print(path)
    failures = sum(1 for r in table.raw if r.status != "ok")
    if failures:
        print(f"{failures} run(s) failed; see the raw table", file=sys.stderr)
        return 2
    return 0


def _cmd_plot(args) -> int:
    from .plotting import emit_plot

    table = load_table(args.raw, args.agg)
    emit_plot(table, args.svg, title=args.title)
    print(args.svg)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

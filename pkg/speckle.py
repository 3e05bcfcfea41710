# Command-line entry point: python speckle.py <command> --help

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd
import torch
import wandb

from benchmark_recovery import BENCH_COLUMNS, METHODS, run_bench, summarize_bench
from calibration import binarize, estimate_tm, save_estimate
from data import ExperimentSpec, gen_dataset, load_set, load_tm, save_tm
from injectivity import empirical_injectivity
from medium import TransmissionMatrix, gen_real_frame, gen_transmission_matrix
from retrieval import SolverConfig, relative_error, solve
from tcnn import (
    build_network,
    forward,
    load_checkpoint,
    normalize_speckle,
    save_checkpoint,
    speckle_tensors,
    train,
    write_curves,
)
from train_utils import print_model_stats

logger = logging.getLogger("speckle")

EXIT_USAGE = 1
EXIT_FAILURE = 2


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def get_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="speckle", description="Imaging through scattering media by phase retrieval")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("gen-medium", help="draw a random transmission matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--field", choices=["complex", "real"], default="complex")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-dataset", help="write medium, train/val/test (and calibration) sets for a spec")
    p.add_argument("--spec", required=True, help="experiment spec JSON")
    p.add_argument("--out_dir", help="overrides out_dir of the spec")
    p.add_argument("--seed", type=int, help="overrides the dataset seed")

    p = sub.add_parser("injectivity", help="exhaustive collision search of the intensity map")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--field", choices=["real", "complex"], default="real")
    p.add_argument("--space", choices=["binary", "sign", "zero", "sphere"], default="binary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--net_size", type=int, default=8)
    p.add_argument("--separation", type=float, default=0.0)
    p.add_argument("--frames", type=int, default=1)

    p = sub.add_parser("solve", help="recover one signal from its intensities")
    p.add_argument("--medium", required=True, help="SPKLTM01 file")
    p.add_argument("--set", required=True, help="SPKLSET1 file holding the intensities")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--algorithm", choices=["gs", "wf"], default="wf")
    p.add_argument("--solver_kwargs", type=json.loads, default=dict())
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("calibrate", help="estimate the transmission matrix from calibration pairs")
    p.add_argument("--calibration", required=True, help="SPKLSET1 file of calibration pairs")
    p.add_argument("--algorithm", choices=["gs", "wf"], default="wf")
    p.add_argument("--solver_kwargs", type=json.loads, default=dict())
    p.add_argument("--n_workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the learned inverse on a generated dataset")
    p.add_argument("--data_dir", required=True, help="directory written by gen-dataset")
    p.add_argument("--network_kwargs", type=json.loads, default=dict())
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch_size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr_decay", type=float, default=0.85)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out_dir", required=True)
    p.add_argument("--project")
    p.add_argument("--run_name", default="debug")

    p = sub.add_parser("infer", help="run a trained network on one speckle")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--index", type=int, default=0)

    p = sub.add_parser("bench", help="per-image quality and time of the recovery methods")
    p.add_argument("--data_dir", required=True)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=["gs", "wf"])
    p.add_argument("--checkpoint")
    p.add_argument("--estimate")
    p.add_argument("--solver_kwargs", type=json.loads, default=dict())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out_dir")

    p = sub.add_parser("report", help="summarize a curves or bench CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--window", type=int, default=5)
    return parser


def _load_spec(data_dir: str) -> ExperimentSpec:
    spec = ExperimentSpec.from_json(Path(data_dir) / "spec.json")
    return spec._replace(out_dir=str(data_dir))


def _pick(path: str, index: int):
    ds = load_set(path)
    if not 0 <= index < len(ds):
        raise ValueError(f"{index=} is out of range for {len(ds)} records in {path}")
    return ds, ds.signals[index], ds.intensities[index]


def cmd_gen_medium(args):
    if args.field == "complex":
        tm = gen_transmission_matrix(args.n, args.m, args.seed)
    else:
        tm = TransmissionMatrix(gen_real_frame(args.n, args.m, args.seed), args.seed)
    save_tm(args.out, tm)
    print(f"Wrote {args.field} {args.n}x{args.m} transmission matrix to {args.out}")


def cmd_gen_dataset(args):
    spec = ExperimentSpec.from_json(args.spec)
    if args.out_dir is not None:
        spec = spec._replace(out_dir=args.out_dir)
    if args.seed is not None:
        spec = spec._replace(dataset=spec.dataset._replace(seed=args.seed))
    for name, path in gen_dataset(spec, pbar=True).items():
        print(f"{name}: {path}")


def cmd_injectivity(args):
    report = empirical_injectivity(
        args.n,
        args.m,
        args.field,
        args.space,
        args.seed,
        args.tolerance,
        net_size=args.net_size,
        separation=args.separation,
        frames=args.frames,
        pbar=True,
    )
    for k, v in vars(report).items():
        print(f"{k}: {v}")


def cmd_solve(args):
    tm = load_tm(args.medium)
    ds, signal, b = _pick(args.set, args.index)
    cfg = SolverConfig(**{**args.solver_kwargs, "algorithm": args.algorithm, "seed": args.seed})
    sol = solve(tm, b, cfg)
    print(f"iterations: {sol.iterations_run}")
    print(f"residual: {sol.residual_history[-1]:.3e}")
    print(f"time: {sol.wall_time_seconds:.4f}s")
    if signal.abs().max() > 0:
        print(f"relative error: {relative_error(sol.x_hat, signal):.3e}")


def cmd_calibrate(args):
    cal = load_set(args.calibration).calibration_set()
    cfg = SolverConfig(**{**args.solver_kwargs, "algorithm": args.algorithm, "seed": args.seed})
    est = estimate_tm(cal, cfg, n_workers=args.n_workers, pbar=True)
    save_estimate(args.out, est)
    print(f"Calibrated {cal.m} columns from k={cal.k} pairs in {est.wall_time_seconds:.1f}s")
    print(f"Failed columns: {len(est.failed_columns)}")


def cmd_train(args):
    spec = _load_spec(args.data_dir)
    cfg = spec.network._replace(**args.network_kwargs)
    spec = spec._replace(network=cfg)
    spec.check_network_shapes()

    data_dir = Path(args.data_dir)
    train_ds, val_ds = load_set(data_dir / "train.bin"), load_set(data_dir / "val.bin")
    train_set = speckle_tensors(train_ds.intensities, train_ds.signals, train_ds.mode, cfg)
    val_set = speckle_tensors(val_ds.intensities, val_ds.signals, val_ds.mode, cfg)
    print(f"Train set: {len(train_ds):,} pairs, validation set: {len(val_ds):,} pairs")

    net = build_network(cfg)
    print_model_stats(net)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = wandb.init(
        project=args.project,
        name=args.run_name,
        config=args,
        dir="/tmp",
        mode="disabled" if args.project is None else None,
    )
    net, state = train(net, train_set, val_set, args.epochs, args.batch_size, args.seed, args.lr, args.lr_decay, run)
    run.finish()

    save_checkpoint(out_dir / "model.bin", net)
    write_curves(out_dir / "curves.csv", state)
    print(f"Saved checkpoint and curves to {out_dir}")


def cmd_infer(args):
    net = load_checkpoint(args.checkpoint)
    _, _, b = _pick(args.set, args.index)
    out = forward(net, normalize_speckle(b, net.cfg.input_side), training=False)[0]
    grid = binarize(out.flatten(), "amplitude", tuple(out.shape))
    print(pd.DataFrame(grid.to(torch.int64).numpy()).to_string(header=False, index=False))


def cmd_bench(args):
    spec = _load_spec(args.data_dir)
    solver = spec.solver._replace(**{**args.solver_kwargs, "seed": args.seed})
    _, summary = run_bench(
        spec._replace(solver=solver),
        set(args.methods),
        args.checkpoint,
        args.estimate,
        args.out_dir,
        pbar=True,
    )
    print(summary.to_markdown())


def summarize_curves(df: pd.DataFrame, window: int = 5) -> pd.DataFrame:
    smoothed = df["training_error"].rolling(window, min_periods=1).mean()
    return pd.DataFrame(
        dict(
            final=[df["training_error"].iloc[-1], df["validation_error"].iloc[-1]],
            best=[df["training_error"].min(), df["validation_error"].min()],
            smoothed_final=[smoothed.iloc[-1], df["validation_error"].rolling(window, min_periods=1).mean().iloc[-1]],
        ),
        index=["training_error", "validation_error"],
    )


def cmd_report(args):
    path = Path(args.csv)
    if not path.exists():
        raise FileNotFoundError(f"CSV not found: {path}")
    df = pd.read_csv(path)
    if len(df) == 0:
        raise ValueError(f"{path} has no rows")

    if {"training_error", "validation_error"} <= set(df.columns):
        print(summarize_curves(df, args.window).to_markdown())
    elif set(BENCH_COLUMNS) <= set(df.columns):
        print(summarize_bench(df).to_markdown())
    else:
        raise ValueError(f"{path} is neither a curves nor a bench CSV, columns: {list(df.columns)}")


COMMANDS = {
    "gen-medium": cmd_gen_medium,
    "gen-dataset": cmd_gen_dataset,
    "injectivity": cmd_injectivity,
    "solve": cmd_solve,
    "calibrate": cmd_calibrate,
    "train": cmd_train,
    "infer": cmd_infer,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = get_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    for k, v in vars(args).items():
        print(f"{k}: {v}")

    try:
        COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, RuntimeError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(main())

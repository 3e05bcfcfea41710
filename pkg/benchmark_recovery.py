# Per-image recovery quality and time of the iterative solvers, double phase retrieval
# and the trained network on the test split of a generated dataset.

import argparse
import json
import time
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from torch import Tensor
from tqdm import tqdm

from calibration import binarize, load_estimate, pixel_accuracy, recover_signal
from data import ExperimentSpec, load_set, load_tm
from medium import SignalVector, TransmissionMatrix, decode_slm
from retrieval import SolverConfig, align_global_phase, relative_error, solve
from tcnn import forward, load_checkpoint, normalize_speckle

METHODS = ("gs", "wf", "double-pr", "learned")
BENCH_COLUMNS = ["method", "image_id", "rel_error", "pixel_acc", "time_s", "iters"]


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _rel_error(x_est: Tensor, x_ref: Tensor) -> float:
    if x_ref.abs().max() == 0:
        return float("nan")  # undefined for the all-off image
    return relative_error(x_est, x_ref)


def run_bench(
    spec: ExperimentSpec,
    methods: set[str],
    checkpoint: str | Path | None = None,
    estimate: str | Path | None = None,
    out_dir: str | Path | None = None,
    pbar: bool = False,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Returns (per-image rows, per-method means) and writes bench.csv / bench.json to out_dir.

    Timing covers the recovery call only. Calibration and training are one-time costs
    and are reported separately in bench.json when known.
    """
    unknown = set(methods) - set(METHODS)
    if not methods or unknown:
        raise ValueError(f"methods must be a non-empty subset of {METHODS}, got {sorted(methods)}")
    data_dir = Path(spec.out_dir)
    out_dir = Path(out_dir) if out_dir is not None else data_dir

    tm = load_tm(_require(data_dir / "medium.bin", "medium"))
    test_set = load_set(_require(data_dir / "test.bin", "test split"))
    mode = test_set.mode
    side = spec.dataset.image_side
    one_time = dict()

    net = None
    if "learned" in methods:
        if checkpoint is None:
            raise FileNotFoundError("the learned method needs a trained checkpoint (--checkpoint)")
        net = load_checkpoint(_require(Path(checkpoint), "checkpoint"))
        curves_path = Path(checkpoint).with_name("curves.csv")
        if curves_path.exists():
            one_time["training_epochs"] = len(pd.read_csv(curves_path))

    est = None
    if "double-pr" in methods:
        if estimate is None:
            raise FileNotFoundError("the double-pr method needs a calibrated estimate (--estimate)")
        est = load_estimate(_require(Path(estimate), "transmission matrix estimate"))
        one_time["calibration_seconds"] = est.wall_time_seconds

    rows = []
    for i in tqdm(range(len(test_set)), desc="Benchmarking", disable=not pbar, dynamic_ncols=True):
        x = SignalVector(test_set.signals[i], mode)
        b = test_set.intensities[i]
        image = decode_slm(x, (side, side))

        for method in [m for m in METHODS if m in methods]:
            if method == "learned":
                speckle = normalize_speckle(b, net.cfg.input_side)
                time0 = time.perf_counter()
                out = forward(net, speckle, training=False)
                elapsed = time.perf_counter() - time0

                out = out.flatten()
                rows.append(
                    [
                        method,
                        i,
                        _rel_error(out, image.flatten()),
                        pixel_accuracy(binarize(out, "amplitude", (side, side)), image),
                        elapsed,
                        float("nan"),
                    ]
                )
                continue

            cfg = spec.solver._replace(seed=spec.solver.seed + i, real_signal=True)
            time0 = time.perf_counter()
            if method == "double-pr":
                sol = recover_signal(est, b, cfg)
            else:
                sol = solve(tm, b, cfg._replace(algorithm=method))
            elapsed = time.perf_counter() - time0

            aligned = align_global_phase(sol.x_hat, x)
            rows.append(
                [
                    method,
                    i,
                    _rel_error(sol.x_hat.values, x.values),
                    pixel_accuracy(binarize(aligned, mode, (side, side)), image),
                    elapsed,
                    sol.iterations_run,
                ]
            )

    df = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    summary = summarize_bench(df)

    out_dir.mkdir(parents=True, exist_ok=True)
    df.to_csv(out_dir / "bench.csv", index=False)
    report = dict(
        methods=summary.reset_index().to_dict(orient="records"),
        test_images=len(test_set),
        one_time_costs=one_time,
        note="per-image means over a synthetic test split, larger than the 5-6 images of the reference setup",
    )
    (out_dir / "bench.json").write_text(json.dumps(report, indent=2, default=float))
    return df, summary


def summarize_bench(df: pd.DataFrame) -> pd.DataFrame:
    cols = ["rel_error", "pixel_acc", "time_s", "iters"]
    return df.groupby("method", sort=False)[cols].mean()


def iteration_scaling(
    A: TransmissionMatrix,
    b: Tensor,
    cfg: SolverConfig,
    iters: tuple[int, ...] = (25, 50, 100, 200),
    repeats: int = 3,
) -> dict:
    """Per-image solver time at each iteration budget and a least-squares line through it.

    tol is forced to 0 so every run uses its full budget. The fastest of `repeats` runs is kept.
    """
    times = []
    for n_iters in iters:
        run_cfg = cfg._replace(max_iters=n_iters, tol=0.0)
        best = float("inf")
        for _ in range(repeats):
            time0 = time.perf_counter()
            solve(A, b, run_cfg)
            best = min(best, time.perf_counter() - time0)
        times.append(best)

    x, y = np.asarray(iters, dtype=np.float64), np.asarray(times)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (residual**2).sum() / total if total > 0 else 1.0
    return dict(iters=list(iters), times=times, slope=float(slope), intercept=float(intercept), r2=float(r2))


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--spec", required=True)
    parser.add_argument("--methods", nargs="+", default=["gs", "wf"])
    parser.add_argument("--checkpoint")
    parser.add_argument("--estimate")
    args = parser.parse_args()

    for k, v in vars(args).items():
        print(f"{k}: {v}")

    _, summary = run_bench(ExperimentSpec.from_json(args.spec), set(args.methods), args.checkpoint, args.estimate)
    print(summary.to_markdown())

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import Tensor
from tqdm import tqdm

from medium import TransmissionMatrix, check_intensities
from retrieval import Solution, SolverConfig, solve

logger = logging.getLogger(__name__)


@dataclass
class CalibrationSet:
    X: Tensor  # (n, k) calibration signals as columns
    B: Tensor  # (m, k) their speckle intensities as columns

    def __post_init__(self):
        if self.X.ndim != 2 or self.B.ndim != 2:
            raise ValueError("calibration signals and intensities must be 2D matrices")
        if self.X.shape[1] != self.B.shape[1]:
            raise ValueError(f"{self.X.shape[1]} calibration signals but {self.B.shape[1]} intensity vectors")
        if self.k == 0:
            raise ValueError("calibration set is empty")
        if not torch.isfinite(self.B).all() or (self.B < 0).any():
            raise ValueError("calibration intensities must be finite and nonnegative")

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]


@dataclass
class TMEstimate:
    A_hat: TransmissionMatrix
    per_column_residuals: list[float]
    failed_columns: set[int] = field(default_factory=set)
    wall_time_seconds: float = 0.0


def gaussian_calibration_set(tm: TransmissionMatrix, k: int, seed: int) -> CalibrationSet:
    if k < 1:
        raise ValueError(f"need at least one calibration pair, got {k=}")
    generator = torch.Generator().manual_seed(seed)
    X = torch.view_as_complex(torch.randn(tm.n, k, 2, generator=generator, dtype=torch.float64))
    Z = tm.adjoint() @ X
    return CalibrationSet(X, Z.real.square() + Z.imag.square())


def estimate_tm(cal: CalibrationSet, cfg: SolverConfig, n_workers: int = 1, pbar: bool = False) -> TMEstimate:
    """Estimate every column a_j from |X^* a_j|^2 = (row j of B), each column independently."""
    time0 = time.perf_counter()
    cfg.validate()
    frame = TransmissionMatrix(cal.X.to(torch.complex128))

    def solve_column(j: int) -> Solution:
        # seeded per column, independent of worker order
        return solve(frame, cal.B[j], cfg._replace(seed=cfg.seed ^ j))

    columns = range(cal.m)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            solutions = list(tqdm(pool.map(solve_column, columns), total=cal.m, disable=not pbar, dynamic_ncols=True))
    else:
        solutions = [solve_column(j) for j in tqdm(columns, desc="Calibrating", disable=not pbar, dynamic_ncols=True)]

    residuals = [sol.residual_history[-1] for sol in solutions]
    failed = {j for j, res in enumerate(residuals) if res > 10 * cfg.tol}

    rank = torch.linalg.matrix_rank(frame.entries).item()
    if rank < cal.n:
        # fewer independent calibration signals than unknowns: no column is identifiable
        logger.warning(f"Calibration frame has rank {rank} < n={cal.n}. Every column is marked failed")
        failed = set(columns)
    elif failed:
        logger.warning(f"{len(failed)}/{cal.m} calibration columns did not reach residual {10 * cfg.tol:g}")

    A_hat = torch.stack([sol.x_hat.complex() for sol in solutions], dim=1)
    return TMEstimate(TransmissionMatrix(A_hat), residuals, failed, time.perf_counter() - time0)


def recover_signal(est: TMEstimate, b: Tensor, cfg: SolverConfig) -> Solution:
    A_hat = est.A_hat
    b = check_intensities(b, A_hat.m)
    if not est.failed_columns:
        return solve(A_hat, b, cfg)

    keep = [j for j in range(A_hat.m) if j not in est.failed_columns]
    if not keep:
        raise RuntimeError("every calibration column failed, the signal is unrecoverable")
    A_kept = TransmissionMatrix(A_hat.entries[:, keep], A_hat.seed)
    return solve(A_kept, b[keep], cfg)


def save_estimate(path: str | Path, est: TMEstimate):
    from data.formats import save_tm

    path = Path(path)
    save_tm(path, est.A_hat)
    meta = dict(
        per_column_residuals=est.per_column_residuals,
        failed_columns=sorted(est.failed_columns),
        calibration_seconds=est.wall_time_seconds,
    )
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2))


def load_estimate(path: str | Path) -> TMEstimate:
    from data.formats import load_tm

    path = Path(path)
    meta_path = path.with_suffix(".json")
    if not meta_path.exists():
        raise FileNotFoundError(f"missing calibration sidecar {meta_path}")
    meta = json.loads(meta_path.read_text())
    return TMEstimate(
        load_tm(path),
        meta["per_column_residuals"],
        set(meta["failed_columns"]),
        meta.get("calibration_seconds", 0.0),
    )

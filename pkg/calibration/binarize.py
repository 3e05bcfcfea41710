import logging
import math

import torch
from torch import Tensor

from medium import SignalVector, SLMMode

logger = logging.getLogger(__name__)


def _two_means_threshold(values: Tensor, max_iters: int = 100) -> float:
    lo, hi = values.min(), values.max()
    if lo == hi:
        # one cluster only. any positive level is "on", zero or below is "off"
        logger.warning(f"Binarize: constant signal {lo.item():g}, thresholding at half its level")
        return (lo / 2).item()

    for _ in range(max_iters):
        threshold = (lo + hi) / 2
        upper = values > threshold
        if upper.all() or not upper.any():
            break
        new_lo, new_hi = values[~upper].mean(), values[upper].mean()
        if new_lo == lo and new_hi == hi:
            return threshold.item()
        lo, hi = new_lo, new_hi

    threshold = values.median().item()
    logger.warning(f"Binarize: two-means clustering did not converge, falling back to median threshold {threshold:g}")
    return threshold


def binarize(x_hat: SignalVector | Tensor, mode: SLMMode, shape: tuple[int, int] | None = None) -> Tensor:
    values = x_hat.values if isinstance(x_hat, SignalVector) else x_hat
    n = values.shape[0]
    if shape is None:
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError(f"signal of length {n} is not a square image, pass shape explicitly")
        shape = (side, side)

    if values.is_complex():
        peak = values.abs().max()
        n_flagged = (values.imag.abs() > 0.3 * peak).sum().item()
        if n_flagged:
            logger.warning(f"Binarize: {n_flagged} pixels keep a large imaginary part after phase alignment")
        values = values.real
    values = values.to(torch.float64)

    if mode == "amplitude":
        pixels = values > _two_means_threshold(values)
    elif mode == "phase":
        # + -> 0, - -> 1
        pixels = values < 0
    else:
        raise ValueError(f"Unsupported SLM {mode=}")
    return pixels.to(torch.float64).reshape(shape)


def pixel_accuracy(grid: Tensor, ref_grid: Tensor) -> float:
    if grid.shape != ref_grid.shape:
        raise ValueError(f"grid shapes differ: {tuple(grid.shape)} vs {tuple(ref_grid.shape)}")
    return (grid == ref_grid).to(torch.float64).mean().item()

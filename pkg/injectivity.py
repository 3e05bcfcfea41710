# Exhaustive collision search for the intensity map x -> |A^* x|^2 over small signal spaces,
# taken modulo the global sign (real) or phase (complex).

import logging
from dataclasses import dataclass, field
from typing import Literal

import torch
from torch import Tensor
from tqdm import tqdm

from medium import gen_real_frame, gen_transmission_matrix

logger = logging.getLogger(__name__)

Field = Literal["real", "complex"]
SignalSpace = Literal["binary", "sign", "zero", "sphere"]


@dataclass
class InjectivityReport:
    n: int
    m: int
    field: Field
    signal_space: str
    num_classes: int
    colliding_pairs: int
    min_gap: float  # smallest l-inf intensity gap over compared pairs, inf when there are none
    tolerance: float
    per_frame_collisions: list[int] = field(default_factory=list)

    @property
    def injective(self) -> bool:
        return self.colliding_pairs == 0


def _count_classes(n: int, field: Field, space: SignalSpace, net_size: int) -> int:
    if space == "binary":
        return 2**n
    if space == "sign":
        return 2 ** (n - 1)
    if space == "zero":
        return 1
    if space == "sphere":
        return net_size ** (n if field == "real" else 2 * n)  # upper bound before deduplication
    raise ValueError(f"Unsupported {space=}")


def _canonical(x: Tensor) -> Tensor:
    # first nonzero coordinate made real positive
    first = (x.abs() > 1e-12).to(torch.int64).argmax(1, keepdim=True)
    pivot = x.gather(1, first)
    phase = pivot / pivot.abs().clamp_min(1e-300)
    return x * phase.conj() if x.is_complex() else x * phase.sign()


def enumerate_classes(n: int, field: Field, space: SignalSpace, net_size: int = 8) -> Tensor:
    """One representative per class of the signal space, as rows."""
    if space in ("binary", "sign"):
        bits = (torch.arange(2**n)[:, None] >> torch.arange(n - 1, -1, -1)) & 1
        X = bits.to(torch.float64)
        if space == "sign":
            X = 1 - 2 * X
            X = X[X[:, 0] > 0]  # x and -x are one class
    elif space == "zero":
        X = torch.zeros(1, n, dtype=torch.float64)
    elif space == "sphere":
        dims = n if field == "real" else 2 * n
        axis = torch.linspace(-1, 1, net_size, dtype=torch.float64)
        grid = torch.cartesian_prod(*[axis] * dims).reshape(-1, dims)
        grid = grid[grid.norm(dim=1) > 1e-12]
        if field == "complex":
            grid = torch.view_as_complex(grid.reshape(-1, n, 2).contiguous())
        X = _canonical(grid / grid.norm(dim=1, keepdim=True))
        # grid points on one ray are the same net point
        key = torch.view_as_real(X).flatten(1) if X.is_complex() else X
        _, idx = torch.unique(key.mul(1e9).round(), dim=0, return_inverse=True)
        first = torch.full((int(idx.max()) + 1,), len(idx), dtype=torch.int64).scatter_reduce(
            0, idx, torch.arange(len(idx)), "amin"
        )
        X = X[first.sort().values]
    else:
        raise ValueError(f"Unsupported {space=}")

    return X.to(torch.complex128) if field == "complex" else X


def _quotient_distance(x: Tensor, Y: Tensor) -> Tensor:
    # min over unit-modulus c of ||x - cY||
    inner = (Y.conj() @ x) if Y.is_complex() else Y @ x
    sq = x.abs().square().sum() + Y.abs().square().sum(1) - 2 * inner.abs()
    return sq.clamp_min(0).sqrt()


def _scan(B: Tensor, X: Tensor, tolerance: float, separation: float, chunk: int) -> tuple[int, float]:
    collisions = 0
    min_gap = float("inf")
    C = B.shape[0]
    for start in range(0, C - 1, chunk):
        rows = B[start : start + chunk]
        gaps = torch.cdist(rows, B[start:], p=float("inf"))
        # keep pairs (i, j) with i < j
        i = torch.arange(rows.shape[0])[:, None]
        j = torch.arange(C - start)[None, :]
        valid = j > i
        if separation > 0:
            dist = torch.stack([_quotient_distance(X[start + r], X[start:]) for r in range(rows.shape[0])])
            valid &= dist >= separation
        if valid.any():
            pair_gaps = gaps[valid]
            collisions += int((pair_gaps <= tolerance).sum())
            min_gap = min(min_gap, pair_gaps.min().item())
    return collisions, min_gap


def empirical_injectivity(
    n: int,
    m: int,
    field: Field = "real",
    signal_space: SignalSpace = "binary",
    seed: int = 0,
    tolerance: float = 1e-9,
    net_size: int = 8,
    separation: float = 0.0,
    max_classes: int = 10**6,
    frames: int = 1,
    pbar: bool = False,
) -> InjectivityReport:
    """Count pairs of distinct signal classes whose intensities agree within `tolerance` (l-inf).

    Frame f is generated from seed + f, and frames with the same seed nest in m. With a sphere net,
    `separation` skips pairs closer than that in the quotient metric, since neighbouring net points
    have nearby intensities whether or not the map is injective.
    """
    if n < 1 or m < 1 or frames < 1:
        raise ValueError(f"invalid sizes {n=}, {m=}, {frames=}")
    if field not in ("real", "complex"):
        raise ValueError(f"Unsupported {field=}")
    bound = _count_classes(n, field, signal_space, net_size)
    if bound > max_classes:
        raise ValueError(f"signal space {signal_space} with {n=} has up to {bound:,} classes, limit is {max_classes:,}")

    X = enumerate_classes(n, field, signal_space, net_size)
    chunk = max(1, 4_000_000 // max(len(X) * m, 1))

    per_frame = []
    min_gap = float("inf")
    for f in tqdm(range(frames), desc="Frames", disable=not pbar, dynamic_ncols=True):
        if field == "real":
            B = (X @ gen_real_frame(n, m, seed + f)).square()
        else:
            Z = X @ gen_transmission_matrix(n, m, seed + f).entries.conj()
            B = Z.real.square() + Z.imag.square()
        collisions, gap = _scan(B, X, tolerance, separation, chunk)
        per_frame.append(collisions)
        min_gap = min(min_gap, gap)

    report = InjectivityReport(n, m, field, signal_space, len(X), sum(per_frame), min_gap, tolerance, per_frame)
    logger.info(f"{report}")
    return report

import math
from dataclasses import dataclass

import torch
from torch import Tensor

from .slm import SignalVector


@dataclass(frozen=True)
class TransmissionMatrix:
    """Complex n x m matrix whose column j is the sensitivity vector a_j of sensor pixel j.

    Measurements use the conjugate transpose: b_j = |a_j^* x|^2. `seed` is 0 for matrices
    that were not generated here (loaded from disk, estimated by calibration).
    """

    entries: Tensor
    seed: int = 0

    def __post_init__(self):
        if self.entries.ndim != 2 or min(self.entries.shape) < 1:
            raise ValueError(f"transmission matrix must be n x m with n, m >= 1, got {tuple(self.entries.shape)}")
        if not torch.isfinite(self.entries).all():
            raise ValueError("transmission matrix has non-finite entries")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1]

    def adjoint(self) -> Tensor:
        return self.entries.to(torch.complex128).mH


def _check_dims(n: int, m: int):
    if n < 1 or m < 1:
        raise ValueError(f"dimensions must be positive, got {n=}, {m=}")


def gen_transmission_matrix(n: int, m: int, seed: int) -> TransmissionMatrix:
    _check_dims(n, m)
    generator = torch.Generator().manual_seed(seed)

    # draw column by column so that a matrix with more sensor pixels extends one with fewer
    std = math.sqrt(1 / (2 * n))
    columns = [torch.randn(n, 2, generator=generator, dtype=torch.float64) for _ in range(m)]
    entries = torch.view_as_complex(torch.stack(columns) * std)  # (m, n), column j contiguous
    return TransmissionMatrix(entries.mT, seed)


def gen_real_frame(n: int, m: int, seed: int) -> Tensor:
    _check_dims(n, m)
    generator = torch.Generator().manual_seed(seed)
    columns = [torch.randn(n, generator=generator, dtype=torch.float64) for _ in range(m)]
    return torch.stack(columns).mT / math.sqrt(n)


def check_intensities(b: Tensor, m: int | None = None) -> Tensor:
    if b.ndim != 1:
        raise ValueError(f"intensities must be a vector, got shape {tuple(b.shape)}")
    if m is not None and b.shape[0] != m:
        raise ValueError(f"expected {m} intensities, got {b.shape[0]}")
    if b.is_complex() or not torch.isfinite(b).all():
        raise ValueError("intensities must be finite real values")
    if (b < 0).any():
        raise ValueError("intensities must be nonnegative")
    return b.to(torch.float64)


def measure(A: TransmissionMatrix, x: SignalVector) -> Tensor:
    if x.n != A.n:
        raise ValueError(f"signal length {x.n} does not match transmission matrix with n={A.n}")
    z = A.adjoint() @ x.complex()
    return z.real.square() + z.imag.square()

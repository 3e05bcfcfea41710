import logging
import math
import time
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import torch
from torch import Tensor

from medium import SignalVector, TransmissionMatrix, check_intensities

logger = logging.getLogger(__name__)


class SolverConfig(NamedTuple):
    algorithm: Literal["gs", "wf"] = "wf"
    max_iters: int = 500
    tol: float = 1e-10
    wf_t0: float = 330.0
    wf_mu_max: float = 0.4
    power_iters: int = 50
    seed: int = 0
    real_signal: bool = False

    def validate(self):
        if self.algorithm not in ("gs", "wf"):
            raise ValueError(f"Unsupported {self.algorithm=}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if self.wf_t0 <= 0 or self.wf_mu_max <= 0:
            raise ValueError(f"WF step constants must be positive, got {self.wf_t0=}, {self.wf_mu_max=}")
        if self.power_iters < 0:
            raise ValueError(f"power_iters must be >= 0, got {self.power_iters}")
        return self


@dataclass
class Solution:
    x_hat: SignalVector
    iterations_run: int
    residual_history: list[float] = field(default_factory=list)
    wall_time_seconds: float = 0.0


def _residual(z: Tensor, b: Tensor, b_norm: Tensor) -> float:
    # relative l2 residual on intensities. absolute when b = 0
    diff = torch.linalg.vector_norm(z.real.square() + z.imag.square() - b)
    return (diff / b_norm if b_norm > 0 else diff).item()


def relative_residual(A: TransmissionMatrix, x: SignalVector | Tensor, b: Tensor) -> float:
    values = x.values if isinstance(x, SignalVector) else x
    z = A.adjoint() @ values.to(torch.complex128)
    return _residual(z, b.to(torch.float64), torch.linalg.vector_norm(b.to(torch.float64)))


def _check_problem(A: TransmissionMatrix, b: Tensor, cfg: SolverConfig) -> Tensor:
    cfg.validate()
    return check_intensities(b, A.m)


def _random_start(n: int, generator: torch.Generator, real: bool) -> Tensor:
    if real:
        x = torch.randn(n, generator=generator, dtype=torch.float64).to(torch.complex128)
    else:
        x = torch.view_as_complex(torch.randn(n, 2, generator=generator, dtype=torch.float64))
    return x / torch.linalg.vector_norm(x)


def _realify(x: Tensor) -> Tensor:
    # rotate by the global phase that puts the most energy on the real axis, then drop the imaginary part
    s = (x * x).sum()
    c = torch.exp(-0.5j * torch.angle(s)) if s.abs() > 0 else 1.0
    return (c * x).real.to(torch.complex128)


def _phase(z: Tensor) -> Tensor:
    return torch.where(z == 0, torch.ones_like(z), torch.sgn(z))


class _Pinv:
    """Applies pinv(A^*) through a QR factorization computed once."""

    def __init__(self, AH: Tensor) -> None:
        m, n = AH.shape
        self.tall = m >= n
        if self.tall:
            # A^* = QR, pinv(A^*) y = R^-1 Q^* y
            self.Q, self.R = torch.linalg.qr(AH)
        else:
            # A = QR, pinv(A^*) y = Q R^-* y
            self.Q, self.R = torch.linalg.qr(AH.mH)

    def __call__(self, y: Tensor) -> Tensor:
        if self.tall:
            rhs = (self.Q.mH @ y).unsqueeze(-1)
            return torch.linalg.solve_triangular(self.R, rhs, upper=True).squeeze(-1)
        rhs = y.unsqueeze(-1)
        return self.Q @ torch.linalg.solve_triangular(self.R.mH, rhs, upper=False).squeeze(-1)


def gs_update(A: TransmissionMatrix, b: Tensor, x: SignalVector | Tensor) -> Tensor:
    """One Gerchberg-Saxton iteration x -> pinv(A^*)(sqrt(b) * phase(A^* x))."""
    values = x.values if isinstance(x, SignalVector) else x
    AH = A.adjoint()
    return _Pinv(AH)(b.to(torch.float64).sqrt() * _phase(AH @ values.to(torch.complex128)))


def _signal(x: Tensor, real: bool) -> SignalVector:
    return SignalVector(x.real, "free_real") if real else SignalVector(x, "free_complex")


def gs_solve(A: TransmissionMatrix, b: Tensor, cfg: SolverConfig = SolverConfig(algorithm="gs")) -> Solution:
    time0 = time.perf_counter()
    b = _check_problem(A, b, cfg)
    AH = A.adjoint()
    pinv = _Pinv(AH)
    sqrt_b = b.sqrt()
    b_norm = torch.linalg.vector_norm(b)

    generator = torch.Generator().manual_seed(cfg.seed)
    x = _random_start(A.n, generator, cfg.real_signal)
    z = AH @ x
    history = []

    for _ in range(cfg.max_iters):
        x = pinv(sqrt_b * _phase(z))
        if cfg.real_signal:
            x = _realify(x)
        z = AH @ x
        history.append(_residual(z, b, b_norm))
        if history[-1] <= cfg.tol:
            break

    return Solution(_signal(x, cfg.real_signal), len(history), history, time.perf_counter() - time0)


def wf_spectral_init(A: TransmissionMatrix, b: Tensor, power_iters: int = 50, seed: int = 0) -> SignalVector:
    b = check_intensities(b, A.m)
    if b.sum() == 0:
        logger.warning("All intensities are zero. Spectral initialization is degenerate, returning zero signal")
        return SignalVector(torch.zeros(A.n, dtype=torch.complex128))

    AH = A.adjoint()
    entries = AH.mH
    generator = torch.Generator().manual_seed(seed)
    v = _random_start(A.n, generator, real=False)

    # leading eigenvector of Y = (1/m) sum_j b_j a_j a_j^*, never formed explicitly
    for _ in range(power_iters):
        v = entries @ (b * (AH @ v)) / A.m
        v = v / torch.linalg.vector_norm(v)

    col_energy = AH.real.square().sum() + AH.imag.square().sum()
    scale = math.sqrt(b.sum().item() / col_energy.item()) * math.sqrt(A.n)
    return SignalVector(scale * v)


def wf_gradient(A: TransmissionMatrix, b: Tensor, x: SignalVector | Tensor) -> Tensor:
    """Wirtinger gradient df/d(conj x) of f(x) = (1/2m) sum_j (|a_j^* x|^2 - b_j)^2.

    The real gradient with respect to (Re x, Im x), packed as Re + i Im, is twice this.
    """
    values = x.values if isinstance(x, SignalVector) else x
    AH = A.adjoint()
    z = AH @ values.to(torch.complex128)
    r = z.real.square() + z.imag.square() - b.to(torch.float64)
    return AH.mH @ (r * z) / A.m


def wf_solve(A: TransmissionMatrix, b: Tensor, cfg: SolverConfig = SolverConfig()) -> Solution:
    time0 = time.perf_counter()
    b = _check_problem(A, b, cfg)
    AH = A.adjoint()
    entries = AH.mH
    b_norm = torch.linalg.vector_norm(b)

    x = wf_spectral_init(A, b, cfg.power_iters, cfg.seed).values
    if cfg.real_signal:
        x = _realify(x)
    z = AH @ x
    norm0_sq = x.real.square().sum() + x.imag.square().sum()
    if norm0_sq == 0:
        history = [_residual(z, b, b_norm)]
        return Solution(_signal(x, cfg.real_signal), 1, history, time.perf_counter() - time0)

    # the step mu_t / ||x0||^2 assumes standard Gaussian columns. kappa is the per-entry power of the frame,
    # 1 for standard Gaussian columns and 1/n for the media generated here.
    kappa = (AH.real.square().sum() + AH.imag.square().sum()) / (A.m * A.n)
    step_scale = 1 / (norm0_sq * kappa**2)
    history = []

    for t in range(1, cfg.max_iters + 1):
        r = z.real.square() + z.imag.square() - b
        grad = entries @ (r * z) / A.m
        mu = min(1 - math.exp(-t / cfg.wf_t0), cfg.wf_mu_max)
        x = x - mu * step_scale * grad
        if cfg.real_signal:
            x = _realify(x)
        z = AH @ x
        history.append(_residual(z, b, b_norm))
        if history[-1] <= cfg.tol:
            break

    return Solution(_signal(x, cfg.real_signal), len(history), history, time.perf_counter() - time0)


def solve(A: TransmissionMatrix, b: Tensor, cfg: SolverConfig) -> Solution:
    if cfg.algorithm == "gs":
        return gs_solve(A, b, cfg)
    elif cfg.algorithm == "wf":
        return wf_solve(A, b, cfg)
    raise ValueError(f"Unsupported {cfg.algorithm=}")

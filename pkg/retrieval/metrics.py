import torch
from torch import Tensor

from medium import SignalVector


def _as_tensor(x: SignalVector | Tensor) -> Tensor:
    return x.values if isinstance(x, SignalVector) else x


def _optimal_phase(x_est: Tensor, x_ref: Tensor) -> Tensor:
    # unit c minimizing ||x_est - c x_ref||. sign of the dot product for real pairs, 1 when orthogonal
    if x_est.shape != x_ref.shape:
        raise ValueError(f"signal lengths differ: {tuple(x_est.shape)} vs {tuple(x_ref.shape)}")
    if x_est.is_complex() or x_ref.is_complex():
        inner = torch.vdot(x_ref.to(torch.complex128), x_est.to(torch.complex128))
    else:
        inner = torch.dot(x_ref.to(torch.float64), x_est.to(torch.float64))
    if inner.abs() == 0:
        return torch.ones((), dtype=inner.dtype)
    return inner / inner.abs()


def relative_error(x_est: SignalVector | Tensor, x_ref: SignalVector | Tensor) -> float:
    x_est, x_ref = _as_tensor(x_est), _as_tensor(x_ref)
    ref_norm = torch.linalg.vector_norm(x_ref)
    if ref_norm == 0:
        raise ValueError("relative error is undefined for a zero reference signal")
    c = _optimal_phase(x_est, x_ref)
    return (torch.linalg.vector_norm(x_est - c * x_ref) / ref_norm).item()


def align_global_phase(x_est: SignalVector | Tensor, x_ref: SignalVector | Tensor) -> SignalVector:
    est, ref = _as_tensor(x_est), _as_tensor(x_ref)
    aligned = _optimal_phase(est, ref).conj() * est
    return SignalVector(aligned, "free_complex" if aligned.is_complex() else "free_real")

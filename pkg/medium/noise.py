from typing import Literal, NamedTuple

import torch
from torch import Tensor

from .transmission import check_intensities


class NoiseModel(NamedTuple):
    kind: Literal["none", "gaussian"] = "none"
    sigma: float = 0.0
    seed: int = 0


def add_noise(b: Tensor, model: NoiseModel) -> Tensor:
    b = check_intensities(b)
    if model.sigma < 0:
        raise ValueError(f"noise sigma must be nonnegative, got {model.sigma}")

    if model.kind == "none":
        return b
    elif model.kind == "gaussian":
        generator = torch.Generator().manual_seed(model.seed)
        noise = torch.randn(b.shape, generator=generator, dtype=torch.float64) * model.sigma
        return (b + noise).clamp_min(0)
    raise ValueError(f"Unsupported noise {model.kind=}")

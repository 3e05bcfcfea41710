from dataclasses import dataclass
from typing import Literal

import torch
from torch import Tensor

# amplitude: pixels fully off/on {0, 1}. phase: phases {0, pi} stored as real signs {+1, -1}.
SLMMode = Literal["amplitude", "phase", "free_complex", "free_real"]

_ALPHABETS = dict(amplitude=(0.0, 1.0), phase=(-1.0, 1.0))


@dataclass(frozen=True)
class SignalVector:
    values: Tensor
    mode: SLMMode = "free_complex"

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.numel() == 0:
            raise ValueError(f"signal must be a non-empty vector, got shape {tuple(self.values.shape)}")
        if self.mode not in ("amplitude", "phase", "free_complex", "free_real"):
            raise ValueError(f"Unsupported {self.mode=}")

        if self.mode in _ALPHABETS:
            values = self.values
            if values.is_complex():
                if values.imag.abs().max() > 0:
                    raise ValueError(f"{self.mode} SLM signals must be real")
                values = values.real
            lo, hi = _ALPHABETS[self.mode]
            if not ((values == lo) | (values == hi)).all():
                raise ValueError(f"{self.mode} SLM signals must take values in {{{lo:g}, {hi:g}}}")
        elif self.mode == "free_real" and self.values.is_complex():
            raise ValueError("free_real signals must have a real dtype")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def is_real(self) -> bool:
        return not self.values.is_complex()

    def complex(self) -> Tensor:
        return self.values.to(torch.complex128)


def _check_binary(image: Tensor):
    if image.ndim != 2:
        raise ValueError(f"image must be a 2D grid, got shape {tuple(image.shape)}")
    if not ((image == 0) | (image == 1)).all():
        raise ValueError("SLM images must be binary (every pixel 0 or 1)")


def encode_slm(image: Tensor, mode: SLMMode) -> SignalVector:
    _check_binary(image)
    pixels = image.to(torch.float64).reshape(-1)  # row-major raster

    if mode == "amplitude":
        return SignalVector(pixels.clone(), mode)
    elif mode == "phase":
        return SignalVector(1.0 - 2.0 * pixels, mode)
    raise ValueError(f"Unsupported SLM {mode=}")


def decode_slm(signal: SignalVector, shape: tuple[int, int]) -> Tensor:
    if signal.mode == "amplitude":
        pixels = signal.values.real if signal.values.is_complex() else signal.values
    elif signal.mode == "phase":
        pixels = (1.0 - signal.values.real) / 2
    else:
        raise ValueError(f"cannot decode a {signal.mode} signal into an SLM image")
    return pixels.to(torch.float64).reshape(shape)

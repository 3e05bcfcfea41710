import bisect
from typing import Sequence

import torch
from torch import Tensor

# intensity vectors are the same speckle when every entry agrees to this relative gap
INTENSITY_RTOL = 1e-9


def _same_intensity(b1: Tensor, b2: Tensor) -> bool:
    if b1.shape != b2.shape:
        return False
    return bool(((b1 - b2).abs() <= INTENSITY_RTOL * torch.maximum(b1.abs(), b2.abs())).all())


def sift_dataset(pairs: Sequence[tuple[Tensor, Tensor]]) -> list[tuple[Tensor, Tensor]]:
    """Keep the first occurrence of every distinct image and every distinct speckle, in order.

    A pair is dropped when its image or its intensity vector was already kept, so the map from
    kept speckles to kept images stays injective.
    """
    seen_images = set()
    # kept intensity vectors sorted by their sum. a kept vector equal to an incoming one of sum s has
    # its sum within rtol * s / (1 - rtol) of s, so only that window needs an elementwise comparison.
    sums: list[float] = []
    kept_b: list[Tensor] = []
    out = []

    for image, b in pairs:
        key = (tuple(image.shape), image.to(torch.float64).numpy().tobytes())
        if key in seen_images:
            continue

        b64 = b.to(torch.float64)
        total = b64.abs().sum().item()
        gap = INTENSITY_RTOL * total / (1 - INTENSITY_RTOL)
        lo = bisect.bisect_left(sums, total - gap)
        hi = bisect.bisect_right(sums, total + gap)
        if any(_same_intensity(b64, kept_b[i]) for i in range(lo, hi)):
            continue

        seen_images.add(key)
        pos = bisect.bisect_right(sums, total)
        sums.insert(pos, total)
        kept_b.insert(pos, b64)
        out.append((image, b))

    return out

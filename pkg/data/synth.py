import json
import logging
import math
from pathlib import Path
from typing import Literal, NamedTuple

import torch
from torch import Tensor
from tqdm import tqdm

from calibration import gaussian_calibration_set, sift_dataset
from medium import NoiseModel, SLMMode, add_noise, encode_slm, gen_transmission_matrix, measure
from retrieval import SolverConfig
from tcnn import NetworkConfig

from .formats import SpeckleSet, save_set, save_tm
from .glyphs import GLYPHS, render_glyph

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


class MediumSpec(NamedTuple):
    n: int
    m: int
    seed: int = 0


class DatasetSpec(NamedTuple):
    image_side: int
    slm_mode: SLMMode = "amplitude"
    train: int = 0
    val: int = 0
    test: int = 50
    calibration: int = 0  # complex-Gaussian calibration pairs, written only when > 0
    pattern: Literal["random", "glyphs"] = "random"
    seed: int = 0


class ExperimentSpec(NamedTuple):
    medium: MediumSpec
    dataset: DatasetSpec
    solver: SolverConfig = SolverConfig()
    network: NetworkConfig = NetworkConfig()
    noise: NoiseModel = NoiseModel()
    out_dir: str = "runs/speckle"

    def validate(self):
        ds = self.dataset
        if ds.image_side**2 != self.medium.n:
            raise ValueError(f"{ds.image_side}x{ds.image_side} images do not have n={self.medium.n} pixels")
        if ds.slm_mode not in ("amplitude", "phase"):
            raise ValueError(f"datasets are SLM images, got {ds.slm_mode=}")
        if ds.pattern not in ("random", "glyphs"):
            raise ValueError(f"Unsupported {ds.pattern=}")
        if min(ds.train, ds.val, ds.test, ds.calibration) < 0:
            raise ValueError(f"split sizes must be nonnegative, got {ds}")
        self.solver.validate()
        return self

    def check_network_shapes(self):
        side = math.isqrt(self.medium.m)
        if side * side != self.medium.m:
            raise ValueError(f"network experiments need a square speckle, m={self.medium.m} is not a perfect square")
        if self.network.input_side != side or self.network.output_side != self.dataset.image_side:
            raise ValueError(
                f"network maps {self.network.input_side}^2 -> {self.network.output_side}^2, "
                f"the data is {side}^2 -> {self.dataset.image_side}^2"
            )

    def to_dict(self) -> dict:
        return {k: v._asdict() if hasattr(v, "_asdict") else v for k, v in self._asdict().items()}

    @staticmethod
    def from_dict(d: dict) -> "ExperimentSpec":
        return ExperimentSpec(
            medium=MediumSpec(**d["medium"]),
            dataset=DatasetSpec(**d["dataset"]),
            solver=SolverConfig(**d.get("solver", {})),
            network=NetworkConfig(**d.get("network", {})),
            noise=NoiseModel(**d.get("noise", {})),
            out_dir=d.get("out_dir", "runs/speckle"),
        )

    @staticmethod
    def from_json(path: str | Path) -> "ExperimentSpec":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"experiment spec not found: {path}")
        return ExperimentSpec.from_dict(json.loads(path.read_text()))


def sample_images(ds: DatasetSpec, count: int, generator: torch.Generator) -> Tensor:
    side = ds.image_side
    if ds.pattern == "random":
        return torch.randint(0, 2, (count, side, side), generator=generator).to(torch.float64)

    chars = sorted(GLYPHS)
    idx = torch.randint(len(chars), (count,), generator=generator).tolist()
    return torch.stack([render_glyph(chars[i], side) for i in idx]) if count else torch.zeros(0, side, side)


def gen_dataset(spec: ExperimentSpec, pbar: bool = False) -> dict[str, Path]:
    """Write medium.bin, the train/val/test (and optional calibration) sets and spec.json under spec.out_dir."""
    spec.validate()
    ds = spec.dataset
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = dict(medium=out_dir / "medium.bin", spec=out_dir / "spec.json")

    tm = gen_transmission_matrix(spec.medium.n, spec.medium.m, spec.medium.seed)
    save_tm(paths["medium"], tm)

    generator = torch.Generator().manual_seed(ds.seed)
    requested = dict(train=ds.train, val=ds.val, test=ds.test)
    images = sample_images(ds, sum(requested.values()), generator)

    pairs = []
    for i, image in enumerate(tqdm(images, desc="Measuring", disable=not pbar, dynamic_ncols=True)):
        b = measure(tm, encode_slm(image, ds.slm_mode))
        pairs.append((image, add_noise(b, spec.noise._replace(seed=spec.noise.seed + i))))
    kept = sift_dataset(pairs)

    # splits are filled in order from the sifted stream, so test images never repeat train/val images
    start = 0
    for split in SPLITS:
        chunk = kept[start : start + requested[split]]
        start += len(chunk)
        if len(chunk) < requested[split]:
            logger.warning(f"Sifting left {len(chunk)}/{requested[split]} pairs for the {split} split")

        signals = [encode_slm(image, ds.slm_mode).values for image, _ in chunk]
        intensities = [b for _, b in chunk]
        n, m = spec.medium.n, spec.medium.m
        speckle_set = SpeckleSet(
            torch.stack(signals) if signals else torch.zeros(0, n, dtype=torch.float64),
            torch.stack(intensities) if intensities else torch.zeros(0, m, dtype=torch.float64),
            ds.slm_mode,
        )
        paths[split] = out_dir / f"{split}.bin"
        save_set(paths[split], speckle_set)

    if ds.calibration > 0:
        cal = gaussian_calibration_set(tm, ds.calibration, ds.seed + 1)
        B = torch.stack(
            [add_noise(b, spec.noise._replace(seed=spec.noise.seed + len(images) + j)) for j, b in enumerate(cal.B.mT)]
        )
        paths["calibration"] = out_dir / "calibration.bin"
        save_set(paths["calibration"], SpeckleSet(cal.X.mT.contiguous(), B, "free_complex"))

    paths["spec"].write_text(json.dumps(spec.to_dict(), indent=2))
    return paths

# Little-endian binary codecs for media (SPKLTM01) and signal/speckle sets (SPKLSET1).

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import Tensor

from calibration import CalibrationSet
from medium import SLMMode, TransmissionMatrix

TM_MAGIC = b"SPKLTM01"
SET_MAGIC = b"SPKLSET1"
_TM_HEADER = struct.Struct("<8sIIQ")
_SET_HEADER = struct.Struct("<8sIIIBB")
_MODE_CODES: dict[str, int] = dict(amplitude=0, phase=1, free_real=2, free_complex=3)


def _read(path: str | Path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    return path.read_bytes()


def _f64(data: bytes, offset: int, count: int, path) -> np.ndarray:
    if len(data) - offset != count * 8:
        raise ValueError(f"{path}: expected {count * 8} payload bytes, found {len(data) - offset}")
    return np.frombuffer(data, dtype="<f8", offset=offset, count=count)


def save_tm(path: str | Path, tm: TransmissionMatrix):
    entries = tm.entries.to(torch.complex128)
    # column-major, each entry as (re, im)
    payload = torch.view_as_real(entries.mT.contiguous()).numpy().astype("<f8").tobytes()
    Path(path).write_bytes(_TM_HEADER.pack(TM_MAGIC, tm.n, tm.m, tm.seed) + payload)


def load_tm(path: str | Path) -> TransmissionMatrix:
    data = _read(path)
    if len(data) < _TM_HEADER.size or data[:8] != TM_MAGIC:
        raise ValueError(f"{path} is not a SPKLTM01 file")
    _, n, m, seed = _TM_HEADER.unpack_from(data)

    values = _f64(data, _TM_HEADER.size, 2 * n * m, path)
    entries = torch.view_as_complex(torch.from_numpy(values.copy()).view(m, n, 2))
    return TransmissionMatrix(entries.mT.contiguous(), seed)


@dataclass
class SpeckleSet:
    """k signals (rows of `signals`) and the speckle intensities they produced (rows of `intensities`)."""

    signals: Tensor  # (k, n), float64 or complex128
    intensities: Tensor  # (k, m)
    mode: SLMMode = "amplitude"

    def __post_init__(self):
        if self.mode not in _MODE_CODES:
            raise ValueError(f"Unsupported {self.mode=}")
        if self.signals.ndim != 2 or self.intensities.ndim != 2 or len(self.signals) != len(self.intensities):
            raise ValueError(
                f"signals {tuple(self.signals.shape)} and intensities {tuple(self.intensities.shape)} do not pair up"
            )

    def __len__(self) -> int:
        return self.signals.shape[0]

    @property
    def n(self) -> int:
        return self.signals.shape[1]

    @property
    def m(self) -> int:
        return self.intensities.shape[1]

    def calibration_set(self) -> CalibrationSet:
        return CalibrationSet(self.signals.mT.to(torch.complex128), self.intensities.mT.to(torch.float64))


def save_set(path: str | Path, ds: SpeckleSet):
    is_complex = ds.signals.is_complex()
    k, n, m = len(ds), ds.n, ds.m
    header = _SET_HEADER.pack(SET_MAGIC, k, n, m, _MODE_CODES[ds.mode], int(is_complex))

    signals = torch.view_as_real(ds.signals).reshape(k, 2 * n) if is_complex else ds.signals
    records = torch.cat([signals.to(torch.float64), ds.intensities.to(torch.float64)], dim=1)
    Path(path).write_bytes(header + records.numpy().astype("<f8").tobytes())


def load_set(path: str | Path) -> SpeckleSet:
    data = _read(path)
    if len(data) < _SET_HEADER.size or data[:8] != SET_MAGIC:
        raise ValueError(f"{path} is not a SPKLSET1 file")
    _, k, n, m, mode_code, is_complex = _SET_HEADER.unpack_from(data)
    modes = {code: name for name, code in _MODE_CODES.items()}
    if mode_code not in modes:
        raise ValueError(f"{path}: unknown slm_mode code {mode_code}")

    width = (2 * n if is_complex else n) + m
    records = torch.from_numpy(_f64(data, _SET_HEADER.size, k * width, path).copy()).view(k, width)
    signals = records[:, : width - m]
    if is_complex:
        signals = torch.view_as_complex(signals.reshape(k, n, 2).contiguous())
    intensities = records[:, width - m :].contiguous()
    if not torch.isfinite(records).all() or (intensities < 0).any():
        raise ValueError(f"{path}: records must be finite with nonnegative intensities")
    return SpeckleSet(signals.contiguous(), intensities, modes[mode_code])

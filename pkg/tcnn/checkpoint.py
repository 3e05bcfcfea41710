import struct
import zlib
from pathlib import Path

import numpy as np
import torch

from .model import TCNN, NetworkConfig, build_network

MAGIC = b"SPKLNET1"
_CONFIG = struct.Struct("<IIIIIdddQ")


def save_checkpoint(path: str | Path, net: TCNN):
    cfg = net.cfg
    header = MAGIC + _CONFIG.pack(
        cfg.input_side,
        cfg.output_side,
        cfg.num_flows,
        cfg.residue_blocks_per_flow,
        cfg.base_channels,
        cfg.dropout_rate,
        cfg.bn_epsilon,
        cfg.bn_momentum,
        cfg.seed,
    )
    # parameters and BN running statistics in graph (state_dict) order
    payload = b"".join(
        v.detach().cpu().to(torch.float64).numpy().astype("<f8").tobytes() for v in net.state_dict().values()
    )
    data = header + payload
    Path(path).write_bytes(data + struct.pack("<I", zlib.crc32(data)))


def load_checkpoint(path: str | Path) -> TCNN:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    data = path.read_bytes()

    if data[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a SPKLNET1 checkpoint")
    if len(data) < len(MAGIC) + _CONFIG.size + 4:
        raise ValueError(f"{path} is truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ValueError(f"{path} failed its CRC32 check")

    fields = _CONFIG.unpack_from(body, len(MAGIC))
    net = build_network(NetworkConfig(*fields))

    values = np.frombuffer(body, dtype="<f8", offset=len(MAGIC) + _CONFIG.size)
    state_dict = net.state_dict()
    expected = sum(v.numel() for v in state_dict.values())
    if values.size != expected:
        raise ValueError(f"{path} holds {values.size} values, the stored config needs {expected}")

    offset = 0
    for name, v in state_dict.items():
        state_dict[name] = torch.from_numpy(values[offset : offset + v.numel()].copy()).view(v.shape)
        offset += v.numel()
    net.load_state_dict(state_dict)
    return net

from typing import NamedTuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .layers import Conv2d, ConvBlock, Dropout, Linear, ResidualBlock, UpsampleBlock


class NetworkConfig(NamedTuple):
    input_side: int = 32
    output_side: int = 8
    num_flows: int = 2  # flow s works at scale x2^s
    residue_blocks_per_flow: int = 2
    base_channels: int = 16
    dropout_rate: float = 0.5
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.1
    seed: int = 0

    def validate(self):
        if not 1 <= self.num_flows <= 4:
            raise ValueError(f"num_flows must be in 1..4, got {self.num_flows}")
        if self.input_side < 1 or self.input_side % 2 ** (self.num_flows - 1) != 0:
            raise ValueError(f"input_side={self.input_side} is not divisible by 2^{self.num_flows - 1}")
        if self.output_side < 1 or self.base_channels < 1 or self.residue_blocks_per_flow < 0:
            raise ValueError(f"invalid network sizes in {self}")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.bn_epsilon <= 0 or not 0 < self.bn_momentum < 1:
            raise ValueError(f"invalid batch norm constants {self.bn_epsilon=}, {self.bn_momentum=}")
        return self


class Flow(nn.Module):
    """Downsample to scale x2^s, residue blocks, then upsample back to the input size."""

    def __init__(self, scale: int, cfg: NetworkConfig, generator: torch.Generator):
        super().__init__()
        kwargs = dict(generator=generator, bn_epsilon=cfg.bn_epsilon, bn_momentum=cfg.bn_momentum)
        C = cfg.base_channels
        layers = []
        channels = 1

        if scale == 0 and cfg.residue_blocks_per_flow > 0:
            layers.append(ConvBlock(1, C, **kwargs))  # stem, no pooling
            channels = C
        for _ in range(scale):
            layers.append(ConvBlock(channels, C, pool=True, **kwargs))
            channels = C
        self.n_encoder_layers = len(layers) + cfg.residue_blocks_per_flow
        layers.extend(ResidualBlock(C, **kwargs) for _ in range(cfg.residue_blocks_per_flow))
        layers.extend(UpsampleBlock(C, **kwargs) for _ in range(scale))

        self.layers = nn.Sequential(*layers)
        self.out_channels = channels

    def forward(self, x: Tensor) -> Tensor:
        return self.layers(x)


class TCNN(nn.Module):
    """g = g2(g1(b)): multi-flow conv encoder/decoder g1, fully-connected transformation layer g2."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg.validate()
        generator = torch.Generator().manual_seed(cfg.seed)

        self.flows = nn.ModuleList(Flow(s, cfg, generator) for s in range(cfg.num_flows))
        channels = sum(flow.out_channels for flow in self.flows)
        if cfg.num_flows > 1:
            self.fuse = ConvBlock(
                channels,
                cfg.base_channels,
                generator=generator,
                bn_epsilon=cfg.bn_epsilon,
                bn_momentum=cfg.bn_momentum,
            )
            channels = cfg.base_channels
        else:
            self.fuse = None

        # transformation block
        self.transform_conv = Conv2d(channels, 1, generator=generator)
        self.dropout = Dropout(cfg.dropout_rate, seed=cfg.seed)
        self.fc = Linear(cfg.input_side**2, cfg.output_side**2, generator=generator)

        self._cached_output = None

    def encode(self, x: Tensor) -> Tensor:
        """g1: speckle batch (N, 1, S, S) -> transform-domain element (N, S * S)."""
        features = torch.cat([flow(x) for flow in self.flows], dim=1)
        if self.fuse is not None:
            features = self.fuse(features)
        return self.transform_conv(features).flatten(1)

    def transform(self, h: Tensor) -> Tensor:
        """g2: transformation layer, (N, S * S) -> (N, 1, O, O)."""
        O = self.cfg.output_side
        return self.fc(self.dropout(h)).view(-1, 1, O, O)

    def forward(self, x: Tensor) -> Tensor:
        return self.transform(self.encode(x))


def build_network(cfg: NetworkConfig) -> TCNN:
    return TCNN(cfg)


def count_parameters(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


def _check_speckle(net: TCNN, speckle: Tensor) -> Tensor:
    S = net.cfg.input_side
    if speckle.shape == (1, S, S):
        return speckle.unsqueeze(0)
    if speckle.ndim == 4 and speckle.shape[1:] == (1, S, S):
        return speckle
    raise ValueError(f"expected speckle of shape (1, {S}, {S}) or (N, 1, {S}, {S}), got {tuple(speckle.shape)}")


def forward(net: TCNN, speckle: Tensor, training: bool) -> Tensor:
    batched = speckle.ndim == 4
    x = _check_speckle(net, speckle.to(torch.float64))
    net.train(training)

    if training:
        out = net(x)
        net._cached_output = out
    else:
        with torch.no_grad():
            out = net(x)
    return out if batched else out.squeeze(0)


def backward(net: TCNN, loss_grad: Tensor) -> dict[str, Tensor]:
    out = net._cached_output
    if out is None:
        raise RuntimeError("backward() needs a preceding forward() with training=True")
    net._cached_output = None

    net.zero_grad(set_to_none=False)
    out.backward(loss_grad.reshape(out.shape).to(out.dtype))
    return {name: p.grad.clone() for name, p in net.named_parameters()}


def mse_loss(pred: Tensor, target: Tensor) -> tuple[float, Tensor]:
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {tuple(pred.shape)} does not match target {tuple(target.shape)}")
    diff = (pred - target).detach()
    return diff.square().mean().item(), 2 * diff / diff.numel()


def normalize_speckle(b: Tensor, side: int) -> Tensor:
    """Raster-reshape the first side^2 intensities to (1, side, side), zero mean and unit variance."""
    if b.shape[-1] < side * side:
        raise ValueError(f"{b.shape[-1]} intensities cannot fill a {side}x{side} speckle image")
    x = b[..., : side * side].to(torch.float64)
    x = x - x.mean(-1, keepdim=True)
    std = x.std(-1, unbiased=False, keepdim=True)
    x = torch.where(std > 0, x / std.clamp_min(1e-300), x)
    return x.reshape(*b.shape[:-1], 1, side, side)


@torch.no_grad()
def feature_maps(net: TCNN, speckle: Tensor) -> list[Tensor]:
    """Deepest feature map of every flow, nearest-neighbour resized to the input size."""
    x = _check_speckle(net, speckle.to(torch.float64))
    net.eval()
    maps = []
    for flow in net.flows:
        h = x
        for layer in flow.layers[: flow.n_encoder_layers]:
            h = layer(h)
        maps.append(F.interpolate(h, size=x.shape[-2:], mode="nearest"))
    return maps

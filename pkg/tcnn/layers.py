import math

import torch
from torch import Tensor, nn

from . import functional as F


class Conv2d(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3, *, generator: torch.Generator):
        super().__init__()
        # He init for ReLU networks
        std = math.sqrt(2 / (in_channels * kernel_size**2))
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = nn.Parameter(torch.randn(shape, generator=generator, dtype=torch.float64) * std)
        self.bias = nn.Parameter(torch.zeros(out_channels, dtype=torch.float64))

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias)


class BatchNorm2d(nn.Module):
    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.weight = nn.Parameter(torch.ones(channels, dtype=torch.float64))
        self.bias = nn.Parameter(torch.zeros(channels, dtype=torch.float64))
        self.register_buffer("running_mean", torch.zeros(channels, dtype=torch.float64))
        self.register_buffer("running_var", torch.ones(channels, dtype=torch.float64))

    def forward(self, x: Tensor) -> Tensor:
        if self.training:
            with torch.no_grad():
                self.running_mean.lerp_(x.mean((0, 2, 3)), self.momentum)
                unbiased = x.numel() > x.shape[1]
                self.running_var.lerp_(x.var((0, 2, 3), unbiased=unbiased), self.momentum)
            return F.batch_norm(x, self.weight, self.bias, self.eps)

        shape = (1, -1, 1, 1)
        inv_std = (self.running_var + self.eps).rsqrt()
        return (x - self.running_mean.view(shape)) * (inv_std * self.weight).view(shape) + self.bias.view(shape)


class Linear(nn.Module):
    def __init__(self, in_features: int, out_features: int, *, generator: torch.Generator):
        super().__init__()
        std = math.sqrt(2 / in_features)
        shape = (out_features, in_features)
        self.weight = nn.Parameter(torch.randn(shape, generator=generator, dtype=torch.float64) * std)
        self.bias = nn.Parameter(torch.zeros(out_features, dtype=torch.float64))

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Dropout(nn.Module):
    def __init__(self, p: float, seed: int = 0):
        super().__init__()
        assert 0 <= p < 1
        self.p = p
        self.generator = torch.Generator().manual_seed(seed)

    def forward(self, x: Tensor) -> Tensor:
        if not self.training or self.p == 0:
            return x
        mask = (torch.rand(x.shape, generator=self.generator, dtype=torch.float64) >= self.p).to(x.dtype)
        return F.dropout(x, mask, self.p)


class ConvBlock(nn.Module):
    """conv -> BN -> ReLU, optionally followed by 2x2 max pooling."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        *,
        generator: torch.Generator,
        bn: bool = True,
        relu: bool = True,
        pool: bool = False,
        bn_epsilon: float = 1e-5,
        bn_momentum: float = 0.1,
    ):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, kernel_size, generator=generator)
        self.bn = BatchNorm2d(out_channels, bn_epsilon, bn_momentum) if bn else None
        self.relu = relu
        self.pool = pool

    def forward(self, x: Tensor) -> Tensor:
        x = self.conv(x)
        if self.bn is not None:
            x = self.bn(x)
        if self.relu:
            x = F.relu(x)
        if self.pool:
            x = F.max_pool2x2(x)
        return x


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, *, generator: torch.Generator, **bn_kwargs):
        super().__init__()
        self.block1 = ConvBlock(channels, channels, generator=generator, **bn_kwargs)
        self.block2 = ConvBlock(channels, channels, generator=generator, relu=False, **bn_kwargs)

    def forward(self, x: Tensor) -> Tensor:
        return F.relu(self.block2(self.block1(x)) + x)


class UpsampleBlock(nn.Module):
    """conv -> BN -> ReLU, then a 2x nearest-neighbour resize followed by a conv."""

    def __init__(self, channels: int, *, generator: torch.Generator, **bn_kwargs):
        super().__init__()
        self.block = ConvBlock(channels, channels, generator=generator, **bn_kwargs)
        self.conv = Conv2d(channels, channels, generator=generator)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv(F.upsample2x(self.block(x)))

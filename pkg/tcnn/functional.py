# Layer kinds of the network with hand-derived backward passes. Only structural ops
# (add, concat, reshape) are left to PyTorch's own derivatives.

import torch
import torch.nn.functional as F
from torch import Tensor


class _Conv2d(torch.autograd.Function):
    # stride 1, zero "same" padding, odd square kernels
    @staticmethod
    def forward(ctx, input: Tensor, weight: Tensor, bias: Tensor | None = None):
        kernel_size = weight.shape[-1]
        assert weight.shape[-2] == kernel_size and kernel_size % 2 == 1
        ctx.padding = kernel_size // 2
        ctx.save_for_backward(input, weight)
        ctx.bias = bias is not None
        return F.conv2d(input, weight, bias, padding=ctx.padding)

    @staticmethod
    def backward(ctx, grad_output):
        input, weight = ctx.saved_tensors
        grad_input = grad_weight = grad_bias = None
        N, C_in, H, W = input.shape
        C_out, _, K, _ = weight.shape

        if ctx.needs_input_grad[0]:
            # correlation of grad_output with the flipped kernel, channels swapped
            grad_input = F.conv2d(grad_output, weight.flip(-2, -1).transpose(0, 1), padding=K - 1 - ctx.padding)

        if ctx.needs_input_grad[1]:
            cols = F.unfold(input, K, padding=ctx.padding)  # (N, C_in * K * K, H * W)
            grad_weight = torch.einsum("nol,nkl->ok", grad_output.reshape(N, C_out, H * W), cols)
            grad_weight = grad_weight.view(C_out, C_in, K, K)

        if ctx.bias and ctx.needs_input_grad[2]:
            grad_bias = grad_output.sum((0, 2, 3))

        return grad_input, grad_weight, grad_bias


class _BatchNorm2d(torch.autograd.Function):
    # normalizes with the statistics of the current batch
    @staticmethod
    def forward(ctx, input: Tensor, weight: Tensor, bias: Tensor, eps: float):
        mean = input.mean((0, 2, 3), keepdim=True)
        var = input.var((0, 2, 3), unbiased=False, keepdim=True)
        inv_std = (var + eps).rsqrt()
        x_hat = (input - mean) * inv_std
        ctx.save_for_backward(x_hat, weight, inv_std)
        return x_hat * weight.view(1, -1, 1, 1) + bias.view(1, -1, 1, 1)

    @staticmethod
    def backward(ctx, grad_output):
        x_hat, weight, inv_std = ctx.saved_tensors
        dims = (0, 2, 3)
        count = x_hat.numel() // x_hat.shape[1]

        grad_bias = grad_output.sum(dims)
        grad_weight = (grad_output * x_hat).sum(dims)

        grad_x_hat = grad_output * weight.view(1, -1, 1, 1)
        grad_input = (
            count * grad_x_hat
            - grad_x_hat.sum(dims, keepdim=True)
            - x_hat * (grad_x_hat * x_hat).sum(dims, keepdim=True)
        ) * (inv_std / count)
        return grad_input, grad_weight, grad_bias, None


class _ReLU(torch.autograd.Function):
    @staticmethod
    def forward(ctx, input: Tensor):
        mask = input > 0
        ctx.save_for_backward(mask)
        return input * mask

    @staticmethod
    def backward(ctx, grad_output):
        (mask,) = ctx.saved_tensors
        return grad_output * mask


def _to_windows(x: Tensor) -> Tensor:
    N, C, H, W = x.shape
    return x.reshape(N, C, H // 2, 2, W // 2, 2).permute(0, 1, 2, 4, 3, 5).reshape(N, C, H // 2, W // 2, 4)


def _from_windows(x: Tensor) -> Tensor:
    N, C, H2, W2, _ = x.shape
    return x.view(N, C, H2, W2, 2, 2).permute(0, 1, 2, 4, 3, 5).reshape(N, C, H2 * 2, W2 * 2)


class _MaxPool2x2(torch.autograd.Function):
    @staticmethod
    def forward(ctx, input: Tensor):
        assert input.shape[-1] % 2 == 0 and input.shape[-2] % 2 == 0
        out, indices = _to_windows(input).max(-1)
        ctx.save_for_backward(indices)
        return out

    @staticmethod
    def backward(ctx, grad_output):
        (indices,) = ctx.saved_tensors
        windows = grad_output.new_zeros(*grad_output.shape, 4)
        windows.scatter_(-1, indices.unsqueeze(-1), grad_output.unsqueeze(-1))
        return _from_windows(windows)


class _Upsample2x(torch.autograd.Function):
    # nearest neighbour
    @staticmethod
    def forward(ctx, input: Tensor):
        return input.repeat_interleave(2, dim=-2).repeat_interleave(2, dim=-1)

    @staticmethod
    def backward(ctx, grad_output):
        N, C, H, W = grad_output.shape
        return grad_output.reshape(N, C, H // 2, 2, W // 2, 2).sum((3, 5))


class _Linear(torch.autograd.Function):
    @staticmethod
    def forward(ctx, input: Tensor, weight: Tensor, bias: Tensor | None = None):
        ctx.save_for_backward(input, weight)
        ctx.bias = bias is not None
        out = input @ weight.T
        return out + bias if bias is not None else out

    @staticmethod
    def backward(ctx, grad_output):
        input, weight = ctx.saved_tensors
        grad_input = grad_output @ weight
        grad_weight = grad_output.T @ input
        grad_bias = grad_output.sum(0) if ctx.bias else None
        return grad_input, grad_weight, grad_bias


class _Dropout(torch.autograd.Function):
    # inverted dropout: kept units are scaled by 1 / (1 - p) at train time
    @staticmethod
    def forward(ctx, input: Tensor, mask: Tensor, scale: float):
        ctx.save_for_backward(mask)
        ctx.scale = scale
        return input * mask * scale

    @staticmethod
    def backward(ctx, grad_output):
        (mask,) = ctx.saved_tensors
        return grad_output * mask * ctx.scale, None, None


def conv2d(input: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    return _Conv2d.apply(input, weight, bias)


def batch_norm(input: Tensor, weight: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return _BatchNorm2d.apply(input, weight, bias, eps)


def relu(input: Tensor) -> Tensor:
    return _ReLU.apply(input)


def max_pool2x2(input: Tensor) -> Tensor:
    return _MaxPool2x2.apply(input)


def upsample2x(input: Tensor) -> Tensor:
    return _Upsample2x.apply(input)


def linear(input: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    return _Linear.apply(input, weight, bias)


def dropout(input: Tensor, mask: Tensor, p: float) -> Tensor:
    return _Dropout.apply(input, mask, 1 / (1 - p))

import pytest
import torch
import torch.nn.functional as F
from torch.autograd import gradcheck

from tcnn import functional as tF


def rand(*shape, seed=0, requires_grad=True):
    x = torch.randn(shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)
    return x.requires_grad_(requires_grad)


@pytest.mark.parametrize("kernel_size", [1, 3, 5])
def test_conv2d(kernel_size):
    x = rand(2, 3, 6, 5, seed=0)
    w = rand(4, 3, kernel_size, kernel_size, seed=1)
    b = rand(4, seed=2)
    assert gradcheck(tF.conv2d, (x, w, b))

    expected = F.conv2d(x, w, b, padding=kernel_size // 2)
    torch.testing.assert_close(tF.conv2d(x, w, b), expected)


def test_conv2d_matches_builtin_gradients():
    x, w, b = rand(2, 2, 5, 5, seed=3), rand(3, 2, 3, 3, seed=4), rand(3, seed=5)
    g = rand(2, 3, 5, 5, seed=6, requires_grad=False)
    ours = torch.autograd.grad(tF.conv2d(x, w, b), (x, w, b), g)
    ref = torch.autograd.grad(F.conv2d(x, w, b, padding=1), (x, w, b), g)
    for a, e in zip(ours, ref):
        torch.testing.assert_close(a, e)


def test_batch_norm():
    x = rand(4, 3, 3, 2, seed=0)
    w, b = rand(3, seed=1), rand(3, seed=2)
    assert gradcheck(lambda x, w, b: tF.batch_norm(x, w, b, 1e-5), (x, w, b))

    expected = F.batch_norm(x, None, None, w, b, training=True, eps=1e-5)
    torch.testing.assert_close(tF.batch_norm(x, w, b, 1e-5), expected)


def test_batch_norm_normalizes_each_channel():
    x = rand(8, 4, 5, 5, seed=7, requires_grad=False) * 3 + 2
    y = tF.batch_norm(x, torch.ones(4, dtype=torch.float64), torch.zeros(4, dtype=torch.float64), 1e-5)
    assert y.mean((0, 2, 3)).abs().max() <= 1e-6
    assert (y.var((0, 2, 3), unbiased=False) - 1).abs().max() <= 1e-4


def test_relu():
    x = rand(3, 7, seed=0)
    assert gradcheck(tF.relu, (x,))
    torch.testing.assert_close(tF.relu(x), F.relu(x))


def test_max_pool2x2():
    x = rand(2, 3, 4, 6, seed=0)
    assert gradcheck(tF.max_pool2x2, (x,))
    torch.testing.assert_close(tF.max_pool2x2(x), F.max_pool2d(x, 2))


def test_upsample2x():
    x = rand(2, 3, 3, 2, seed=0)
    assert gradcheck(tF.upsample2x, (x,))
    torch.testing.assert_close(tF.upsample2x(x), F.interpolate(x, scale_factor=2, mode="nearest"))


def test_linear():
    x, w, b = rand(5, 4, seed=0), rand(3, 4, seed=1), rand(3, seed=2)
    assert gradcheck(tF.linear, (x, w, b))
    torch.testing.assert_close(tF.linear(x, w, b), F.linear(x, w, b))


def test_dropout_honors_mask():
    x = rand(4, 6, seed=0)
    mask = (rand(4, 6, seed=1, requires_grad=False) > 0).to(torch.float64)
    assert gradcheck(lambda x: tF.dropout(x, mask, 0.5), (x,))
    torch.testing.assert_close(tF.dropout(x, mask, 0.5), x * mask * 2)

    y = tF.dropout(x, mask, 0.25)
    (grad,) = torch.autograd.grad(y.sum(), x)
    torch.testing.assert_close(grad, mask / 0.75)

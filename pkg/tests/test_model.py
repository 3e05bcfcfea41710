import pytest
import torch

from tcnn import (
    NetworkConfig,
    backward,
    build_network,
    count_parameters,
    feature_maps,
    forward,
    mse_loss,
    normalize_speckle,
)
from tcnn.layers import ConvBlock, ResidualBlock

SMALL = NetworkConfig(input_side=8, output_side=4, num_flows=2, residue_blocks_per_flow=1, base_channels=4)


def rand(*shape, seed=0):
    return torch.randn(shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)


def test_default_forward_shape():
    net = build_network(NetworkConfig())
    out = forward(net, rand(1, 32, 32), training=False)
    assert out.shape == (1, 8, 8)
    assert torch.isfinite(out).all()

    batch = forward(net, rand(3, 1, 32, 32), training=True)
    assert batch.shape == (3, 1, 8, 8)


def test_transformation_only_parameter_count():
    S, O = 8, 4
    net = build_network(NetworkConfig(input_side=S, output_side=O, num_flows=1, residue_blocks_per_flow=0))
    # 3x3 conv 1 -> 1 channel (9 + 1) followed by the fully-connected layer
    assert count_parameters(net) == 10 + S * S * O * O + O * O


@pytest.mark.parametrize(
    "kwargs",
    [dict(input_side=18, num_flows=3), dict(num_flows=0), dict(num_flows=5), dict(dropout_rate=1.0)],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        build_network(NetworkConfig(**kwargs))


def test_scale_schedule_shapes():
    generator = torch.Generator().manual_seed(0)
    for _ in range(6):
        num_flows = int(torch.randint(1, 5, (1,), generator=generator))
        input_side = 2 ** (num_flows - 1) * int(torch.randint(1, 4, (1,), generator=generator))
        cfg = NetworkConfig(
            input_side=input_side,
            output_side=int(torch.randint(1, 5, (1,), generator=generator)),
            num_flows=num_flows,
            residue_blocks_per_flow=int(torch.randint(0, 3, (1,), generator=generator)),
            base_channels=3,
        )
        net = build_network(cfg)
        x = rand(2, 1, input_side, input_side)
        for s, flow in enumerate(net.flows):
            h = x
            for layer in flow.layers[: flow.n_encoder_layers]:
                h = layer(h)
            assert h.shape[-1] == input_side // 2**s
            assert flow(x).shape[-2:] == (input_side, input_side)
        assert forward(net, x, training=True).shape == (2, 1, cfg.output_side, cfg.output_side)


def test_forward_rejects_wrong_shape():
    net = build_network(SMALL)
    with pytest.raises(ValueError):
        forward(net, rand(1, 9, 9), training=False)


def test_inference_is_deterministic():
    net = build_network(SMALL)
    x = rand(1, 8, 8)
    torch.testing.assert_close(forward(net, x, False), forward(net, x, False), rtol=0, atol=0)


def test_dropout_off_train_matches_inference_in_transformation_layer():
    net = build_network(SMALL._replace(dropout_rate=0.0))
    h = rand(3, 64)
    net.train()
    train_out = net.transform(h)
    net.eval()
    torch.testing.assert_close(train_out, net.transform(h), rtol=0, atol=0)


def test_inverted_dropout_expectation():
    net = build_network(SMALL._replace(dropout_rate=0.5))
    h = rand(1, 64).expand(10_000, 64).contiguous()
    with torch.no_grad():
        net.eval()
        ref = net.transform(h[:1]).mean()
        net.train()
        samples = net.transform(h).flatten(1).mean(1)
    stderr = samples.std() / len(samples) ** 0.5
    assert (samples.mean() - ref).abs() <= 3 * stderr


def test_identity_kernel_gives_relu():
    block = ConvBlock(1, 1, kernel_size=1, generator=torch.Generator().manual_seed(0), bn=False)
    with torch.no_grad():
        block.conv.weight.fill_(1.0)
        block.conv.bias.zero_()
    x = rand(1, 1, 4, 4)
    torch.testing.assert_close(block(x), x.clamp_min(0))


def test_residual_block_with_zero_convs_is_shortcut():
    block = ResidualBlock(2, generator=torch.Generator().manual_seed(0))
    with torch.no_grad():
        for conv in (block.block1.conv, block.block2.conv):
            conv.weight.zero_()
    x = rand(2, 2, 4, 4).abs().requires_grad_(True)
    y = block(x)
    torch.testing.assert_close(y, x.detach())

    g = rand(2, 2, 4, 4, seed=1)
    y.backward(g)
    torch.testing.assert_close(x.grad, g)


def test_two_section_factorization():
    cfg = NetworkConfig(input_side=8, output_side=8, num_flows=2, residue_blocks_per_flow=1, base_channels=4)
    net = build_network(cfg)
    with torch.no_grad():
        net.fc.weight.copy_(torch.eye(64, dtype=torch.float64))
        net.fc.bias.zero_()
    x = rand(2, 1, 8, 8)
    out = forward(net, x, training=False)
    with torch.no_grad():
        fused = net.encode(x)
    torch.testing.assert_close(out, fused.view(2, 1, 8, 8), rtol=0, atol=0)


def test_backward_needs_cached_forward():
    net = build_network(SMALL)
    with pytest.raises(RuntimeError):
        backward(net, torch.zeros(1, 4, 4, dtype=torch.float64))
    forward(net, rand(1, 8, 8), training=False)
    with pytest.raises(RuntimeError):
        backward(net, torch.zeros(1, 4, 4, dtype=torch.float64))


def test_zero_loss_grad_gives_zero_gradients():
    net = build_network(SMALL)
    out = forward(net, rand(2, 1, 8, 8), training=True)
    grads = backward(net, torch.zeros_like(out))
    assert grads.keys() == dict(net.named_parameters()).keys()
    assert all(g.abs().max() == 0 for g in grads.values())


def test_composed_network_matches_finite_differences():
    net = build_network(NetworkConfig(dropout_rate=0.5, seed=1))
    x = rand(2, 1, 32, 32, seed=2)
    target = rand(2, 1, 8, 8, seed=3)

    def loss_at() -> float:
        net.dropout.generator.manual_seed(123)  # same dropout mask on every pass
        with torch.no_grad():
            loss, _ = mse_loss(forward(net, x, training=True), target)
        return loss

    net.dropout.generator.manual_seed(123)
    pred = forward(net, x, training=True)
    _, loss_grad = mse_loss(pred, target)
    grads = backward(net, loss_grad)

    params = dict(net.named_parameters())
    names = list(params)
    sizes = torch.tensor([params[name].numel() for name in names], dtype=torch.float64)
    generator = torch.Generator().manual_seed(4)
    # every parameter tensor once, then random picks weighted by size
    picks = [(name, 0) for name in names]
    for idx in torch.multinomial(sizes, 100, replacement=True, generator=generator).tolist():
        name = names[idx]
        picks.append((name, int(torch.randint(params[name].numel(), (1,), generator=generator))))

    failures = []
    for name, i in picks:
        flat = params[name].data.view(-1)
        theta = flat[i].item()
        h = 1e-5 * (1 + abs(theta))
        flat[i] = theta + h
        up = loss_at()
        flat[i] = theta - h
        down = loss_at()
        flat[i] = theta

        fd = (up - down) / (2 * h)
        an = grads[name].view(-1)[i].item()
        err = abs(fd - an)
        if err > 1e-4 * max(abs(fd), abs(an)) and err > 1e-8:
            failures.append((name, i, fd, an))
    assert not failures


def test_mse_loss():
    pred = rand(1, 4, 4)
    loss, grad = mse_loss(pred, pred.clone())
    assert loss == 0
    assert torch.equal(grad, torch.zeros_like(pred))

    loss, _ = mse_loss(pred + 1, pred)
    assert loss == pytest.approx(1.0)

    with pytest.raises(ValueError):
        mse_loss(pred, rand(1, 4, 5))


def test_mse_loss_gradient_finite_differences():
    pred, target = rand(1, 3, 3, seed=0), rand(1, 3, 3, seed=1)
    _, grad = mse_loss(pred, target)
    h = 1e-6
    for i in range(pred.numel()):
        e = torch.zeros(pred.numel(), dtype=torch.float64)
        e[i] = h
        up, _ = mse_loss(pred + e.view_as(pred), target)
        down, _ = mse_loss(pred - e.view_as(pred), target)
        assert (up - down) / (2 * h) == pytest.approx(grad.view(-1)[i].item(), abs=1e-8)


def test_normalize_speckle():
    b = rand(20).abs() * 5
    x = normalize_speckle(b, 4)
    assert x.shape == (1, 4, 4)
    assert x.mean().abs() < 1e-12
    assert (x.var(unbiased=False) - 1).abs() < 1e-12

    batch = normalize_speckle(rand(3, 16).abs(), 4)
    assert batch.shape == (3, 1, 4, 4)

    flat = normalize_speckle(torch.ones(16, dtype=torch.float64), 4)
    assert torch.equal(flat, torch.zeros(1, 4, 4, dtype=torch.float64))
    with pytest.raises(ValueError):
        normalize_speckle(rand(15), 4)


def test_feature_maps():
    net = build_network(SMALL)
    maps = feature_maps(net, rand(1, 8, 8))
    assert len(maps) == 2
    assert all(m.shape == (1, 4, 8, 8) for m in maps)

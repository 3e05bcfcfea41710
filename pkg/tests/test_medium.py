import pytest
import torch

from medium import (
    NoiseModel,
    SignalVector,
    TransmissionMatrix,
    add_noise,
    decode_slm,
    encode_slm,
    gen_real_frame,
    gen_transmission_matrix,
    measure,
)


def test_gen_transmission_matrix_deterministic():
    tm1 = gen_transmission_matrix(8, 16, seed=3)
    tm2 = gen_transmission_matrix(8, 16, seed=3)
    assert tm1.entries.dtype == torch.complex128
    assert tm1.entries.shape == (8, 16)
    torch.testing.assert_close(tm1.entries, tm2.entries, rtol=0, atol=0)
    assert not torch.equal(tm1.entries, gen_transmission_matrix(8, 16, seed=4).entries)


def test_gen_transmission_matrix_nests_in_m():
    small = gen_transmission_matrix(5, 7, seed=11)
    large = gen_transmission_matrix(5, 8, seed=11)
    torch.testing.assert_close(large.entries[:, :7], small.entries, rtol=0, atol=0)

    frame = gen_real_frame(4, 6, seed=2)
    torch.testing.assert_close(gen_real_frame(4, 7, seed=2)[:, :6], frame, rtol=0, atol=0)


def test_gen_transmission_matrix_variance():
    n = 64
    tm = gen_transmission_matrix(n, 4096, seed=0)
    power = tm.entries.abs().square().mean().item()
    assert abs(power - 1 / n) < 0.05 / n
    # real and imaginary parts carry half the power each
    assert abs(tm.entries.real.square().mean().item() - 0.5 / n) < 0.05 / n


@pytest.mark.parametrize("n, m", [(0, 3), (3, 0)])
def test_gen_transmission_matrix_invalid(n, m):
    with pytest.raises(ValueError):
        gen_transmission_matrix(n, m, seed=0)


def test_measure_identity_and_zero():
    tm = TransmissionMatrix(torch.eye(3, dtype=torch.complex128))
    x = SignalVector(torch.tensor([1.0, -2.0, 3.0], dtype=torch.float64), "free_real")
    torch.testing.assert_close(measure(tm, x), torch.tensor([1.0, 4.0, 9.0], dtype=torch.float64))

    tm = gen_transmission_matrix(4, 10, seed=1)
    zero = SignalVector(torch.zeros(4, dtype=torch.complex128))
    assert torch.equal(measure(tm, zero), torch.zeros(10, dtype=torch.float64))


def test_measure_global_phase_invariance():
    tm = gen_transmission_matrix(6, 20, seed=5)
    x = torch.view_as_complex(torch.randn(6, 2, generator=torch.Generator().manual_seed(0), dtype=torch.float64))
    c = torch.exp(torch.tensor(0.7j, dtype=torch.complex128))
    b1 = measure(tm, SignalVector(x))
    b2 = measure(tm, SignalVector(c * x))
    torch.testing.assert_close(b1, b2)
    assert (b1 >= 0).all()


def test_measure_dimension_mismatch():
    tm = gen_transmission_matrix(4, 10, seed=1)
    with pytest.raises(ValueError):
        measure(tm, SignalVector(torch.ones(5, dtype=torch.complex128)))


def test_encode_slm():
    image = torch.tensor([[0.0, 1.0]])
    assert encode_slm(image, "phase").values.tolist() == [1.0, -1.0]
    assert encode_slm(image, "amplitude").values.tolist() == [0.0, 1.0]

    # row-major raster
    image = torch.tensor([[1.0, 0.0], [0.0, 0.0]])
    assert encode_slm(image, "amplitude").values.tolist() == [1.0, 0.0, 0.0, 0.0]


def test_encode_slm_rejects_non_binary():
    with pytest.raises(ValueError):
        encode_slm(torch.tensor([[0.0, 0.5]]), "amplitude")
    with pytest.raises(ValueError):
        encode_slm(torch.tensor([[0.0, 1.0]]), "free_complex")


def test_decode_slm_inverts_encode():
    image = torch.randint(0, 2, (4, 4), generator=torch.Generator().manual_seed(0)).to(torch.float64)
    for mode in ("amplitude", "phase"):
        assert torch.equal(decode_slm(encode_slm(image, mode), (4, 4)), image)


def test_signal_vector_alphabet():
    with pytest.raises(ValueError):
        SignalVector(torch.tensor([0.0, 2.0]), "amplitude")
    with pytest.raises(ValueError):
        SignalVector(torch.zeros(0))
    assert SignalVector(torch.tensor([1.0, -1.0]), "phase").is_real()


def test_add_noise():
    b = torch.tensor([0.0, 1.0, 2.0], dtype=torch.float64)
    assert torch.equal(add_noise(b, NoiseModel()), b)

    model = NoiseModel("gaussian", sigma=0.5, seed=3)
    noisy = add_noise(b, model)
    assert (noisy >= 0).all()
    torch.testing.assert_close(noisy, add_noise(b, model), rtol=0, atol=0)

    with pytest.raises(ValueError):
        add_noise(torch.tensor([-1.0], dtype=torch.float64), NoiseModel())
    with pytest.raises(ValueError):
        add_noise(b, NoiseModel("gaussian", sigma=-1.0))


def test_measure_small_worked_example():
    tm = TransmissionMatrix(torch.tensor([[1.0], [1j]], dtype=torch.complex128))
    x = SignalVector(torch.tensor([1.0, 1.0], dtype=torch.float64), "amplitude")
    torch.testing.assert_close(measure(tm, x), torch.tensor([2.0], dtype=torch.float64))


def test_measure_symmetries():
    tm = gen_transmission_matrix(6, 24, seed=8)
    x = torch.randn(6, generator=torch.Generator().manual_seed(1), dtype=torch.float64)
    b = measure(tm, SignalVector(x, "free_real"))

    torch.testing.assert_close(measure(tm, SignalVector(-x, "free_real")), b, rtol=1e-12, atol=0)
    torch.testing.assert_close(measure(tm, SignalVector(2.5 * x, "free_real")), 2.5**2 * b, rtol=1e-12, atol=0)

    # a per-column phase of the medium is invisible in intensities
    angles = torch.linspace(0, 6, 24, dtype=torch.float64)
    rotated = TransmissionMatrix(tm.entries * torch.exp(1j * angles))
    torch.testing.assert_close(measure(rotated, SignalVector(x, "free_real")), b, rtol=1e-12, atol=1e-15)


def test_add_noise_statistics():
    b = torch.full((10_000,), 10.0, dtype=torch.float64)
    assert torch.equal(add_noise(b, NoiseModel("gaussian", sigma=0.0, seed=1)), b)

    noisy = add_noise(b, NoiseModel("gaussian", sigma=1.0, seed=1))
    assert abs((noisy - b).std().item() - 1.0) < 0.05
    assert abs((noisy - b).mean().item()) < 0.05

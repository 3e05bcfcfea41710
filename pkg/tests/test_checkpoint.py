import pytest
import torch

from tcnn import NetworkConfig, build_network, forward, load_checkpoint, save_checkpoint

CFG = NetworkConfig(input_side=8, output_side=4, num_flows=2, residue_blocks_per_flow=1, base_channels=3, seed=5)


def test_roundtrip(tmp_path):
    net = build_network(CFG)
    x = torch.randn(4, 1, 8, 8, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
    forward(net, x, training=True)  # moves the BN running statistics away from their init

    path = tmp_path / "model.bin"
    save_checkpoint(path, net)
    loaded = load_checkpoint(path)

    assert loaded.cfg == CFG
    for (name, v), (name2, v2) in zip(net.state_dict().items(), loaded.state_dict().items()):
        assert name == name2
        torch.testing.assert_close(v, v2, rtol=0, atol=0)
    torch.testing.assert_close(forward(net, x, False), forward(loaded, x, False), rtol=0, atol=0)


def test_rejects_corrupted_files(tmp_path):
    path = tmp_path / "model.bin"
    save_checkpoint(path, build_network(CFG))
    data = path.read_bytes()

    corrupted = bytearray(data)
    corrupted[100] ^= 0xFF
    path.write_bytes(bytes(corrupted))
    with pytest.raises(ValueError, match="CRC32"):
        load_checkpoint(path)

    path.write_bytes(b"SPKLTM01" + data[8:])
    with pytest.raises(ValueError):
        load_checkpoint(path)

    path.write_bytes(data[:20])
    with pytest.raises(ValueError):
        load_checkpoint(path)

    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.bin")

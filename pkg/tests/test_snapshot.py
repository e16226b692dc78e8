import struct

import numpy as np
import pytest

from alforge import model
from alforge.model import init_params
from alforge.snapshot import FORMAT_VERSION, MAGIC, load_model, save_model


def test_roundtrip_is_bit_exact(tmp_path):
    params = init_params(42, 3, 16, 4, scale=0.8, activation="relu")
    path = str(tmp_path / "m.alfg")
    save_model(params, path)
    back = load_model(path)
    for name in ("W1", "b1", "W2", "b2"):
        assert np.array_equal(getattr(params, name), getattr(back, name))
    assert back.activation == "relu"
    x = np.random.default_rng(0).normal(0, 1, 3)
    a, b = model.forward(params, x), model.forward(back, x)
    assert np.array_equal(a.logits, b.logits)
    assert np.array_equal(a.probs, b.probs)


def test_header_layout(tmp_path):
    params = init_params(1, 2, 8, 3, scale=0.5, activation="tanh")
    path = tmp_path / "m.alfg"
    save_model(params, str(path))
    raw = path.read_bytes()
    magic, version, d_in, d_hid, n_cls, act = struct.unpack("<4sIIIIB", raw[:21])
    assert magic == MAGIC == b"ALFG"
    assert version == FORMAT_VERSION
    assert (d_in, d_hid, n_cls) == (2, 8, 3)
    n_floats = 8 * 2 + 8 + 3 * 8 + 3
    assert len(raw) == 21 + 8 * n_floats
    # first payload value is W1[0, 0] as little-endian float64
    w00 = struct.unpack("<d", raw[21:29])[0]
    assert w00 == params.W1[0, 0]


def test_saving_twice_is_byte_identical(tmp_path):
    params = init_params(9, 2, 4, 2)
    a, b = tmp_path / "a.alfg", tmp_path / "b.alfg"
    save_model(params, str(a))
    save_model(params, str(b))
    assert a.read_bytes() == b.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "m.alfg"
    save_model(init_params(0, 2, 4, 2), str(path))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="magic"):
        load_model(str(path))


def test_unsupported_version_rejected(tmp_path):
    path = tmp_path / "m.alfg"
    save_model(init_params(0, 2, 4, 2), str(path))
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="version 99"):
        load_model(str(path))


def test_unknown_activation_rejected(tmp_path):
    path = tmp_path / "m.alfg"
    save_model(init_params(0, 2, 4, 2), str(path))
    raw = bytearray(path.read_bytes())
    raw[20] = 7
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="activation"):
        load_model(str(path))


def test_truncation_and_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "m.alfg"
    save_model(init_params(0, 2, 4, 2), str(path))
    raw = path.read_bytes()
    short = tmp_path / "short.alfg"
    short.write_bytes(raw[:-5])
    with pytest.raises(ValueError, match="truncated"):
        load_model(str(short))
    header_only = tmp_path / "head.alfg"
    header_only.write_bytes(raw[:10])
    with pytest.raises(ValueError, match="truncated"):
        load_model(str(header_only))
    long = tmp_path / "long.alfg"
    long.write_bytes(raw + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_model(str(long))


def test_nonfinite_params_refuse_to_save(tmp_path):
    params = init_params(0, 2, 4, 2)
    params.W1[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        save_model(params, str(tmp_path / "m.alfg"))

import struct

import numpy as np
import pytest

from core.dncm import init_params
from core.encoder import init_encoder
from core.errors import ParamsFormatError
from core.params_io import MAGIC, load_params, params_from_bytes, params_to_bytes, save_params


def _same(a, b):
    return all(np.array_equal(a.tensors()[n], b.tensors()[n]) for n in a.tensors())


def test_header_layout():
    params = init_params(k=4, n_settings=2, seed=1)
    buf = params_to_bytes(params)
    assert buf[:4] == MAGIC
    assert buf[4] == 1
    assert struct.unpack("<II", buf[5:13]) == (4, 2)
    assert len(buf) == 13 + 8 * params.parameter_count


def test_roundtrip_bitwise(tmp_path):
    params = init_params(k=32, n_settings=5, seed=3)
    path = save_params(tmp_path / "model.dnim", params)
    loaded, enc = load_params(path)
    assert enc is None
    assert (loaded.k, loaded.n_settings) == (32, 5)
    assert _same(params, loaded)
    assert params_to_bytes(loaded) == path.read_bytes()


def test_roundtrip_with_encoder():
    params = init_params(k=4, n_settings=3, seed=5)
    enc = init_encoder(n_settings=3, k=4, seed=6, widths=(4, 6, 8))
    loaded, loaded_enc = params_from_bytes(params_to_bytes(params, enc))
    assert _same(params, loaded)
    assert _same(enc, loaded_enc)


def test_bad_magic():
    buf = bytearray(params_to_bytes(init_params(4, 1)))
    buf[:4] = b"XXXX"
    with pytest.raises(ParamsFormatError, match="Signature"):
        params_from_bytes(bytes(buf))


def test_bad_version():
    buf = bytearray(params_to_bytes(init_params(4, 1)))
    buf[4] = 9
    with pytest.raises(ParamsFormatError, match="Version"):
        params_from_bytes(bytes(buf))


def test_truncated():
    buf = params_to_bytes(init_params(4, 1))
    with pytest.raises(ParamsFormatError, match="tronqué"):
        params_from_bytes(buf[:-3])
    with pytest.raises(ParamsFormatError):
        params_from_bytes(buf[:7])


def test_trailing_bytes():
    buf = params_to_bytes(init_params(4, 1), init_encoder(1, 4, widths=(4,)))
    with pytest.raises(ParamsFormatError):
        params_from_bytes(buf + b"\x00")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_params(tmp_path / "absent.dnim")


def test_encoder_stage_chain_mismatch():
    params = init_params(4, 1)
    buf = bytearray(params_to_bytes(params, init_encoder(1, 4, widths=(4, 6))))
    stage1 = 13 + 8 * params.parameter_count + 4 + 8
    struct.pack_into("<I", buf, stage1, 5)
    with pytest.raises(ParamsFormatError, match="Étage 1"):
        params_from_bytes(bytes(buf))

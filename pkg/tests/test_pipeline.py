import numpy as np
import pytest

from config import PipelineConfig
from core.dncm import identity_params, init_params, pixel_chain_shapes_c
from core.encoder import init_encoder
from core.errors import ShapeError
from core.linalg import ImageStack, mul_count, unfold
from core.pipeline import assemble_stack, run_pipeline, stack_from_files, stack_from_npy
from tests.conftest import philox, random_stack
from utils.file_loader import save_image


def _cfg(**kw):
    base = dict(k=4, settings="td", low_res_side=8, threads=1)
    base.update(kw)
    return PipelineConfig(**base)


# =========================================================
#   Assemblage
# =========================================================
def test_assemble_single_image(rng):
    img = rng.random((3, 4, 3))
    stack = assemble_stack([img], "d")
    assert stack.settings == 1
    assert np.array_equal(stack.data, img)


def test_assemble_two_pixels_in_order():
    a, b = np.full((1, 1, 3), 0.1), np.full((1, 1, 3), 0.9)
    stack = assemble_stack([a, b], "td")
    assert stack.data.shape == (1, 1, 6)
    assert stack.data[0, 0].tolist() == [0.1, 0.1, 0.1, 0.9, 0.9, 0.9]


def test_assembled_unfold_row_concatenates_pixels(rng):
    imgs = [rng.random((2, 3, 3)) for _ in range(3)]
    pm = unfold(assemble_stack(imgs, "tds"))
    np.testing.assert_array_equal(pm[4], np.concatenate([im[1, 1] for im in imgs]))


def test_assemble_errors(rng):
    with pytest.raises(ShapeError):
        assemble_stack([rng.random((2, 2, 3))], "td")
    with pytest.raises(ShapeError):
        assemble_stack([rng.random((2, 2, 3)), rng.random((2, 3, 3))], "td")


def test_stack_from_files(tmp_path, rng):
    imgs = {c: rng.integers(0, 256, (3, 3, 3)) / 255.0 for c in "ts"}
    paths = {c: save_image(tmp_path / f"{c}.ppm", im) for c, im in imgs.items()}
    stack = stack_from_files(paths, "st")
    assert np.array_equal(stack.block(0), imgs["s"])
    with pytest.raises(ShapeError):
        stack_from_files(paths, "tds")


def test_stack_from_npy(tmp_path, rng):
    np.save(tmp_path / "s.npy", rng.random((2, 2, 9)))
    assert stack_from_npy(tmp_path / "s.npy").settings == 3


# =========================================================
#   Chaîne complète
# =========================================================
def test_identity_params_return_first_setting():
    stack = random_stack(5, 6, 2, seed=1)
    result = run_pipeline(stack, identity_params(4, 2), None, _cfg())
    assert np.array_equal(result.awb, stack.block(0))
    assert np.array_equal(result.canonical, stack.block(0))
    assert np.array_equal(result.d, np.eye(4))


def test_precompose_on_off_agree():
    params = init_params(4, 2, seed=2)
    enc = init_encoder(2, 4, seed=3, widths=(4, 4))
    stack = random_stack(16, 12, 2, seed=4)
    fast = run_pipeline(stack, params, enc, _cfg(use_precompose=True))
    slow = run_pipeline(stack, params, enc, _cfg(use_precompose=False))
    assert np.array_equal(fast.d, slow.d)
    np.testing.assert_allclose(fast.awb, slow.awb, rtol=1e-9, atol=1e-12)


def test_doubling_resolution_keeps_latent_and_quadruples_work():
    params = init_params(4, 1, seed=5)
    enc = init_encoder(1, 4, seed=6, widths=(4,))
    small = ImageStack(np.full((8, 8, 3), 0.4))
    large = ImageStack(np.full((16, 16, 3), 0.4))
    cfg = _cfg(settings="d")
    assert np.array_equal(run_pipeline(small, params, enc, cfg).d, run_pipeline(large, params, enc, cfg).d)
    per_pixel = mul_count(pixel_chain_shapes_c(params))
    assert per_pixel * large.pixels == 4 * per_pixel * small.pixels


def test_thread_count_does_not_change_output():
    params = init_params(4, 1, seed=7)
    enc = init_encoder(1, 4, seed=8, widths=(4,))
    stack = ImageStack(philox(9).random((300, 240, 3)))
    one = run_pipeline(stack, params, enc, _cfg(settings="d", threads=1, use_precompose=False))
    four = run_pipeline(stack, params, enc, _cfg(settings="d", threads=4, use_precompose=False))
    assert np.array_equal(one.awb, four.awb)
    assert np.array_equal(one.canonical, four.canonical)


def test_settings_mismatch():
    with pytest.raises(ShapeError):
        run_pipeline(random_stack(4, 4, 3), init_params(4, 2), None, _cfg())


def test_encoder_mismatch():
    enc = init_encoder(1, 4, widths=(4,))
    with pytest.raises(ShapeError):
        run_pipeline(random_stack(4, 4, 2), init_params(4, 2), enc, _cfg())

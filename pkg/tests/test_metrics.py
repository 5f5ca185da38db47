import numpy as np
import pytest

from core.errors import EmptyDatasetError, ShapeError
from core.metrics import (
    aggregate,
    angular_error,
    build_report,
    de2000_image,
    de2000_lab,
    evaluate,
    lab_to_srgb,
    mae_image,
    mse_image,
    srgb_to_lab,
)
from tests.conftest import philox

# Jeu de conformité CIEDE2000 (34 paires Lab et écarts de référence).
CIEDE2000_PAIRS = [
    ((50.0000, 2.6772, -79.7751), (50.0000, 0.0000, -82.7485), 2.0425),
    ((50.0000, 3.1571, -77.2803), (50.0000, 0.0000, -82.7485), 2.8615),
    ((50.0000, 2.8361, -74.0200), (50.0000, 0.0000, -82.7485), 3.4412),
    ((50.0000, -1.3802, -84.2814), (50.0000, 0.0000, -82.7485), 1.0000),
    ((50.0000, -1.1848, -84.8006), (50.0000, 0.0000, -82.7485), 1.0000),
    ((50.0000, -0.9009, -85.5211), (50.0000, 0.0000, -82.7485), 1.0000),
    ((50.0000, 0.0000, 0.0000), (50.0000, -1.0000, 2.0000), 2.3669),
    ((50.0000, -1.0000, 2.0000), (50.0000, 0.0000, 0.0000), 2.3669),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0009), 7.1792),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0010), 7.1792),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0011), 7.2195),
    ((50.0000, 2.4900, -0.0010), (50.0000, -2.4900, 0.0012), 7.2195),
    ((50.0000, -0.0010, 2.4900), (50.0000, 0.0009, -2.4900), 4.8045),
    ((50.0000, -0.0010, 2.4900), (50.0000, 0.0010, -2.4900), 4.8045),
    ((50.0000, -0.0010, 2.4900), (50.0000, 0.0011, -2.4900), 4.7461),
    ((50.0000, 2.5000, 0.0000), (50.0000, 0.0000, -2.5000), 4.3065),
    ((50.0000, 2.5000, 0.0000), (73.0000, 25.0000, -18.0000), 27.1492),
    ((50.0000, 2.5000, 0.0000), (61.0000, -5.0000, 29.0000), 22.8977),
    ((50.0000, 2.5000, 0.0000), (56.0000, -27.0000, -3.0000), 31.9030),
    ((50.0000, 2.5000, 0.0000), (58.0000, 24.0000, 15.0000), 19.4535),
    ((50.0000, 2.5000, 0.0000), (50.0000, 3.1736, 0.5854), 1.0000),
    ((50.0000, 2.5000, 0.0000), (50.0000, 3.2972, 0.0000), 1.0000),
    ((50.0000, 2.5000, 0.0000), (50.0000, 1.8634, 0.5757), 1.0000),
    ((50.0000, 2.5000, 0.0000), (50.0000, 3.2592, 0.3350), 1.0000),
    ((60.2574, -34.0099, 36.2677), (60.4626, -34.1751, 39.4387), 1.2644),
    ((63.0109, -31.0961, -5.8663), (62.8187, -29.7946, -4.0864), 1.2630),
    ((61.2901, 3.7196, -5.3901), (61.4292, 2.2480, -4.9620), 1.8731),
    ((35.0831, -44.1164, 3.7933), (35.0232, -40.0716, 1.5901), 1.8645),
    ((22.7233, 20.0904, -46.6940), (23.0331, 14.9730, -42.5619), 2.0373),
    ((36.4612, 47.8580, 18.3852), (36.2715, 50.5065, 21.2231), 1.4146),
    ((90.8027, -2.0831, 1.4410), (91.1528, -1.6435, 0.0447), 1.4441),
    ((90.9257, -0.5406, -0.9208), (88.6381, -0.8985, -0.7239), 1.5381),
    ((6.7747, -0.2908, -2.4247), (5.8714, -0.0985, -2.2286), 0.6377),
    ((2.0776, 0.0795, -1.1350), (0.9033, -0.0636, -0.5514), 0.9082),
]


def _pixel(*rgb):
    return np.array(rgb, dtype=float).reshape(1, 1, 3)


# =========================================================
#   MSE
# =========================================================
def test_mse_examples(rng):
    a = rng.random((3, 4, 3))
    assert mse_image(a, a) == 0.0
    assert mse_image(_pixel(0, 0, 0), _pixel(1, 1, 1)) == pytest.approx(65025.0)
    b = rng.random((3, 4, 3))
    ref = sum(((x - y) * 255) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
    assert mse_image(a, b) == pytest.approx(ref, abs=1e-9)


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        mse_image(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))


# =========================================================
#   Erreur angulaire
# =========================================================
def test_mae_examples():
    assert mae_image(_pixel(0.3, 0.5, 0.2), _pixel(0.3, 0.5, 0.2)) == 0.0
    assert mae_image(_pixel(1, 0, 0), _pixel(0, 1, 0)) == pytest.approx(90.0, abs=1e-9)
    assert mae_image(_pixel(1, 1, 0), _pixel(1, 0, 0)) == pytest.approx(45.0, abs=1e-9)


def test_mae_zero_norm_pixel_contributes_zero():
    a = np.array([[[0, 0, 0], [1, 0, 0]]], dtype=float)
    b = np.array([[[1, 1, 1], [0, 1, 0]]], dtype=float)
    np.testing.assert_allclose(angular_error(a, b), [0.0, 90.0], atol=1e-9)
    assert mae_image(a, b) == pytest.approx(45.0, abs=1e-9)


def test_mae_scale_invariant(rng):
    a, b = rng.uniform(0.05, 1, (4, 4, 3)), rng.uniform(0.05, 1, (4, 4, 3))
    assert mae_image(3.7 * a, b) == pytest.approx(mae_image(a, b), abs=1e-9)


def test_mae_range(rng):
    errors = angular_error(rng.normal(size=(8, 8, 3)), rng.normal(size=(8, 8, 3)))
    assert np.all((errors >= 0) & (errors <= 180))


# =========================================================
#   CIEDE2000
# =========================================================
@pytest.mark.parametrize("lab1, lab2, expected", CIEDE2000_PAIRS)
def test_ciede2000_conformance(lab1, lab2, expected):
    assert float(de2000_lab(lab1, lab2)) == pytest.approx(expected, abs=5e-4)


def test_ciede2000_vectorized():
    lab1 = np.array([p[0] for p in CIEDE2000_PAIRS])
    lab2 = np.array([p[1] for p in CIEDE2000_PAIRS])
    expected = np.array([p[2] for p in CIEDE2000_PAIRS])
    np.testing.assert_allclose(de2000_lab(lab1, lab2), expected, atol=5e-4)


def test_de2000_identical_images_zero(rng):
    a = rng.random((4, 4, 3))
    assert de2000_image(a, a) == pytest.approx(0.0, abs=1e-12)


def test_srgb_lab_roundtrip(rng):
    rgb = rng.uniform(0.01, 0.99, (50, 3))
    np.testing.assert_allclose(lab_to_srgb(srgb_to_lab(rgb)), rgb, atol=1e-6)


def test_white_maps_to_l100():
    np.testing.assert_allclose(srgb_to_lab(np.ones(3)), [100.0, 0.0, 0.0], atol=1e-2)


# =========================================================
#   Symétrie et positivité
# =========================================================
def test_metrics_symmetric():
    gen = philox(31)
    for _ in range(5):
        a, b = gen.random((3, 3, 3)), gen.random((3, 3, 3))
        assert mse_image(a, b) == pytest.approx(mse_image(b, a), abs=1e-9)
        assert mae_image(a, b) == pytest.approx(mae_image(b, a), abs=1e-9)
        assert de2000_image(a, b) == pytest.approx(de2000_image(b, a), abs=1e-9)


def test_metrics_positive_on_differing_inputs(rng):
    a = rng.uniform(0.1, 0.9, (2, 2, 3))
    b = a.copy()
    b[0, 0] = [0.9, 0.1, 0.1]
    assert mse_image(a, b) > 0
    assert mae_image(a, b) > 0
    assert de2000_image(a, b) > 0


# =========================================================
#   Agrégation et rapport
# =========================================================
def test_aggregate_examples():
    assert aggregate([2.5]) == {"mean": 2.5, "q1": 2.5, "q2": 2.5, "q3": 2.5}
    agg = aggregate([4, 1, 3, 2])
    assert agg["mean"] == pytest.approx(2.5)
    assert (agg["q1"], agg["q2"], agg["q3"]) == pytest.approx((1.75, 2.5, 3.25))


def test_aggregate_permutation_invariant(rng):
    values = rng.random(17)
    assert aggregate(values) == aggregate(values[::-1])


def test_aggregate_empty():
    with pytest.raises(EmptyDatasetError):
        aggregate([])


def test_evaluate_report(rng):
    imgs = [rng.random((4, 4, 3)) for _ in range(3)]
    report = evaluate([("a", imgs[0], imgs[0]), ("b", imgs[1], imgs[2]), ("c", imgs[2], imgs[0])])
    assert list(report.per_image.columns) == ["image", "mse", "mae_deg", "de2000"]
    assert report.per_image.loc[0, "mse"] == 0.0
    for metric in ("mse", "mae_deg", "de2000"):
        row = report.aggregates.loc[metric]
        assert row["q1"] <= row["q2"] <= row["q3"]
    summary = report.to_dict()
    assert summary["count"] == 3
    assert set(summary["metrics"]) == {"mse", "mae_deg", "de2000"}


def test_build_report_empty():
    with pytest.raises(EmptyDatasetError):
        build_report([])

import pytest

from core.bench import BENCH_COLUMNS, bench, per_pixel_counts, size_mb, speedup, synthetic_stack
from core.dncm import chain_a, chain_c, init_params
from core.encoder import encoder_mul_count, init_encoder
from core.errors import ConfigError
from core.linalg import CountingMatmul, unfold
from tests.conftest import philox


def test_per_pixel_counts_n5_k32():
    params = init_params(32, 5)
    naive_c, naive_a = per_pixel_counts(params, precomposed=False)
    fast_c, fast_a = per_pixel_counts(params, precomposed=True)
    assert (naive_c, fast_c) == (2624, 45)
    assert (naive_a, fast_a) == (1216, 9)
    assert naive_c / fast_c == pytest.approx(58.31, abs=0.01)


def test_bench_report_rows():
    params = init_params(32, 5, seed=1)
    enc = init_encoder(5, 32, seed=2, widths=(4, 8))
    report = bench([(16, 16), (8, 24)], params, enc, low_res_side=8, repeats=1, warmup=0)
    assert list(report.columns) == BENCH_COLUMNS
    assert len(report) == 4
    naive = report[(report.variant == "naive") & (report.height == 16)].iloc[0]
    fast = report[(report.variant == "precomposed") & (report.height == 16)].iloc[0]
    assert naive.mul_count == (2624 + 1216) * 256
    assert fast.mul_count == (45 + 9) * 256
    assert naive.encoder_mul_count == encoder_mul_count(enc, 8)
    assert naive.parameter_count == params.parameter_count + enc.parameter_count
    assert naive.size_mb == pytest.approx(naive.parameter_count * 8 / 2 ** 20)
    assert (report.wall_time_seconds > 0).all()
    assert (report.pixels_per_second > 0).all()
    assert len(speedup(report)) == 2


def test_bench_mul_count_matches_instrumented_chain():
    params = init_params(8, 3, seed=3)
    d = philox(4).random((8, 8))
    stack = synthetic_stack(4, 5, 3)
    counter = CountingMatmul()
    canon = counter.chain(unfold(stack), chain_c(d, params))
    counter.chain(canon, chain_a(params))
    report = bench([(4, 5)], params, None, repeats=1, warmup=0)
    assert report[report.variant == "naive"].mul_count.iloc[0] == counter.count


def test_bench_empty_resolutions():
    with pytest.raises(ConfigError):
        bench([], init_params(4, 1))


def test_size_mb():
    assert size_mb(2 ** 17) == 1.0


@pytest.mark.slow
def test_precomposed_speedup_on_twelve_megapixels():
    params = init_params(32, 5, seed=0)
    report = bench([(3000, 4000)], params, None, repeats=3, warmup=1)
    assert speedup(report)["speedup"].iloc[0] >= 10.0


@pytest.mark.slow
def test_wall_time_scales_with_pixels():
    params = init_params(32, 5, seed=0)
    report = bench([(512, 512), (1024, 1024)], params, None, repeats=5, warmup=2)
    naive = report[report.variant == "naive"].set_index("height").wall_time_seconds
    assert 3.0 <= naive[1024] / naive[512] <= 5.0

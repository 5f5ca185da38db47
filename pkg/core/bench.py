# core/bench.py
"""
Banc d'efficacité : chaîne naïve Pc·d·Qc·Rc / Pa·Qa·Ra contre matrices précomposées,
sur des piles synthétiques de plusieurs résolutions.
"""
import logging
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.dncm import DncmParams, dncm_a, dncm_c, pixel_chain_shapes_a, pixel_chain_shapes_c
from core.encoder import EncoderParams, downsample, encode, encoder_mul_count
from core.errors import ConfigError
from core.linalg import ImageStack, mul_count

logger = logging.getLogger(__name__)

VARIANTS: Tuple[str, ...] = ("naive", "precomposed")
BENCH_COLUMNS = [
    "variant", "height", "width", "wall_time_seconds", "pixels_per_second",
    "mul_count", "mul_count_per_pixel", "mul_count_c_per_pixel", "mul_count_a_per_pixel",
    "encoder_mul_count", "parameter_count", "size_mb",
]
BYTES_PER_PARAM = 8


def size_mb(parameter_count: int) -> float:
    return parameter_count * BYTES_PER_PARAM / 2 ** 20


def per_pixel_counts(params: DncmParams, precomposed: bool) -> Tuple[int, int]:
    """Multiplications par pixel de DNCMc et de DNCMa."""
    return (
        mul_count(pixel_chain_shapes_c(params, precomposed)),
        mul_count(pixel_chain_shapes_a(params, precomposed)),
    )


def synthetic_stack(height: int, width: int, n_settings: int, seed: int = 0) -> ImageStack:
    gen = np.random.Generator(np.random.Philox(seed))
    return ImageStack(gen.random((height, width, 3 * n_settings)))


def median_time(fn: Callable[[], object], repeats: int = 5, warmup: int = 2) -> float:
    """Médiane de `repeats` mesures (horloge monotone) après `warmup` exécutions."""
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench(resolutions: Sequence[Tuple[int, int]], params: DncmParams,
          enc: Optional[EncoderParams] = None, low_res_side: int = 256, threads: int = 1,
          repeats: int = 5, warmup: int = 2, seed: int = 0) -> pd.DataFrame:
    """
    Une ligne par (variante, résolution). Le temps mesuré couvre DNCMc + DNCMa à d fixé ;
    l'encodeur, indépendant de la résolution, est compté à part (encoder_mul_count).
    """
    if not resolutions:
        raise ConfigError("❌ Liste de résolutions vide")
    params_total = params.parameter_count + (enc.parameter_count if enc is not None else 0)
    enc_muls = encoder_mul_count(enc, low_res_side) if enc is not None else 0

    rows: List[dict] = []
    for height, width in resolutions:
        stack = synthetic_stack(height, width, params.n_settings, seed)
        d = encode(downsample(stack, low_res_side), enc) if enc is not None else np.eye(params.k)
        pixels = height * width
        for variant in VARIANTS:
            pre = variant == "precomposed"

            def run(stack=stack, d=d, pre=pre):
                canon = dncm_c(stack, d, params, precompose=pre, workers=threads)
                return dncm_a(canon, params, precompose=pre, workers=threads)

            wall = median_time(run, repeats, warmup)
            c_px, a_px = per_pixel_counts(params, pre)
            rows.append({
                "variant": variant,
                "height": height,
                "width": width,
                "wall_time_seconds": wall,
                "pixels_per_second": pixels / wall if wall > 0 else float("inf"),
                "mul_count": (c_px + a_px) * pixels,
                "mul_count_per_pixel": c_px + a_px,
                "mul_count_c_per_pixel": c_px,
                "mul_count_a_per_pixel": a_px,
                "encoder_mul_count": enc_muls,
                "parameter_count": params_total,
                "size_mb": size_mb(params_total),
            })
            logger.info("%s %d×%d : %.4f s", variant, height, width, wall)
        del stack
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)


def speedup(report: pd.DataFrame) -> pd.DataFrame:
    """Rapport temps naïf / temps précomposé par résolution."""
    wide = report.pivot_table(index=["height", "width"], columns="variant", values="wall_time_seconds")
    out = (wide["naive"] / wide["precomposed"]).rename("speedup").reset_index()
    return out

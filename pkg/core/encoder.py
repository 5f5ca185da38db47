# core/encoder.py
"""
Encodeur basse résolution E et vectoriseur V : d = V(E(Î)).

E : étages de convolutions 3×3, pas 2, padding zéro "same", suivies de GeLU.
V : convolution 1×1 vers k² canaux, GeLU, moyenne globale, remise en forme k×k (ordre ligne).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core.errors import ConfigError, ShapeError
from core.linalg import ImageStack, gelu, gelu_grad

logger = logging.getLogger(__name__)

DEFAULT_WIDTHS: Tuple[int, ...] = (16, 32, 64)
DEFAULT_LOW_RES_SIDE = 256
KERNEL = 3
STRIDE = 2


@dataclass
class ConvStage:
    weight: np.ndarray  # (3, 3, Cin, Cout)
    bias: np.ndarray    # (Cout,)

    @property
    def c_in(self) -> int:
        return self.weight.shape[2]

    @property
    def c_out(self) -> int:
        return self.weight.shape[3]


@dataclass
class EncoderParams:
    stages: List[ConvStage]
    head_weight: np.ndarray  # (Clast, k²)
    head_bias: np.ndarray    # (k²,)

    def __post_init__(self):
        if not self.stages:
            raise ConfigError("❌ L'encodeur doit avoir au moins un étage")
        c_prev = self.stages[0].c_in
        for i, st in enumerate(self.stages):
            st.weight = np.ascontiguousarray(st.weight, dtype=np.float64)
            st.bias = np.ascontiguousarray(st.bias, dtype=np.float64)
            if st.weight.shape[:2] != (KERNEL, KERNEL) or st.weight.ndim != 4:
                raise ShapeError(f"❌ Étage {i} : noyau {st.weight.shape}, attendu (3, 3, Cin, Cout)")
            if st.c_in != c_prev or st.bias.shape != (st.c_out,):
                raise ShapeError(f"❌ Étage {i} : largeurs incohérentes ({st.weight.shape}, biais {st.bias.shape})")
            c_prev = st.c_out
        self.head_weight = np.ascontiguousarray(self.head_weight, dtype=np.float64)
        self.head_bias = np.ascontiguousarray(self.head_bias, dtype=np.float64)
        k2 = self.head_bias.shape[0] if self.head_bias.ndim == 1 else -1
        k = int(round(np.sqrt(max(k2, 0))))
        if self.head_weight.shape != (c_prev, k2) or k * k != k2:
            raise ShapeError(
                f"❌ Tête 1×1 : poids {self.head_weight.shape}, biais {self.head_bias.shape} "
                f"(attendu ({c_prev}, k²) et (k²,))"
            )

    @property
    def in_channels(self) -> int:
        return self.stages[0].c_in

    @property
    def k(self) -> int:
        return int(round(np.sqrt(self.head_bias.shape[0])))

    def tensors(self) -> Dict[str, np.ndarray]:
        out = {}
        for i, st in enumerate(self.stages):
            out[f"enc.stage{i}.weight"] = st.weight
            out[f"enc.stage{i}.bias"] = st.bias
        out["enc.head.weight"] = self.head_weight
        out["enc.head.bias"] = self.head_bias
        return out

    def with_tensors(self, tensors: Dict[str, np.ndarray]) -> "EncoderParams":
        current = self.tensors()
        current.update({k: v for k, v in tensors.items() if k in current})
        stages = [
            ConvStage(current[f"enc.stage{i}.weight"], current[f"enc.stage{i}.bias"])
            for i in range(len(self.stages))
        ]
        return EncoderParams(stages, current["enc.head.weight"], current["enc.head.bias"])

    @property
    def parameter_count(self) -> int:
        return sum(t.size for t in self.tensors().values())


def init_encoder(n_settings: int, k: int, seed: int = 0,
                 widths: Sequence[int] = DEFAULT_WIDTHS) -> EncoderParams:
    """Poids uniformes dans [-a, a], a = sqrt(1/fan_in), biais nuls ; générateur Philox."""
    gen = np.random.Generator(np.random.Philox(seed))
    stages = []
    c_in = 3 * n_settings
    for c_out in widths:
        bound = np.sqrt(1.0 / (KERNEL * KERNEL * c_in))
        weight = gen.uniform(-bound, bound, size=(KERNEL, KERNEL, c_in, c_out))
        stages.append(ConvStage(weight, np.zeros(c_out)))
        c_in = c_out
    bound = np.sqrt(1.0 / c_in)
    head_weight = gen.uniform(-bound, bound, size=(c_in, k * k))
    return EncoderParams(stages, head_weight, np.zeros(k * k))


def _resize_axis(n_in: int, n_out: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # centres de pixels : src = (i + 0.5)·n_in/n_out − 0.5, borné aux bords
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Redimensionnement bilinéaire séparable, chaque canal indépendamment."""
    y0, y1, wy = _resize_axis(img.shape[0], out_h)
    x0, x1, wx = _resize_axis(img.shape[1], out_w)
    rows = img[y0] * (1.0 - wy)[:, None, None] + img[y1] * wy[:, None, None]
    return rows[:, x0] * (1.0 - wx)[None, :, None] + rows[:, x1] * wx[None, :, None]


def downsample(img: ImageStack, side: int = DEFAULT_LOW_RES_SIDE) -> ImageStack:
    """Pile basse résolution side×side (LowResStack) pour l'encodeur."""
    if side < 8:
        raise ConfigError(f"❌ La résolution basse doit être ≥ 8, reçu {side}")
    return ImageStack(resize_bilinear(img.data, side, side))


def conv_output_size(n: int) -> int:
    return (n + STRIDE - 1) // STRIDE


def conv3x3_s2(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Convolution 3×3, pas 2, padding 1 : sortie ceil(H/2)×ceil(W/2)×Cout."""
    h, w, _ = x.shape
    ho, wo = conv_output_size(h), conv_output_size(w)
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    out = np.broadcast_to(bias, (ho, wo, bias.shape[0])).copy()
    for i in range(KERNEL):
        for j in range(KERNEL):
            patch = xp[i:i + STRIDE * ho:STRIDE, j:j + STRIDE * wo:STRIDE, :]
            out += patch @ weight[i, j]
    return out


def conv3x3_s2_backward(x: np.ndarray, weight: np.ndarray, grad_out: np.ndarray):
    """Gradients (entrée, poids, biais) de conv3x3_s2."""
    h, w, _ = x.shape
    ho, wo, c_out = grad_out.shape
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    grad_xp = np.zeros_like(xp)
    grad_w = np.zeros_like(weight)
    g2 = grad_out.reshape(ho * wo, c_out)
    for i in range(KERNEL):
        for j in range(KERNEL):
            patch = xp[i:i + STRIDE * ho:STRIDE, j:j + STRIDE * wo:STRIDE, :]
            grad_w[i, j] = patch.reshape(ho * wo, -1).T @ g2
            grad_xp[i:i + STRIDE * ho:STRIDE, j:j + STRIDE * wo:STRIDE, :] += grad_out @ weight[i, j].T
    grad_b = g2.sum(axis=0)
    return grad_xp[1:h + 1, 1:w + 1, :], grad_w, grad_b


@dataclass
class EncoderCache:
    """Activations conservées pour la rétropropagation."""

    inputs: List[np.ndarray] = field(default_factory=list)
    pre: List[np.ndarray] = field(default_factory=list)
    features: np.ndarray = None
    head_pre: np.ndarray = None


def encode_forward(lr: ImageStack, enc: EncoderParams) -> Tuple[np.ndarray, EncoderCache]:
    if lr.data.shape[2] != enc.in_channels:
        raise ShapeError(
            f"❌ L'encodeur attend {enc.in_channels} canaux, la pile basse résolution en a {lr.data.shape[2]}"
        )
    cache = EncoderCache()
    x = lr.data
    for st in enc.stages:
        cache.inputs.append(x)
        z = conv3x3_s2(x, st.weight, st.bias)
        cache.pre.append(z)
        x = gelu(z)
    cache.features = x
    cache.head_pre = x @ enc.head_weight + enc.head_bias
    pooled = gelu(cache.head_pre).mean(axis=(0, 1))
    k = enc.k
    return pooled.reshape(k, k), cache


def encode(lr: ImageStack, enc: EncoderParams) -> np.ndarray:
    """Matrice latente d (k×k) adaptée à l'image."""
    d, _ = encode_forward(lr, enc)
    return d


def encode_backward(cache: EncoderCache, enc: EncoderParams, upstream: np.ndarray) -> Dict[str, np.ndarray]:
    h, w, _ = cache.head_pre.shape
    g_pooled = np.asarray(upstream, dtype=np.float64).reshape(-1)
    g_head_pre = np.broadcast_to(g_pooled / (h * w), cache.head_pre.shape) * gelu_grad(cache.head_pre)
    feats = cache.features
    grads = {
        "enc.head.weight": feats.reshape(h * w, -1).T @ g_head_pre.reshape(h * w, -1),
        "enc.head.bias": g_head_pre.sum(axis=(0, 1)),
    }
    g_x = g_head_pre @ enc.head_weight.T
    for i in reversed(range(len(enc.stages))):
        st = enc.stages[i]
        g_z = g_x * gelu_grad(cache.pre[i])
        g_x, g_w, g_b = conv3x3_s2_backward(cache.inputs[i], st.weight, g_z)
        grads[f"enc.stage{i}.weight"] = g_w
        grads[f"enc.stage{i}.bias"] = g_b
    return grads


def encode_grad(lr: ImageStack, enc: EncoderParams, upstream: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients exacts (mode inverse) de encode par rapport à tous les paramètres de l'encodeur."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (enc.k, enc.k):
        raise ShapeError(f"❌ Gradient amont {upstream.shape}, attendu ({enc.k}, {enc.k})")
    _, cache = encode_forward(lr, enc)
    return encode_backward(cache, enc, upstream)


def encoder_mul_count(enc: EncoderParams, side: int) -> int:
    """Multiplications d'un passage avant de l'encodeur sur une entrée side×side."""
    total, h = 0, side
    for st in enc.stages:
        h = conv_output_size(h)
        total += h * h * KERNEL * KERNEL * st.c_in * st.c_out
    return total + h * h * enc.head_weight.shape[0] * enc.head_weight.shape[1]

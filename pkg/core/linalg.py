# core/linalg.py
"""
Noyau d'algèbre linéaire : matrices denses float64, produit matriciel,
dépliage image <-> matrice de pixels, GeLU et comptage des multiplications.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.special import ndtr

from core.errors import ShapeError

logger = logging.getLogger(__name__)

# Taille fixe des blocs de lignes : ne dépend jamais du nombre de threads.
BLOCK_ROWS = 1 << 16

Matrix = np.ndarray
PixelMatrix = np.ndarray
Shape = Tuple[int, int]


def as_matrix(x) -> Matrix:
    m = np.ascontiguousarray(x, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"❌ Matrice 2D non vide attendue, reçu la forme {m.shape}")
    return m


@dataclass(frozen=True)
class ImageStack:
    """
    Image H×W à 3N canaux : les N rendus WB concaténés (réglage 0 en RGB, puis réglage 1, ...).
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"❌ Pile d'images H×W×3N attendue, reçu la forme {data.shape}")
        if data.shape[2] < 3 or data.shape[2] % 3 != 0:
            raise ShapeError(f"❌ Le nombre de canaux doit être un multiple de 3, reçu {data.shape[2]}")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def settings(self) -> int:
        return self.data.shape[2] // 3

    @property
    def pixels(self) -> int:
        return self.height * self.width

    def block(self, j: int) -> np.ndarray:
        """Canaux RGB du réglage j (vue H×W×3)."""
        if not 0 <= j < self.settings:
            raise IndexError(f"réglage {j} hors de [0, {self.settings})")
        return self.data[:, :, 3 * j:3 * j + 3]

    def crop(self, y: int, x: int, h: int, w: int) -> "ImageStack":
        return ImageStack(self.data[y:y + h, x:x + w])


def check_canonical(img, name: str = "image") -> np.ndarray:
    arr = np.ascontiguousarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"❌ {name} : image H×W×3 attendue, reçu la forme {arr.shape}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"❌ Dimensions différentes : {a.shape} vs {b.shape}")


def _check_chain(shapes: Sequence[Shape]) -> None:
    for left, right in zip(shapes, shapes[1:]):
        if left[1] != right[0]:
            raise ShapeError(f"❌ Produit impossible : {left[0]}×{left[1]} · {right[0]}×{right[1]}")


def _rows_product(block: np.ndarray, mats: Sequence[Matrix]) -> np.ndarray:
    # une ligne seule est doublée : toujours gemm, jamais gemv
    single = block.shape[0] == 1
    out = np.vstack([block, block]) if single else block
    for m in mats:
        out = out @ m
    return out[:1] if single else out


def chain_product(pm: PixelMatrix, mats: Sequence[Matrix], workers: int = 1,
                  block_rows: int = BLOCK_ROWS) -> np.ndarray:
    """
    Évalue pm · M1 · M2 · ... de gauche à droite, par blocs de lignes de taille fixe.
    Chaque bloc de sortie a un seul écrivain : le résultat est identique bit à bit
    quel que soit le nombre de threads.
    """
    pm = as_matrix(pm)
    mats = [as_matrix(m) for m in mats]
    _check_chain([pm.shape] + [m.shape for m in mats])
    rows = pm.shape[0]
    out = np.empty((rows, mats[-1].shape[1] if mats else pm.shape[1]), dtype=np.float64)

    def run(start: int) -> None:
        stop = min(start + block_rows, rows)
        out[start:stop] = _rows_product(pm[start:stop], mats)

    starts = range(0, rows, block_rows)
    if workers <= 1 or rows <= block_rows:
        for start in starts:
            run(start)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return out


def matmul(a: Matrix, b: Matrix, workers: int = 1) -> Matrix:
    """Produit standard a·b, résultat (a.rows × b.cols)."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"❌ Produit impossible : {a.shape[0]}×{a.shape[1]} · {b.shape[0]}×{b.shape[1]}")
    return chain_product(a, [b], workers=workers)


def unfold(img: ImageStack) -> PixelMatrix:
    """Ligne p = les 3N canaux du pixel p, pixels en ordre ligne par ligne."""
    return img.data.reshape(img.pixels, img.data.shape[2]).copy()


def fold(pm: PixelMatrix, height: int, width: int, settings: int) -> ImageStack:
    pm = np.asarray(pm, dtype=np.float64)
    if pm.ndim != 2 or pm.shape != (height * width, 3 * settings):
        raise ShapeError(
            f"❌ Repliage impossible : matrice {pm.shape} vers image {height}×{width}×{3 * settings}"
        )
    return ImageStack(pm.reshape(height, width, 3 * settings).copy())


def gelu(x) -> np.ndarray:
    """GeLU exacte : x·Φ(x), Φ étant la fonction de répartition gaussienne (forme erf)."""
    x = np.asarray(x, dtype=np.float64)
    return x * ndtr(x)


def gelu_grad(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return ndtr(x) + x * pdf


def gelu_tanh(x) -> np.ndarray:
    """Approximation tanh de GeLU, gardée uniquement pour comparaison."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x ** 3)))


def mul_count(shapes: Sequence[Shape]) -> int:
    """
    Nombre de multiplications scalaires pour évaluer la chaîne de gauche à droite :
    somme des m·k·n sur chaque produit successif.
    """
    shapes = [tuple(int(v) for v in s) for s in shapes]
    if not shapes:
        raise ShapeError("❌ Chaîne vide")
    _check_chain(shapes)
    rows, total = shapes[0][0], 0
    for inner, cols in shapes[1:]:
        total += rows * inner * cols
    return total


class CountingMatmul:
    """Produit matriciel instrumenté : cumule les multiplications réellement effectuées."""

    def __init__(self, matmul_fn: Callable[[Matrix, Matrix], Matrix] = matmul):
        self.count = 0
        self._matmul = matmul_fn

    def __call__(self, a: Matrix, b: Matrix) -> Matrix:
        out = self._matmul(a, b)
        self.count += a.shape[0] * a.shape[1] * b.shape[1]
        return out

    def chain(self, first: Matrix, mats: List[Matrix]) -> Matrix:
        out = first
        for m in mats:
            out = self(out, m)
        return out

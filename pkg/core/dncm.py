# core/dncm.py
"""
Modules de mapping couleur déterministe (DNCM) :
  - DNCMc : pile 3N canaux -> forme canonique, avec injection de la matrice latente d ;
  - DNCMa : forme canonique -> image AWB, sans fusion.
Les deux sont des produits matriciels purs (aucun biais), appliqués pixel par pixel.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Tuple

import numpy as np

from core.errors import ConfigError, ShapeError
from core.linalg import (
    ImageStack,
    Matrix,
    Shape,
    as_matrix,
    chain_product,
    check_canonical,
    fold,
    unfold,
)

logger = logging.getLogger(__name__)

DEFAULT_K = 32
PARAM_NAMES: Tuple[str, ...] = ("pc", "qc", "rc", "pa", "qa", "ra")

LatentCode = np.ndarray
CanonicalImage = np.ndarray


def param_shapes(k: int, n_settings: int) -> Dict[str, Shape]:
    return {
        "pc": (3 * n_settings, k),
        "qc": (k, k),
        "rc": (k, 3),
        "pa": (3, k),
        "qa": (k, k),
        "ra": (k, 3),
    }


@dataclass(frozen=True)
class DncmParams:
    """Matrices de projection apprises : {Pc, Qc, Rc} pour DNCMc et {Pa, Qa, Ra} pour DNCMa."""

    k: int
    n_settings: int
    pc: Matrix
    qc: Matrix
    rc: Matrix
    pa: Matrix
    qa: Matrix
    ra: Matrix

    def __post_init__(self):
        expected = param_shapes(self.k, self.n_settings)
        for name in PARAM_NAMES:
            value = as_matrix(getattr(self, name))
            if value.shape != expected[name]:
                raise ShapeError(f"❌ {name} : forme {value.shape}, attendu {expected[name]}")
            object.__setattr__(self, name, value)
        arrays = [getattr(self, name) for name in PARAM_NAMES]
        for i, a in enumerate(arrays):
            for b in arrays[i + 1:]:
                if np.shares_memory(a, b):
                    raise ConfigError("❌ Les matrices DNCMc et DNCMa ne doivent pas partager leurs données")

    def tensors(self) -> Dict[str, Matrix]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_tensors(self, tensors: Dict[str, Matrix]) -> "DncmParams":
        return replace(self, **{n: tensors[n] for n in PARAM_NAMES if n in tensors})

    @property
    def parameter_count(self) -> int:
        return sum(m.size for m in self.tensors().values())


def check_latent(d, params: DncmParams) -> LatentCode:
    d = as_matrix(d)
    if d.shape != (params.k, params.k):
        raise ShapeError(f"❌ Matrice latente {d.shape}, attendu ({params.k}, {params.k})")
    return d


def init_params(k: int = DEFAULT_K, n_settings: int = 1, seed: int = 0) -> DncmParams:
    """
    Initialisation reproductible : chaque matrice est tirée uniformément dans [-a, a],
    a = sqrt(1/fan_in), avec le générateur à compteur Philox, dans l'ordre Pc, Qc, Rc, Pa, Qa, Ra.
    """
    if k < 3:
        raise ConfigError(f"❌ k doit être ≥ 3 (plongement de l'identité RGB), reçu {k}")
    if n_settings < 1:
        raise ConfigError(f"❌ Au moins un réglage WB est requis, reçu {n_settings}")
    gen = np.random.Generator(np.random.Philox(seed))
    tensors = {}
    for name, (rows, cols) in param_shapes(k, n_settings).items():
        bound = np.sqrt(1.0 / rows)
        tensors[name] = gen.uniform(-bound, bound, size=(rows, cols))
    return DncmParams(k=k, n_settings=n_settings, **tensors)


def identity_params(k: int = DEFAULT_K, n_settings: int = 1) -> DncmParams:
    """Paramètres dont la chaîne complète (avec d = I) recopie le réglage 0."""
    if k < 3:
        raise ConfigError(f"❌ k doit être ≥ 3, reçu {k}")
    embed = np.zeros((k, 3))
    embed[:3, :3] = np.eye(3)
    pc = np.zeros((3 * n_settings, k))
    pc[:3, :3] = np.eye(3)
    return DncmParams(
        k=k,
        n_settings=n_settings,
        pc=pc,
        qc=np.eye(k),
        rc=embed.copy(),
        pa=embed.T.copy(),
        qa=np.eye(k),
        ra=embed.copy(),
    )


def chain_c(d: LatentCode, params: DncmParams) -> List[Matrix]:
    return [params.pc, d, params.qc, params.rc]


def chain_a(params: DncmParams) -> List[Matrix]:
    return [params.pa, params.qa, params.ra]


def pixel_chain_shapes_c(params: DncmParams, precomposed: bool = False) -> List[Shape]:
    n3, k = 3 * params.n_settings, params.k
    if precomposed:
        return [(1, n3), (n3, 3)]
    return [(1, n3), (n3, k), (k, k), (k, k), (k, 3)]


def pixel_chain_shapes_a(params: DncmParams, precomposed: bool = False) -> List[Shape]:
    k = params.k
    if precomposed:
        return [(1, 3), (3, 3)]
    return [(1, 3), (3, k), (k, k), (k, 3)]


def precompose_c(d: LatentCode, params: DncmParams) -> Matrix:
    """Pc·d·Qc·Rc réduit à une seule matrice 3N×3."""
    d = check_latent(d, params)
    out = params.pc
    for m in chain_c(d, params)[1:]:
        out = out @ m
    return out


def precompose_a(params: DncmParams) -> Matrix:
    """Pa·Qa·Ra réduit à une seule matrice 3×3."""
    return params.pa @ params.qa @ params.ra


def dncm_c(img: ImageStack, d: LatentCode, params: DncmParams,
           precompose: bool = False, workers: int = 1) -> CanonicalImage:
    """
    Forme canonique : fold(unfold(I) · Pc · d · Qc · Rc). Sortie non bornée
    (le bornage à [0, 1] se fait à l'encodage de l'image).
    """
    if img.settings != params.n_settings:
        raise ShapeError(
            f"❌ La pile a {img.settings} réglages (3N={3 * img.settings}), "
            f"Pc attend {3 * params.n_settings} canaux"
        )
    d = check_latent(d, params)
    mats = [precompose_c(d, params)] if precompose else chain_c(d, params)
    out = chain_product(unfold(img), mats, workers=workers)
    return fold(out, img.height, img.width, 1).data


def dncm_a(canon: CanonicalImage, params: DncmParams,
           precompose: bool = False, workers: int = 1) -> CanonicalImage:
    """Image AWB : fold(unfold(I_c) · Pa · Qa · Ra)."""
    canon = check_canonical(canon, "forme canonique")
    stack = ImageStack(canon)
    mats = [precompose_a(params)] if precompose else chain_a(params)
    out = chain_product(unfold(stack), mats, workers=workers)
    return fold(out, stack.height, stack.width, 1).data

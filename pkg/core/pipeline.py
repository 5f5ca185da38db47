# core/pipeline.py
"""
Chaîne complète d'inférence :
    pile (N rendus WB) -> basse résolution -> encodeur -> d
    -> DNCMc (forme canonique) -> DNCMa (image AWB)
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np

from config import PipelineConfig
from core.dncm import DncmParams, dncm_a, dncm_c
from core.encoder import EncoderParams, downsample, encode
from core.errors import ShapeError
from core.linalg import ImageStack, check_canonical
from utils.file_loader import load_image, load_stack

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineResult:
    canonical: np.ndarray  # H×W×3
    awb: np.ndarray        # H×W×3
    d: np.ndarray          # k×k


def assemble_stack(images: Sequence[np.ndarray], order: str) -> ImageStack:
    """Concatène les rendus par canal, dans l'ordre des lettres données."""
    if len(images) != len(order):
        raise ShapeError(f"❌ {len(images)} image(s) fournie(s) pour {len(order)} réglage(s) '{order}'")
    if not images:
        raise ShapeError("❌ Au moins une image est requise")
    blocks = [check_canonical(img, f"rendu '{letter}'") for img, letter in zip(images, order)]
    ref = blocks[0].shape
    for img, letter in zip(blocks, order):
        if img.shape != ref:
            raise ShapeError(f"❌ Rendu '{letter}' de forme {img.shape}, attendu {ref}")
    return ImageStack(np.concatenate(blocks, axis=2))


def stack_from_files(inputs: Dict[str, Union[str, Path]], order: str) -> ImageStack:
    """Charge un fichier par réglage (lettre -> chemin) et assemble la pile."""
    missing = [c for c in order if c not in inputs]
    if missing:
        raise ShapeError(f"❌ Rendus manquants pour les réglages : {''.join(missing)}")
    extra = sorted(set(inputs) - set(order))
    if extra:
        raise ShapeError(f"❌ Rendus inattendus pour les réglages : {''.join(extra)}")
    return assemble_stack([load_image(inputs[c]) for c in order], order)


def stack_from_npy(path: Union[str, Path]) -> ImageStack:
    return ImageStack(load_stack(path))


def run_pipeline(stack: ImageStack, params: DncmParams, enc: Optional[EncoderParams],
                 cfg: PipelineConfig) -> PipelineResult:
    """
    Sans encodeur (fichier DNIM sans section encodeur), d vaut l'identité k×k.
    """
    if stack.settings != params.n_settings:
        raise ShapeError(
            f"❌ La pile a {stack.settings} réglages, les paramètres en attendent {params.n_settings}"
        )
    if enc is None:
        d = np.eye(params.k)
        logger.info("aucun encodeur : d = I")
    else:
        if enc.in_channels != 3 * stack.settings or enc.k != params.k:
            raise ShapeError(
                f"❌ Encodeur ({enc.in_channels} canaux, k={enc.k}) incompatible avec "
                f"N={stack.settings}, k={params.k}"
            )
        d = encode(downsample(stack, cfg.low_res_side), enc)
    canonical = dncm_c(stack, d, params, precompose=cfg.use_precompose, workers=cfg.threads)
    awb = dncm_a(canonical, params, precompose=cfg.use_precompose, workers=cfg.threads)
    logger.debug("pipeline %d×%d, N=%d, précomposition=%s", stack.height, stack.width,
                 stack.settings, cfg.use_precompose)
    return PipelineResult(canonical=canonical, awb=awb, d=d)


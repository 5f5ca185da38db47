# core/trainer.py
"""
Entraînement de bout en bout des matrices DNCM (et, si non gelé, de l'encodeur)
sous la perte de reconstruction L = ||I_GT − I_AWB||²_F, avec AdamW.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import TrainConfig, WbSimConfig
from core.dncm import DncmParams, init_params
from core.encoder import EncoderParams, downsample, encode_backward, encode_forward, init_encoder, resize_bilinear
from core.errors import EmptyDatasetError, ShapeError, UnknownSettingError
from core.linalg import ImageStack, check_canonical, check_same_shape, unfold
from utils.file_loader import discover_samples, load_image

logger = logging.getLogger(__name__)

Tensors = Dict[str, np.ndarray]


@dataclass(frozen=True)
class TrainSample:
    stack: ImageStack
    target: np.ndarray  # H×W×3, vérité terrain AWB

    def __post_init__(self):
        target = check_canonical(self.target, "vérité terrain")
        if target.shape[:2] != (self.stack.height, self.stack.width):
            raise ShapeError(
                f"❌ Pile {self.stack.height}×{self.stack.width} et cible {target.shape[0]}×{target.shape[1]} différentes"
            )
        object.__setattr__(self, "target", target)

    @property
    def pixels(self) -> int:
        return self.stack.pixels


# =========================================================
#   Perte
# =========================================================
def loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Norme de Frobenius au carré de la différence (aucune moyenne)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    check_same_shape(pred, gt)
    diff = gt - pred
    return float(np.sum(diff * diff))


# =========================================================
#   Passage avant / arrière
# =========================================================
def sample_forward_backward(sample: TrainSample, params: DncmParams, enc: EncoderParams,
                            low_res_side: int, freeze_encoder: bool) -> Tuple[float, Tensors]:
    lr = downsample(sample.stack, low_res_side)
    d, cache = encode_forward(lr, enc)

    x = unfold(sample.stack)
    a1 = x @ params.pc
    a2 = a1 @ d
    a3 = a2 @ params.qc
    canon = a3 @ params.rc
    b1 = canon @ params.pa
    b2 = b1 @ params.qa
    pred = b2 @ params.ra
    err = pred - sample.target.reshape(-1, 3)
    value = float(np.sum(err * err))

    g = 2.0 * err
    grads = {"ra": b2.T @ g}
    g = g @ params.ra.T
    grads["qa"] = b1.T @ g
    g = g @ params.qa.T
    grads["pa"] = canon.T @ g
    g = g @ params.pa.T
    grads["rc"] = a3.T @ g
    g = g @ params.rc.T
    grads["qc"] = a2.T @ g
    g = g @ params.qc.T
    g_d = a1.T @ g
    g = g @ d.T
    grads["pc"] = x.T @ g

    if not freeze_encoder:
        grads.update(encode_backward(cache, enc, g_d))
    return value, grads


def backward(batch: Sequence[TrainSample], params: DncmParams, enc: EncoderParams,
             low_res_side: int = 256, freeze_encoder: bool = False,
             workers: int = 1) -> Tuple[float, Tensors]:
    """
    Perte sommée sur le batch et gradients exacts de tous les tenseurs entraînables.
    Un tenseur gelé est absent du dictionnaire (et non nul).
    Les contributions par échantillon sont additionnées dans l'ordre des indices.
    """
    def run(sample):
        return sample_forward_backward(sample, params, enc, low_res_side, freeze_encoder)

    if workers > 1 and len(batch) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, batch))
    else:
        results = [run(s) for s in batch]

    total, grads = 0.0, {}
    for value, sample_grads in results:
        total += value
        for name, g in sample_grads.items():
            grads[name] = grads[name] + g if name in grads else g.copy()
    return total, grads


# =========================================================
#   AdamW
# =========================================================
@dataclass
class AdamWState:
    step: int = 0
    m: Tensors = field(default_factory=dict)
    v: Tensors = field(default_factory=dict)


def adamw_step(tensors: Tensors, grads: Tensors, state: AdamWState,
               cfg: TrainConfig) -> Tuple[Tensors, AdamWState]:
    """
    Mise à jour AdamW avec décroissance découplée :
        θ ← θ − lr·m̂/(√v̂ + eps) − lr·wd·θ
    Les tenseurs sans gradient (gelés) sont recopiés tels quels.
    """
    t = state.step + 1
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    new_tensors, new_m, new_v = dict(tensors), dict(state.m), dict(state.v)
    for name, theta in tensors.items():
        if name not in grads:
            continue
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"❌ Gradient {name} : {g.shape} vs paramètre {theta.shape}")
        m = cfg.beta1 * state.m.get(name, np.zeros_like(theta)) + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v.get(name, np.zeros_like(theta)) + (1.0 - cfg.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        new_tensors[name] = theta - cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.eps)) - cfg.lr * cfg.weight_decay * theta
        new_m[name], new_v[name] = m, v
    return new_tensors, AdamWState(step=t, m=new_m, v=new_v)


def all_tensors(params: DncmParams, enc: EncoderParams) -> Tensors:
    tensors = dict(params.tensors())
    tensors.update(enc.tensors())
    return tensors


# =========================================================
#   Données synthétiques (modèle diagonal de von Kries)
# =========================================================
def synthesize_sample(base: np.ndarray, sim: WbSimConfig, settings: Sequence[str]) -> TrainSample:
    """
    Bloc j de la pile = image de référence multipliée canal par canal par les gains
    du réglage j, bornée à [0, 1]. La cible est l'image de référence.
    """
    base = check_canonical(base, "image de référence")
    blocks = []
    for letter in settings:
        if letter not in sim.gains:
            raise UnknownSettingError(f"❌ Réglage WB inconnu : '{letter}'")
        gains = np.asarray(sim.gains[letter], dtype=np.float64)
        blocks.append(np.clip(base * gains, 0.0, 1.0))
    return TrainSample(ImageStack(np.concatenate(blocks, axis=2)), base)


def synthetic_bases(count: int, side: int, seed: int = 0, grid: int = 4) -> List[np.ndarray]:
    """Images de référence lisses : grilles aléatoires grid×grid agrandies en bilinéaire."""
    gen = np.random.Generator(np.random.Philox(seed))
    return [resize_bilinear(gen.uniform(0.05, 0.95, size=(grid, grid, 3)), side, side) for _ in range(count)]


def tile_samples(samples: Sequence[TrainSample], patch: int) -> List[TrainSample]:
    """Découpe chaque échantillon en patchs p×p disjoints ; les bords incomplets sont ignorés."""
    tiles = []
    for s in samples:
        for y in range(0, s.stack.height - patch + 1, patch):
            for x in range(0, s.stack.width - patch + 1, patch):
                tiles.append(TrainSample(s.stack.crop(y, x, patch, patch), s.target[y:y + patch, x:x + patch]))
    return tiles


def load_dataset(directory: Union[str, Path], settings: Sequence[str],
                 sim: Optional[WbSimConfig] = None) -> List[TrainSample]:
    """
    Charge un dossier : groupes pré-rendus (<stem>_<L>, <stem>_G) tels quels,
    images simples complétées par le générateur de von Kries.
    """
    sim = sim or WbSimConfig()
    plain, rendered = discover_samples(directory)
    samples = []
    for stem, files in rendered.items():
        missing = [c for c in settings if c not in files]
        if missing:
            logger.warning("groupe %s ignoré : réglages manquants %s", stem, "".join(missing))
            continue
        blocks = [load_image(files[c]) for c in settings]
        samples.append(TrainSample(ImageStack(np.concatenate(blocks, axis=2)), load_image(files["g"])))
    samples += [synthesize_sample(load_image(p), sim, settings) for p in plain]
    logger.info("%d échantillons chargés depuis %s", len(samples), directory)
    return samples


# =========================================================
#   Boucle d'entraînement
# =========================================================
def batch_indices(n: int, batch_size: int, seed: int) -> Iterator[List[int]]:
    """Batches tirés d'une suite de permutations mélangées (avec bouclage)."""
    gen = np.random.Generator(np.random.Philox(seed))
    order, pos = gen.permutation(n), 0
    while True:
        batch = []
        while len(batch) < batch_size:
            if pos == n:
                order, pos = gen.permutation(n), 0
            batch.append(int(order[pos]))
            pos += 1
        yield batch


@dataclass
class TrainResult:
    params: DncmParams
    encoder: EncoderParams
    curve: pd.DataFrame  # colonnes : step, loss_sum, loss_per_pixel


def train(dataset: Sequence[TrainSample], cfg: TrainConfig,
          params: Optional[DncmParams] = None, enc: Optional[EncoderParams] = None,
          progress: bool = False) -> TrainResult:
    """
    cfg.steps pas d'AdamW sur des mini-batches mélangés (graine fixe).
    Encodeur gelé : ses poids restent inchangés bit à bit.
    """
    if not dataset:
        raise EmptyDatasetError("❌ Jeu de données vide")
    if cfg.patch_size:
        dataset = tile_samples(dataset, cfg.patch_size)
        if not dataset:
            raise EmptyDatasetError(f"❌ Aucune image n'atteint la taille de patch {cfg.patch_size}")
    n_settings = dataset[0].stack.settings
    params = params or init_params(cfg.k, n_settings, cfg.seed)
    enc = enc or init_encoder(n_settings, cfg.k, cfg.seed + 1, cfg.encoder_widths)
    if params.n_settings != n_settings or enc.in_channels != 3 * n_settings:
        raise ShapeError(f"❌ Paramètres prévus pour N={params.n_settings}, données à N={n_settings}")
    if params.k != cfg.k or enc.k != cfg.k:
        raise ShapeError(f"❌ Largeur k incohérente : DNCM k={params.k}, encodeur k={enc.k}, configuration k={cfg.k}")

    tensors = all_tensors(params, enc)
    state = AdamWState()
    rows = []
    batches = batch_indices(len(dataset), cfg.batch_size, cfg.seed + 2)
    for step in tqdm(range(1, cfg.steps + 1), disable=not progress, desc="entraînement"):
        batch = [dataset[i] for i in next(batches)]
        params = params.with_tensors(tensors)
        enc = enc.with_tensors(tensors)
        loss_sum, grads = backward(batch, params, enc, cfg.low_res_side, cfg.freeze_encoder, cfg.workers)
        tensors, state = adamw_step(tensors, grads, state, cfg)
        pixels = sum(s.pixels for s in batch)
        rows.append({"step": step, "loss_sum": loss_sum, "loss_per_pixel": loss_sum / pixels})
        if step == 1 or step % 100 == 0:
            logger.info("pas %d : perte %.6g (%.6g / pixel)", step, loss_sum, loss_sum / pixels)

    curve = pd.DataFrame(rows, columns=["step", "loss_sum", "loss_per_pixel"])
    return TrainResult(params.with_tensors(tensors), enc.with_tensors(tensors), curve)

# core/metrics.py
"""
Métriques d'évaluation AWB : MSE (échelle 8 bits), erreur angulaire moyenne (degrés)
et ΔE2000, agrégées en moyenne / Q1 / Q2 / Q3.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import colour
import numpy as np
import pandas as pd

from core.errors import EmptyDatasetError
from core.linalg import check_canonical, check_same_shape

logger = logging.getLogger(__name__)

METRICS: Tuple[str, ...] = ("mse", "mae_deg", "de2000")
STATISTICS: Tuple[str, ...] = ("mean", "q1", "q2", "q3")
ZERO_NORM = 1e-12


def _pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a = check_canonical(a, "image A")
    b = check_canonical(b, "image B")
    check_same_shape(a, b)
    return a, b


def mse_image(a, b) -> float:
    """Erreur quadratique moyenne sur les valeurs ×255."""
    a, b = _pair(a, b)
    diff = (a - b) * 255.0
    return float(np.mean(diff * diff))


def angular_error(a, b) -> np.ndarray:
    """Angle (degrés) entre les vecteurs RGB de chaque pixel ; 0° si l'un est de norme nulle."""
    a, b = _pair(a, b)
    pa = a.reshape(-1, 3)
    pb = b.reshape(-1, 3)
    na = np.linalg.norm(pa, axis=1)
    nb = np.linalg.norm(pb, axis=1)
    valid = (na >= ZERO_NORM) & (nb >= ZERO_NORM)
    # atan2(|a×b|, a·b) = arccos du cosinus borné, exact aux angles 0° et 90°
    cross = np.linalg.norm(np.cross(pa, pb), axis=1)
    dot = np.sum(pa * pb, axis=1)
    angles = np.degrees(np.arctan2(cross, dot))
    return np.where(valid, angles, 0.0)


def mae_image(a, b) -> float:
    return float(np.mean(angular_error(a, b)))


def srgb_to_lab(rgb) -> np.ndarray:
    """sRGB [0, 1] -> linéaire -> XYZ (D65) -> CIELAB (blanc D65)."""
    return colour.XYZ_to_Lab(colour.sRGB_to_XYZ(np.asarray(rgb, dtype=np.float64)))


def lab_to_srgb(lab) -> np.ndarray:
    return colour.XYZ_to_sRGB(colour.Lab_to_XYZ(np.asarray(lab, dtype=np.float64)))


def de2000_lab(lab1, lab2) -> np.ndarray:
    """CIEDE2000 (kL = kC = kH = 1) entre couleurs CIELAB."""
    return np.asarray(colour.difference.delta_E_CIE2000(
        np.asarray(lab1, dtype=np.float64), np.asarray(lab2, dtype=np.float64)
    ))


def de2000_image(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(de2000_lab(srgb_to_lab(a), srgb_to_lab(b))))


def aggregate(values: Sequence[float]) -> Dict[str, float]:
    """Moyenne et quartiles par interpolation linéaire (type 7) sur les valeurs triées."""
    arr = np.sort(np.asarray(list(values), dtype=np.float64))
    if arr.size == 0:
        raise EmptyDatasetError("❌ Aucune valeur à agréger")
    q1, q2, q3 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    return {"mean": float(arr.mean()), "q1": float(q1), "q2": float(q2), "q3": float(q3)}


def image_metrics(pred, gt) -> Dict[str, float]:
    return {"mse": mse_image(pred, gt), "mae_deg": mae_image(pred, gt), "de2000": de2000_image(pred, gt)}


@dataclass
class MetricsReport:
    per_image: pd.DataFrame   # colonnes : image, mse, mae_deg, de2000
    aggregates: pd.DataFrame  # index : métrique, colonnes : mean, q1, q2, q3

    def to_dict(self) -> Dict:
        return {
            "count": int(len(self.per_image)),
            "metrics": {m: {s: float(self.aggregates.loc[m, s]) for s in STATISTICS} for m in METRICS},
        }


def build_report(rows: List[Dict]) -> MetricsReport:
    if not rows:
        raise EmptyDatasetError("❌ Aucune image à évaluer")
    per_image = pd.DataFrame(rows, columns=["image", *METRICS])
    aggregates = pd.DataFrame(
        [aggregate(per_image[m]) for m in METRICS], index=list(METRICS), columns=list(STATISTICS)
    )
    return MetricsReport(per_image, aggregates)


def evaluate(pairs: Iterable[Tuple[str, np.ndarray, np.ndarray]]) -> MetricsReport:
    """Évalue des triplets (nom, prédiction, vérité terrain)."""
    rows = []
    for name, pred, gt in pairs:
        row = {"image": name, **image_metrics(pred, gt)}
        logger.debug("%s : %s", name, row)
        rows.append(row)
    return build_report(rows)

# config.py
import os
from pathlib import Path
from typing import Dict, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

# --- Charger l'environnement ---
load_dotenv()  # pour exécution locale

BASE_DIR = Path(__file__).resolve().parent
OUTPUT_DIR = Path(os.getenv("DENIM_OUTPUT_DIR") or BASE_DIR / "data" / "output")

DEFAULT_THREADS = int(os.getenv("DENIM_THREADS") or os.cpu_count() or 1)
LOG_LEVEL = os.getenv("DENIM_LOG_LEVEL", "WARNING").upper()

# Réglages WB pré-définis (température de couleur en Kelvin)
WB_LETTERS: Tuple[str, ...] = ("t", "f", "d", "c", "s")
WB_TEMPERATURES: Dict[str, int] = {
    "t": 2850,  # Tungsten
    "f": 3800,  # Fluorescent
    "d": 5500,  # Daylight
    "c": 6500,  # Cloudy
    "s": 7500,  # Shade
}
WB_PRESETS: Dict[str, str] = {
    "default": "tds",
    "all": "tfdcs",
}

# Gains von Kries (R, G, B) appliqués à l'image de référence pour simuler chaque rendu.
# Un réglage "chaud" (tungsten) sur une scène neutre donne une dominante bleue, et inversement.
DEFAULT_WB_GAINS: Dict[str, Tuple[float, float, float]] = {
    "t": (0.70, 0.90, 1.60),
    "f": (0.85, 0.95, 1.25),
    "d": (1.00, 1.00, 1.00),
    "c": (1.10, 1.00, 0.88),
    "s": (1.20, 1.02, 0.78),
}


def ensure_output_dir() -> Path:
    OUTPUT_DIR.mkdir(parents=True, exist_ok=True)
    return OUTPUT_DIR


def validate_letters(letters: str) -> str:
    """
    Vérifie une suite de lettres de réglages WB : non vide, sans doublon, dans {t,f,d,c,s}.
    """
    if not letters:
        raise ValueError("au moins un réglage WB est requis")
    unknown = [c for c in letters if c not in WB_LETTERS]
    if unknown:
        raise ValueError(f"réglages WB inconnus : {''.join(unknown)} (attendus : {''.join(WB_LETTERS)})")
    if len(set(letters)) != len(letters):
        raise ValueError(f"réglages WB dupliqués : {letters}")
    return letters


class WbSimConfig(BaseModel):
    """Gains par réglage pour le générateur synthétique (modèle diagonal de von Kries)."""

    gains: Dict[str, Tuple[float, float, float]] = Field(default_factory=lambda: dict(DEFAULT_WB_GAINS))

    @field_validator("gains")
    @classmethod
    def _positive_gains(cls, v):
        for letter, triplet in v.items():
            if any(g <= 0 for g in triplet):
                raise ValueError(f"gains non positifs pour le réglage '{letter}' : {triplet}")
        return v


class TrainConfig(BaseModel):
    """
    Configuration d'entraînement. Les valeurs par défaut reprennent AdamW (β1=0.9, β2=0.999),
    lr=1e-4 sans planification, batch de 16 et un espace basse résolution de 256 px.
    weight_decay et steps ne sont pas fixés par la méthode d'origine.
    """

    lr: float = Field(1e-4, ge=0)
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    weight_decay: float = Field(1e-2, ge=0)
    batch_size: int = Field(16, ge=1)
    steps: int = Field(..., ge=0)
    low_res_side: int = Field(256, ge=8)
    k: int = Field(32, ge=3)
    seed: int = Field(0, ge=0)
    freeze_encoder: bool = False
    encoder_widths: Tuple[int, ...] = (16, 32, 64)
    patch_size: Optional[int] = Field(None, ge=8)
    workers: int = Field(1, ge=1)

    @field_validator("encoder_widths")
    @classmethod
    def _widths(cls, v):
        if not v or any(w < 1 for w in v):
            raise ValueError(f"largeurs d'encodeur invalides : {v}")
        return v


class PipelineConfig(BaseModel):
    params_path: Optional[Path] = None
    k: int = Field(32, ge=3)
    settings: str = "all"
    low_res_side: int = Field(256, ge=8)
    use_precompose: bool = True
    threads: int = Field(DEFAULT_THREADS, ge=1)

    @field_validator("settings")
    @classmethod
    def _settings(cls, v):
        return validate_letters(WB_PRESETS.get(v, v))

    @property
    def n_settings(self) -> int:
        return len(self.settings)

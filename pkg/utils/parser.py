# utils/parser.py
"""Analyse des valeurs passées en ligne de commande."""
import re
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

from config import WB_PRESETS, validate_letters

_RES_RE = re.compile(r"^\s*(\d+)\s*[xX×]\s*(\d+)\s*$")


def parse_settings(value: str) -> str:
    """Nom de préréglage ('default', 'all') ou suite de lettres parmi t, f, d, c, s."""
    value = value.strip().lower()
    return validate_letters(WB_PRESETS.get(value, value))


def parse_resolutions(value: str) -> List[Tuple[int, int]]:
    """'512x512,1024x768' -> [(512, 512), (768, 1024)] en (hauteur, largeur)."""
    out = []
    for item in filter(None, (v.strip() for v in value.split(","))):
        m = _RES_RE.match(item)
        if not m:
            raise ValueError(f"résolution invalide : '{item}' (attendu LARGEURxHAUTEUR)")
        width, height = int(m[1]), int(m[2])
        if width < 1 or height < 1:
            raise ValueError(f"résolution nulle : '{item}'")
        out.append((height, width))
    if not out:
        raise ValueError("aucune résolution fournie")
    return out


def parse_inputs(items: Iterable[str]) -> Dict[str, Path]:
    """Entrées 'lettre=chemin' -> {lettre: chemin}."""
    out: Dict[str, Path] = {}
    for item in items:
        letter, sep, path = item.partition("=")
        letter = letter.strip().lower()
        if not sep or not path:
            raise ValueError(f"entrée invalide : '{item}' (attendu lettre=chemin)")
        if letter in out:
            raise ValueError(f"réglage '{letter}' fourni deux fois")
        validate_letters(letter)
        out[letter] = Path(path)
    return out

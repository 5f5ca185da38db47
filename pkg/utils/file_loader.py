# utils/file_loader.py
"""Lecture / écriture des images (PPM P6 en cœur, pillow pour les autres formats)."""
import logging
import os
import re
import stat
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from PIL import Image

from core.errors import ImageFormatError, PpmHeaderError, PpmMaxvalError, PpmTruncatedError

logger = logging.getLogger(__name__)

PPM_SUFFIXES = {".ppm", ".pnm"}
IMAGE_SUFFIXES = PPM_SUFFIXES | {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"}
_RENDERED_RE = re.compile(r"^(?P<stem>.+)_(?P<letter>[TFDCSG])$")


def _target_mode(path: Path) -> int:
    # mkstemp crée en 0600 : on reprend le mode du fichier remplacé, sinon 0666 moins le umask
    if path.exists():
        return stat.S_IMODE(path.stat().st_mode)
    umask = os.umask(0)
    os.umask(umask)
    return 0o666 & ~umask


@contextmanager
def atomic_write(path: Union[str, Path], mode: str = "wb"):
    """
    Écrit dans un fichier temporaire voisin puis le renomme : aucun fichier partiel
    n'est laissé en cas d'erreur.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.chmod(tmp, _target_mode(path))
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


# =========================================================
#   PPM P6
# =========================================================
def _header_tokens(buf: bytes, count: int) -> Tuple[List[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PpmHeaderError("❌ En-tête PPM incomplet")
        tokens.append(buf[start:pos])
    # un seul caractère blanc sépare l'en-tête des données
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise PpmHeaderError("❌ En-tête PPM non terminé")
    return tokens, pos + 1


def decode_ppm(buf: bytes) -> np.ndarray:
    """Décode un PPM binaire P6 8 bits en image H×W×3 float64 dans [0, 1]."""
    if buf[:2] != b"P6":
        raise PpmHeaderError(f"❌ Signature PPM invalide : {buf[:2]!r} (attendu b'P6')")
    if not buf[2:3].isspace():
        raise PpmHeaderError(f"❌ Blanc attendu après la signature P6, reçu {buf[2:3]!r}")
    tokens, offset = _header_tokens(buf[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise PpmHeaderError(f"❌ En-tête PPM illisible : {tokens}") from e
    if width < 1 or height < 1:
        raise PpmHeaderError(f"❌ Dimensions PPM invalides : {width}×{height}")
    if maxval != 255:
        raise PpmMaxvalError(f"❌ maxval PPM non supporté : {maxval} (seul 255 est accepté)")
    payload = buf[2 + offset:]
    expected = width * height * 3
    if len(payload) < expected:
        raise PpmTruncatedError(f"❌ Données PPM tronquées : {len(payload)} octets sur {expected}")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=expected).reshape(height, width, 3)
    return pixels.astype(np.float64) / 255.0


def quantize(img: np.ndarray) -> np.ndarray:
    """Bornage à [0, 1] puis arrondi au demi supérieur vers 8 bits."""
    scaled = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def encode_ppm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageFormatError(f"❌ Image H×W×3 attendue, reçu la forme {img.shape}")
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + quantize(img).tobytes()


# =========================================================
#   Chargement / sauvegarde
# =========================================================
def load_image(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ Fichier introuvable : {path}")
    if path.suffix.lower() in PPM_SUFFIXES:
        return decode_ppm(path.read_bytes())
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as e:
        raise ImageFormatError(f"❌ Image illisible : {path} ({e})") from e


def save_image(path: Union[str, Path], img: np.ndarray) -> Path:
    path = Path(path)
    if path.suffix.lower() in PPM_SUFFIXES or not path.suffix:
        data = encode_ppm(img)
        with atomic_write(path) as fh:
            fh.write(data)
    else:
        im = Image.fromarray(quantize(img))
        with atomic_write(path) as fh:
            im.save(fh, format=Image.registered_extensions().get(path.suffix.lower(), "PNG"))
    logger.debug("image écrite : %s", path)
    return path


def load_stack(path: Union[str, Path]) -> np.ndarray:
    """Pile brute H×W×3N enregistrée en .npy."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ Fichier introuvable : {path}")
    return np.load(path, allow_pickle=False).astype(np.float64)


def list_images(directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"❌ Dossier introuvable : {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def discover_samples(directory: Union[str, Path]) -> Tuple[List[Path], Dict[str, Dict[str, Path]]]:
    """
    Sépare un dossier de données en :
      - images de référence simples (les rendus seront simulés) ;
      - groupes pré-rendus <stem>_<LETTRE>.<ext> avec la vérité terrain <stem>_G.<ext>.
    """
    plain, groups = [], {}
    for path in list_images(directory):
        m = _RENDERED_RE.match(path.stem)
        if m:
            groups.setdefault(m["stem"], {})[m["letter"].lower()] = path
        else:
            plain.append(path)
    rendered = {}
    for stem, files in sorted(groups.items()):
        if "g" in files:
            rendered[stem] = files
        else:
            plain.extend(files.values())
    return sorted(plain), rendered

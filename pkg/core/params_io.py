# core/params_io.py
"""
Format binaire DNIM des paramètres :

    "DNIM" | version (u8) | k (u32 LE) | N (u32 LE)
    Pc, Qc, Rc, Pa, Qa, Ra en float64 LE, ordre ligne
    [section encodeur facultative]
    nb_étages (u32) | (Cin, Cout) u32 par étage
    pour chaque étage : noyau (3, 3, Cin, Cout) puis biais (Cout)
    tête 1×1 : poids (Clast, k²) puis biais (k²)
"""
import logging
import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from core.dncm import PARAM_NAMES, DncmParams, param_shapes
from core.encoder import KERNEL, ConvStage, EncoderParams
from core.errors import ParamsFormatError
from utils.file_loader import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"DNIM"
VERSION = 1
_HEADER = struct.Struct("<4sBII")
_U32 = struct.Struct("<I")
_DIMS = struct.Struct("<II")
_F8 = np.dtype("<f8")


def params_to_bytes(params: DncmParams, enc: Optional[EncoderParams] = None) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, params.k, params.n_settings)]
    parts += [params.tensors()[name].astype(_F8).tobytes() for name in PARAM_NAMES]
    if enc is not None:
        parts.append(_U32.pack(len(enc.stages)))
        parts += [_DIMS.pack(st.c_in, st.c_out) for st in enc.stages]
        for st in enc.stages:
            parts.append(st.weight.astype(_F8).tobytes())
            parts.append(st.bias.astype(_F8).tobytes())
        parts.append(enc.head_weight.astype(_F8).tobytes())
        parts.append(enc.head_bias.astype(_F8).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def unpack(self, st: struct.Struct):
        if self.remaining() < st.size:
            raise ParamsFormatError("❌ Fichier DNIM tronqué (en-tête)")
        values = st.unpack_from(self.buf, self.pos)
        self.pos += st.size
        return values

    def array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        if self.remaining() < count * _F8.itemsize:
            raise ParamsFormatError(f"❌ Fichier DNIM tronqué (tableau {tuple(shape)})")
        arr = np.frombuffer(self.buf, dtype=_F8, count=count, offset=self.pos)
        self.pos += count * _F8.itemsize
        return arr.reshape(shape).astype(np.float64)


def params_from_bytes(buf: bytes) -> Tuple[DncmParams, Optional[EncoderParams]]:
    reader = _Reader(buf)
    magic, version, k, n = reader.unpack(_HEADER)
    if magic != MAGIC:
        raise ParamsFormatError(f"❌ Signature invalide : {magic!r} (attendu {MAGIC!r})")
    if version != VERSION:
        raise ParamsFormatError(f"❌ Version DNIM non supportée : {version}")
    if k < 3 or n < 1:
        raise ParamsFormatError(f"❌ Dimensions invalides : k={k}, N={n}")
    shapes = param_shapes(k, n)
    tensors = {name: reader.array(shapes[name]) for name in PARAM_NAMES}
    params = DncmParams(k=k, n_settings=n, **tensors)

    enc = None
    if reader.remaining():
        (count,) = reader.unpack(_U32)
        if count < 1:
            raise ParamsFormatError("❌ Section encodeur vide")
        dims = [reader.unpack(_DIMS) for _ in range(count)]
        if dims[0][0] != 3 * n:
            raise ParamsFormatError(f"❌ L'encodeur attend {dims[0][0]} canaux, N={n} impose {3 * n}")
        for i in range(1, count):
            if dims[i][0] != dims[i - 1][1]:
                raise ParamsFormatError(
                    f"❌ Étage {i} : {dims[i][0]} canaux en entrée, l'étage précédent en produit {dims[i - 1][1]}"
                )
        if any(c_out < 1 for _, c_out in dims):
            raise ParamsFormatError(f"❌ Largeur d'étage nulle : {dims}")
        stages = []
        for c_in, c_out in dims:
            weight = reader.array((KERNEL, KERNEL, c_in, c_out))
            stages.append(ConvStage(weight, reader.array((c_out,))))
        head_weight = reader.array((dims[-1][1], k * k))
        enc = EncoderParams(stages, head_weight, reader.array((k * k,)))
    if reader.remaining():
        raise ParamsFormatError(f"❌ {reader.remaining()} octets inattendus en fin de fichier")
    return params, enc


def save_params(path: Union[str, Path], params: DncmParams, enc: Optional[EncoderParams] = None) -> Path:
    path = Path(path)
    with atomic_write(path) as fh:
        fh.write(params_to_bytes(params, enc))
    logger.info("paramètres DNIM écrits : %s (k=%d, N=%d)", path, params.k, params.n_settings)
    return path


def load_params(path: Union[str, Path]) -> Tuple[DncmParams, Optional[EncoderParams]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ Fichier de paramètres introuvable : {path}")
    return params_from_bytes(path.read_bytes())

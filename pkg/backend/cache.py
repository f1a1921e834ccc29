import hashlib
import json
import logging
import os
import struct
import tempfile
from typing import Optional

import numpy as np

from schemas import DickeParams, EigenSystem

logger = logging.getLogger(__name__)

MAGIC = b"OPFD"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIQ")
SUFFIX = ".opfd"


def eigensystem_key(params: DickeParams, coupling: float, sector: str) -> str:
    """sha256 of the canonical model parameters, lambda with 17 significant digits, and the sector."""
    canonical = json.dumps(
        params.model_dump(mode="json", exclude={"coupling", "max_dim"}),
        sort_keys=True,
        separators=(",", ":"),
    )
    payload = f"{canonical}|{format(float(coupling), '.17g')}|{sector}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _path(cache_dir: str, key: str) -> str:
    return os.path.join(cache_dir, key + SUFFIX)


def _discard(tmp_path: Optional[str]) -> None:
    if tmp_path and os.path.exists(tmp_path):
        try:
            os.remove(tmp_path)
        except OSError:
            pass


def cache_eigensystem(cache_dir: str, key: str, eig: EigenSystem) -> bool:
    """Store `eig` under `key`. Complex eigenvectors are not cached; returns whether a file was written."""
    if np.iscomplexobj(eig.vectors):
        logger.debug(f"Skipping cache store for complex eigensystem {key[:12]}")
        return False
    energies = np.ascontiguousarray(eig.energies, dtype="<f8")
    vectors = np.asfortranarray(eig.vectors, dtype="<f8")

    tmp_path = None
    try:
        os.makedirs(cache_dir, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
        with os.fdopen(fd, "wb") as f:
            f.write(HEADER.pack(MAGIC, FORMAT_VERSION, eig.dim))
            f.write(energies.tobytes())
            f.write(vectors.tobytes(order="F"))
        os.replace(tmp_path, _path(cache_dir, key))
    except OSError as e:
        _discard(tmp_path)
        logger.warning(f"Could not cache eigensystem {key[:12]} in {cache_dir}: {e}")
        return False
    except BaseException:
        _discard(tmp_path)
        raise
    logger.info(f"Cached eigensystem {key[:12]} (d={eig.dim})")
    return True


def load_eigensystem(cache_dir: str, key: str) -> Optional[EigenSystem]:
    """The cached eigensystem for `key`, or None on a miss (absent, foreign or truncated file)."""
    path = _path(cache_dir, key)
    if not os.path.exists(path):
        return None

    try:
        with open(path, "rb") as f:
            header = f.read(HEADER.size)
            payload = f.read()
    except OSError as e:
        logger.warning(f"Cache file {path} could not be read ({e}); recomputing")
        return None

    if len(header) < HEADER.size:
        logger.warning(f"Cache file {path} is truncated; recomputing")
        return None
    magic, version, d = HEADER.unpack(header)
    if magic != MAGIC or version != FORMAT_VERSION:
        logger.warning(f"Cache file {path} has an unknown header; recomputing")
        return None

    expected = 8 * (d + d * d)
    if len(payload) != expected:
        logger.warning(f"Cache file {path} holds {len(payload)} bytes, expected {expected}; recomputing")
        return None

    energies = np.frombuffer(payload, dtype="<f8", count=d)
    vectors = np.frombuffer(payload, dtype="<f8", offset=8 * d).reshape((d, d), order="F")
    try:
        return EigenSystem(energies=energies.astype(np.float64), vectors=vectors.astype(np.float64))
    except ValueError as e:
        logger.warning(f"Cache file {path} is inconsistent ({e}); recomputing")
        return None

"""Binary cube/factor containers, run configuration and atomic writes.

Cube file (``.ll1c``), all integers little-endian::

    b"LL1C" | u32 version | u64 I | u64 J | u64 K | I*J*K float64 LE

The payload index is ``k*(I*J) + i + j*I``, i.e. the ``K x IJ`` matrix in
row-major order.

Factor file (``.ll1f``)::

    b"LL1F" | u32 version | u32 kind | u64 rows | u64 cols | u64 I | u64 J
    | rows*cols float64 LE, row-major

``kind`` 1 is an endmember matrix ``K x R`` (I = J = 0), ``kind`` 2 an
abundance matrix ``R x IJ`` with its image size.
"""

import json
import os
import struct
import tempfile
from contextlib import contextmanager

import numpy as np

FORMAT_VERSION = 1
CUBE_MAGIC = b"LL1C"
FACTOR_MAGIC = b"LL1F"
ENDMEMBERS = 1
ABUNDANCES = 2

_CUBE_HEADER = struct.Struct("<4sIQQQ")
_FACTOR_HEADER = struct.Struct("<4sIIQQQQ")
_F64 = np.dtype("<f8")


class FileFormatError(ValueError):
    pass


@contextmanager
def atomic_write(path, mode="wb"):
    """Write to a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"newline": ""})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FileFormatError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def write_cube(path, Y, image_shape):
    """Store the ``K x IJ`` matrix ``Y`` of an ``I x J`` image."""
    I, J = image_shape
    Y = np.asarray(Y, dtype=np.float64)
    K, N = Y.shape
    if N != I * J:
        raise ValueError(f"{N} pixels do not match image {I}x{J}")
    with atomic_write(path) as fh:
        fh.write(_CUBE_HEADER.pack(CUBE_MAGIC, FORMAT_VERSION, I, J, K))
        fh.write(np.ascontiguousarray(Y, dtype=_F64).tobytes())


def read_cube(path):
    """Returns ``(Y, (I, J))`` with ``Y`` the ``K x IJ`` matrix."""
    with open(path, "rb") as fh:
        magic, version, I, J, K = _CUBE_HEADER.unpack(
            _read_exact(fh, _CUBE_HEADER.size, "cube header")
        )
        if magic != CUBE_MAGIC:
            raise FileFormatError(f"{path}: not a cube file")
        if version != FORMAT_VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        n = I * J * K
        data = _read_exact(fh, 8 * n, "cube payload")
        if fh.read(1):
            raise FileFormatError(f"{path}: trailing bytes after payload")
    Y = np.frombuffer(data, dtype=_F64).astype(np.float64).reshape(K, I * J)
    return Y, (int(I), int(J))


def write_factor(path, M, kind, image_shape=None):
    M = np.asarray(M, dtype=np.float64)
    rows, cols = M.shape
    if kind == ENDMEMBERS:
        I = J = 0
    elif kind == ABUNDANCES:
        I, J = image_shape
        if I * J != cols:
            raise ValueError(f"{cols} pixels do not match image {I}x{J}")
    else:
        raise ValueError(f"unknown factor kind {kind}")
    with atomic_write(path) as fh:
        fh.write(_FACTOR_HEADER.pack(FACTOR_MAGIC, FORMAT_VERSION, kind, rows, cols, I, J))
        fh.write(np.ascontiguousarray(M, dtype=_F64).tobytes())


def read_factor(path):
    """Returns ``(M, kind, image_shape)``; ``image_shape`` is None for endmembers."""
    with open(path, "rb") as fh:
        magic, version, kind, rows, cols, I, J = _FACTOR_HEADER.unpack(
            _read_exact(fh, _FACTOR_HEADER.size, "factor header")
        )
        if magic != FACTOR_MAGIC:
            raise FileFormatError(f"{path}: not a factor file")
        if version != FORMAT_VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        if kind == ABUNDANCES and I * J != cols:
            raise FileFormatError(f"{path}: image {I}x{J} inconsistent with {cols} columns")
        if kind not in (ENDMEMBERS, ABUNDANCES):
            raise FileFormatError(f"{path}: unknown factor kind {kind}")
        data = _read_exact(fh, 8 * rows * cols, "factor payload")
        if fh.read(1):
            raise FileFormatError(f"{path}: trailing bytes after payload")
    M = np.frombuffer(data, dtype=_F64).astype(np.float64).reshape(rows, cols)
    return M, kind, (None if kind == ENDMEMBERS else (int(I), int(J)))


CONFIG_DEFAULTS = {
    "mode": "lr",
    "l": None,
    "l_tilde": None,
    "theta": 0.0,
    "q": 0.5,
    "eps": 1e-3,
    "init": "spa",
    "seed": 0,
    "max_iters": 1200,
    "obj_tol": 1e-5,
    "ap_max_iters": 50,
    "ap_tol": 1e-3,
    "extrapolation": True,
    "r": None,
}


def load_config(path_or_mapping):
    """Read a JSON run configuration and fill in defaults.

    Unknown keys raise ``ValueError``.
    """
    if isinstance(path_or_mapping, dict):
        raw = dict(path_or_mapping)
    else:
        with open(path_or_mapping) as fh:
            raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("configuration must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_DEFAULTS))
    if unknown:
        raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
    cfg = {**CONFIG_DEFAULTS, **raw}
    if cfg["mode"] not in ("lr", "nn"):
        raise ValueError("mode must be 'lr' or 'nn'")
    if cfg["init"] not in ("spa", "random"):
        raise ValueError("init must be 'spa' or 'random'")
    if not isinstance(cfg["extrapolation"], bool):
        raise ValueError("extrapolation must be true or false")
    return cfg


def write_json(path, obj):
    with atomic_write(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trace(path, trace):
    with atomic_write(path, "w") as fh:
        trace.write_csv(fh)

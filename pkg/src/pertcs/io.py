"""CSV matrix/vector files with a JSON sidecar manifest, written atomically."""

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest_path(path):
    return Path(path).with_suffix(".json")


def format_matrix(M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in M)


def write_matrix(path, M, *, ensemble=None, seed=None, scale=None):
    """Write ``M`` as CSV (one row per line) plus ``<stem>.json`` manifest."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    atomic_write_text(path, format_matrix(M))
    manifest = {
        "m": int(M.shape[0]),
        "n": int(M.shape[1]),
        "ensemble": ensemble,
        "seed": seed,
        "scale": scale,
    }
    atomic_write_text(manifest_path(path), json.dumps(manifest, indent=2) + "\n")


def write_vector(path, v):
    """A vector is an n x 1 matrix: one value per line."""
    write_matrix(path, np.asarray(v, dtype=np.float64).reshape(-1, 1))


def read_matrix(path):
    M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    mpath = manifest_path(path)
    if mpath.exists():
        manifest = json.loads(mpath.read_text())
        if (manifest.get("m"), manifest.get("n")) != M.shape:
            raise ValueError(
                f"{path}: shape {M.shape} disagrees with manifest "
                f"({manifest.get('m')}, {manifest.get('n')})"
            )
    return M


def read_vector(path):
    M = read_matrix(path)
    if M.shape[1] != 1 and M.shape[0] != 1:
        raise ValueError(f"{path}: expected a vector, got shape {M.shape}")
    return M.ravel()


def read_manifest(path):
    mpath = manifest_path(path)
    return json.loads(mpath.read_text()) if mpath.exists() else None

"""Pure numpy fallback for the compiled Gram-submatrix enumeration."""

from itertools import combinations, islice

import numpy as np

_CHUNK = 50_000


def gram_extremes(G, K, zero_tol, limit=-1):
    """Same contract as the compiled ``gram_extremes``."""
    G = np.ascontiguousarray(G, dtype=np.float64)
    n = G.shape[0]
    if G.ndim != 2 or G.shape[1] != n:
        raise ValueError("Gram matrix must be square")
    if K < 1 or K > n:
        raise ValueError(f"K={K} outside [1, {n}]")

    lam_max, lam_min, lam_nz = -np.inf, np.inf, np.inf
    arg_max = arg_min = tuple(range(K))
    arg_nz = None
    count = 0
    it = combinations(range(n), K)
    if limit >= 0:
        it = islice(it, limit)
    while True:
        chunk = np.fromiter(islice(it, _CHUNK), dtype=np.dtype((np.intp, K)))
        if chunk.shape[0] == 0:
            break
        if K == 1:
            w = G[chunk[:, 0], chunk[:, 0]][:, None]
        else:
            w = np.linalg.eigvalsh(G[chunk[:, :, None], chunk[:, None, :]])
        hi = w[:, -1]
        lo = w[:, 0]
        nz = np.where(w > zero_tol, w, np.inf).min(axis=1)

        i = int(np.argmax(hi))
        if hi[i] > lam_max:
            lam_max, arg_max = float(hi[i]), tuple(int(v) for v in chunk[i])
        i = int(np.argmin(lo))
        if lo[i] < lam_min:
            lam_min, arg_min = float(lo[i]), tuple(int(v) for v in chunk[i])
        i = int(np.argmin(nz))
        if nz[i] < lam_nz:
            lam_nz, arg_nz = float(nz[i]), tuple(int(v) for v in chunk[i])
        count += chunk.shape[0]
    return lam_max, arg_max, lam_min, arg_min, lam_nz, arg_nz, count

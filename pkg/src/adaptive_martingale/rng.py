"""Counter-based normal variates with one independent substream per path.

Every draw is a pure function of ``(seed, stream, path, counter)``: the path
key is derived from the master seed and the path index with the SplitMix64
finalizer, and the draw at ``counter`` is the finalizer applied to
``path_key + (counter + 1) * GAMMA`` (SplitMix64 run from that key).
Uniforms take the top 53 bits, shifted off the endpoints, and normals come
from the inverse normal CDF. Nothing depends on how paths are split across
workers, so chunked or threaded generation is bit-identical to a single
sequential call.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import ndtri

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53

# Fixed so chunk boundaries never depend on the worker count.
CHUNK_PATHS = 8192

# Stream tags keep unrelated consumers of one master seed apart.
STREAM_BROWNIAN = 0
STREAM_NESTED = 1


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 output finalizer on a uint64 array (wraps mod 2**64)."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> _S30
    z *= _M1
    z ^= z >> _S27
    z *= _M2
    z ^= z >> _S31
    return z


def path_keys(seed: int, stream: int, paths: np.ndarray) -> np.ndarray:
    base = mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    base = mix64(base ^ mix64(np.array([stream + 1], dtype=np.uint64) * GAMMA))
    p = np.asarray(paths, dtype=np.uint64)
    return mix64(base + (p + np.uint64(1)) * GAMMA)


def uniforms(seed: int, stream: int, paths: np.ndarray, n: int, offset: int = 0) -> np.ndarray:
    """Open-interval uniforms, shape ``(len(paths), n)``."""
    keys = path_keys(seed, stream, paths)
    ctr = (np.arange(offset, offset + n, dtype=np.uint64) + np.uint64(1)) * GAMMA
    bits = mix64(keys[:, None] + ctr[None, :])
    return ((bits >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def normals(
    seed: int,
    stream: int,
    paths: np.ndarray,
    n: int,
    offset: int = 0,
    threads: int = 1,
) -> np.ndarray:
    """Standard normals, shape ``(len(paths), n)``, via inverse CDF.

    ``threads > 1`` fills fixed-size path chunks concurrently; the result is
    identical to ``threads == 1``.
    """
    paths = np.asarray(paths, dtype=np.int64)
    out = np.empty((paths.size, n), dtype=np.float64)
    if paths.size == 0 or n == 0:
        return out

    def fill(start: int) -> None:
        stop = min(start + CHUNK_PATHS, paths.size)
        out[start:stop] = ndtri(uniforms(seed, stream, paths[start:stop], n, offset))

    starts = range(0, paths.size, CHUNK_PATHS)
    if threads <= 1:
        for s in starts:
            fill(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    return out

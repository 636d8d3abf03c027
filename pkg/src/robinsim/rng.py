"""Counter-based Gaussian noise for path simulation.

Every normal increment is a pure function of (seed, path_index, step_index,
lane), evaluated with a splitmix64-style avalanche mix and Box-Muller.  No
generator state exists, so an ensemble can be chunked across any number of
workers, or replayed path-by-path, and produce bit-identical streams.
"""
from __future__ import annotations

import numpy as np

__all__ = ["path_keys", "step_normals", "step_uniforms"]

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = float(2.0**-53)


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps mod 2^64 by design
    with np.errstate(over="ignore"):
        x = (x ^ (x >> _S30)) * _M1
        x = (x ^ (x >> _S27)) * _M2
        return x ^ (x >> _S31)


def path_keys(seed: int, path_index: np.ndarray) -> np.ndarray:
    """Per-path 64-bit keys derived from the run seed."""
    p = np.asarray(path_index, dtype=np.uint64)
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    return _mix(_mix(s + _GOLDEN) ^ ((p + np.uint64(1)) * _GOLDEN))


def _uniform01(words: np.ndarray) -> np.ndarray:
    # map to (0,1): 53-bit mantissa, offset by half an ulp away from zero
    return ((words >> _S11).astype(np.float64) + 0.5) * _INV53


_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN_INT = 0x9E3779B97F4A7C15


def step_uniforms(keys: np.ndarray, step: int, lanes: int) -> np.ndarray:
    """Uniform(0,1) array of shape (len(keys), lanes) for one step."""
    base = step * (2 * lanes + 1)
    cols = []
    for lane in range(lanes):
        ctr = np.uint64(((base + lane + 1) * _GOLDEN_INT) & _MASK64)
        cols.append(_uniform01(_mix(keys ^ ctr)))
    return np.stack(cols, axis=-1)


def step_normals(keys: np.ndarray, step: int, dim: int) -> np.ndarray:
    """Standard normals of shape (len(keys), dim) via Box-Muller."""
    pairs = (dim + 1) // 2
    u = step_uniforms(keys, step, 2 * pairs)
    out = np.empty((keys.shape[0], 2 * pairs), dtype=np.float64)
    for i in range(pairs):
        r = np.sqrt(-2.0 * np.log(u[:, 2 * i]))
        theta = (2.0 * np.pi) * u[:, 2 * i + 1]
        out[:, 2 * i] = r * np.cos(theta)
        out[:, 2 * i + 1] = r * np.sin(theta)
    return out[:, :dim]

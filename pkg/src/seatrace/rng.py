"""Deterministic random streams.

Every noise source draws from a counter-based Philox generator keyed by a
64-bit stream seed plus a sample/frame index, so adding or reordering
sensors never perturbs another sensor's draws, and re-running with the same
seed reproduces every byte.
"""

from __future__ import annotations

import hashlib

import numpy as np


def sensor_stream_seed(global_seed: int, sensor_name: str) -> int:
    """Stable 64-bit per-sensor seed derived by hashing (seed, name)."""
    digest = hashlib.sha256(f"{global_seed}:{sensor_name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def keyed_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, index).

    The same (seed, index) pair always yields the same draw sequence,
    independent of any other stream.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(index & 0xFFFFFFFFFFFFFFFF)])
    return np.random.Generator(np.random.Philox(key=key))


def rayleigh_from_uniform(u, sigma: float) -> np.ndarray:
    """Inverse-CDF Rayleigh sample: sigma * sqrt(-2 ln(1 - u)), u in [0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    return sigma * np.sqrt(-2.0 * np.log1p(-u))

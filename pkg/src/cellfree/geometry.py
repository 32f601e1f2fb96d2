"""Random network drops on a square that wraps around at its edges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig

# the 3x3 grid of translations: the square itself plus its eight neighbours
_SHIFTS = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


@dataclass(frozen=True)
class Layout:
    """AP and user coordinates (km) inside ``[0, D)^2``."""

    ap_xy: np.ndarray
    user_xy: np.ndarray
    D: float

    def __post_init__(self):
        self.ap_xy.setflags(write=False)
        self.user_xy.setflags(write=False)

    @property
    def M(self) -> int:
        return self.ap_xy.shape[0]

    @property
    def K(self) -> int:
        return self.user_xy.shape[0]


def build_layout(config: SimConfig, seed) -> Layout:
    """Draw ``M`` APs and ``K`` users i.i.d. uniformly on the square.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts; the
    same seed always reproduces the same layout.
    """
    rng = np.random.default_rng(seed)
    ap_xy = rng.uniform(0.0, config.D, size=(config.M, 2))
    user_xy = rng.uniform(0.0, config.D, size=(config.K, 2))
    return Layout(ap_xy=ap_xy, user_xy=user_xy, D=float(config.D))


def wrap_distance(p, q, D: float) -> float:
    """Torus distance between two points of the ``D x D`` square.

    Minimum Euclidean distance from ``p`` to the nine translated images of
    ``q``. Symmetric, never larger than the plain distance, and bounded by
    ``D / sqrt(2)``.
    """
    diff = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    images = diff[None, :] + D * _SHIFTS
    return float(np.sqrt(np.min(np.sum(images**2, axis=1))))


def pairwise_wrap_distance(a: np.ndarray, b: np.ndarray, D: float) -> np.ndarray:
    """Matrix of torus distances, ``out[i, j] = wrap_distance(a[i], b[j], D)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = b[None, :, None, :] - a[:, None, None, :] + D * _SHIFTS[None, None, :, :]
    return np.sqrt(np.min(np.sum(diff**2, axis=-1), axis=-1))

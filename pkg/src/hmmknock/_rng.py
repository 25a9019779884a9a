"""Deterministic stream derivation and inverse-CDF categorical draws.

Every sampler in the package draws scalar uniforms from a
``numpy.random.Generator`` and maps them through the inverse CDF of the
target categorical distribution. Batched samplers pre-draw each row's
uniforms from that row's own stream, in the same order the per-row code
would, so batched and per-row results agree draw for draw.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError

SeedKey = int | tuple[int, ...]


def _as_entropy(key: SeedKey) -> list[int]:
    parts = (key,) if isinstance(key, int) else tuple(key)
    if not parts or any((not isinstance(s, (int, np.integer))) or s < 0 for s in parts):
        raise DimensionError(f"seed key must be non-negative integers, got {key!r}")
    return [int(s) for s in parts]


def substream(key: SeedKey, *index: int) -> np.random.Generator:
    """Generator for the stream identified by ``key`` extended by ``index``.

    Distinct (key, index) paths give independent streams; the same path
    always reproduces the same stream.
    """
    return np.random.default_rng(np.random.SeedSequence(_as_entropy(key) + list(index)))


def derive_seed(key: SeedKey, *index: int) -> int:
    """A single 32-bit seed deterministically derived from the key path."""
    ss = np.random.SeedSequence(_as_entropy(key) + list(index))
    return int(ss.generate_state(1)[0])


def draw_categorical(pvec: np.ndarray, u: float) -> int:
    """Index drawn from the (possibly unnormalized) weights ``pvec`` at uniform ``u``."""
    c = np.cumsum(pvec)
    idx = int(np.searchsorted(c, u * c[-1], side="right"))
    return min(idx, len(pvec) - 1)


def draw_categorical_rows(pmat: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF draws; row i uses uniform u[i].

    Matches :func:`draw_categorical` applied to each row exactly, including
    the handling of unnormalized weights.
    """
    c = np.cumsum(pmat, axis=1)
    t = u * c[:, -1]
    idx = (c <= t[:, None]).sum(axis=1)
    return np.minimum(idx, pmat.shape[1] - 1)


def row_uniforms(key: SeedKey, n_rows: int, n_draws: int) -> np.ndarray:
    """(n_rows, n_draws) uniforms; row i comes from ``substream(key, i)``.

    Column t of row i equals the t-th value ``substream(key, i).random()``
    would return, so consuming columns left to right replays each row's
    stream in order.
    """
    out = np.empty((n_rows, n_draws))
    for i in range(n_rows):
        out[i] = substream(key, i).random(n_draws)
    return out

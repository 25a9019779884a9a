"""Hidden Markov models and exact knockoff copies of their observed sequences.

A model couples a latent :class:`~hmmknock.markov.DiscreteMarkovChain` over
K states with per-position emission tables over M symbols. Knockoff copies
of an observed sequence x are produced in three moves:

1. draw one latent trajectory z from the posterior P(z | x) with a scaled
   forward pass followed by backward sampling,
2. build a Markov-chain knockoff z~ of z,
3. emit x~_j from the emission row of z~_j, independently across positions.

The triple costs O(p (K^2 v M)) per sequence. The coupled quadruple
(x, z, x~, z~) is exchangeable pair by pair: swapping any subset of
coordinate pairs, both observed and latent, leaves its joint law unchanged,
which ``exact_hmm_joint`` verifies by enumeration on small instances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import (
    SeedKey,
    draw_categorical,
    draw_categorical_rows,
    row_uniforms,
)
from .errors import DimensionError, ImpossibleEvidenceError, SizeError
from .markov import (
    ENUMERATION_GUARD,
    DiscreteMarkovChain,
    _check_distribution,
    _check_rows,
    _check_sequence,
    _knockoff_rows_given_uniforms,
    exact_joint_pmf,
    sample_mc,
    sample_mc_knockoff,
)


@dataclass(frozen=True)
class HiddenMarkovModel:
    """Latent chain plus per-position emission tables.

    ``f`` has shape (p, K, M); ``f[j][k, m]`` is the probability that
    position j emits symbol m from latent state k.
    """

    latent: DiscreteMarkovChain
    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.ndim != 3:
            raise DimensionError(f"f must have shape (p, K, M), got {f.shape}")
        if f.shape[0] != self.latent.p or f.shape[1] != self.latent.K:
            raise DimensionError(
                f"f shape {f.shape} does not match latent chain "
                f"(p={self.latent.p}, K={self.latent.K})"
            )
        _check_distribution(f, "emission table")
        object.__setattr__(self, "f", f)

    @property
    def K(self) -> int:
        return self.latent.K

    @property
    def p(self) -> int:
        return self.latent.p

    @property
    def M(self) -> int:
        return self.f.shape[2]


@dataclass(frozen=True)
class ForwardState:
    """Scaled forward quantities for one observed sequence.

    ``alphas[j]`` is the filtering distribution rescaled to sum to 1 at
    every position; ``log_scale[j]`` is the log of the rescaling constant,
    so ``log_scale.sum()`` is the log-likelihood of the sequence.
    """

    alphas: np.ndarray
    log_scale: np.ndarray

    @property
    def log_likelihood(self) -> float:
        return float(self.log_scale.sum())


@dataclass(frozen=True)
class HmmKnockoffResult:
    """Knockoff copy plus the latent trajectories that produced it."""

    xt: np.ndarray
    z: np.ndarray
    zt: np.ndarray


def forward_pass(hmm: HiddenMarkovModel, x) -> ForwardState:
    """Scaled forward recursion for the observed sequence ``x``."""
    x = _check_sequence(x, hmm.M, hmm.p)
    K, p = hmm.K, hmm.p
    alphas = np.empty((p, K))
    log_scale = np.empty(p)
    a = hmm.latent.q1 * hmm.f[0][:, x[0]]
    for j in range(p):
        if j:
            a = (alphas[j - 1] @ hmm.latent.Q[j - 1]) * hmm.f[j][:, x[j]]
        c = a.sum()
        if c <= 0.0:
            raise ImpossibleEvidenceError(f"observed sequence impossible at position {j}")
        alphas[j] = a / c
        log_scale[j] = np.log(c)
    return ForwardState(alphas, log_scale)


def _forward_rows(hmm: HiddenMarkovModel, X: np.ndarray):
    """Batched forward pass. Returns (alphas (n,p,K), log_scale (n,p))."""
    n = X.shape[0]
    K, p = hmm.K, hmm.p
    alphas = np.empty((n, p, K))
    log_scale = np.empty((n, p))
    a = hmm.latent.q1[None, :] * hmm.f[0][:, X[:, 0]].T
    for j in range(p):
        if j:
            a = (alphas[:, j - 1] @ hmm.latent.Q[j - 1]) * hmm.f[j][:, X[:, j]].T
        c = a.sum(axis=1)
        if np.any(c <= 0.0):
            bad = int(np.flatnonzero(c <= 0.0)[0])
            raise ImpossibleEvidenceError(
                f"row {bad} impossible under the model at position {j}"
            )
        alphas[:, j] = a / c[:, None]
        log_scale[:, j] = np.log(c)
    return alphas, log_scale


def backward_sample(
    hmm: HiddenMarkovModel, state: ForwardState, rng: np.random.Generator
) -> np.ndarray:
    """One latent trajectory from the posterior, one uniform per position.

    Draws z_p from the final filtering distribution, then walks backwards:
    z_j is drawn from alpha_j reweighted by the transition probability into
    the already-drawn z_{j+1}.
    """
    p, K = hmm.p, hmm.K
    z = np.empty(p, dtype=np.int64)
    z[p - 1] = draw_categorical(state.alphas[p - 1], rng.random())
    for j in range(p - 2, -1, -1):
        w = state.alphas[j] * hmm.latent.Q[j][:, z[j + 1]]
        z[j] = draw_categorical(w, rng.random())
    return z


def emit(hmm: HiddenMarkovModel, z, rng: np.random.Generator) -> np.ndarray:
    """Observed symbols drawn independently from each position's emission row."""
    z = _check_sequence(z, hmm.K, hmm.p)
    x = np.empty(hmm.p, dtype=np.int64)
    for j in range(hmm.p):
        x[j] = draw_categorical(hmm.f[j][z[j]], rng.random())
    return x


def sample_hmm(hmm: HiddenMarkovModel, rng: np.random.Generator):
    """One (x, z) draw from the model; latent first, then emissions."""
    z = sample_mc(hmm.latent, rng)
    return emit(hmm, z, rng), z


def sample_hmm_knockoff(
    hmm: HiddenMarkovModel, x, rng: np.random.Generator
) -> HmmKnockoffResult:
    """Knockoff copy of ``x`` with the latent trajectories used to build it."""
    state = forward_pass(hmm, x)
    z = backward_sample(hmm, state, rng)
    zt = sample_mc_knockoff(hmm.latent, z, rng)
    xt = emit(hmm, zt, rng)
    return HmmKnockoffResult(xt, z, zt)


def sample_hmm_rows(hmm: HiddenMarkovModel, n_rows: int, key: SeedKey):
    """n_rows independent (x, z) draws; row i replays ``sample_hmm`` on stream (key, i)."""
    p, K, M = hmm.p, hmm.K, hmm.M
    U = row_uniforms(key, n_rows, 2 * p)
    Z = np.empty((n_rows, p), dtype=np.int64)
    Z[:, 0] = draw_categorical_rows(np.broadcast_to(hmm.latent.q1, (n_rows, K)), U[:, 0])
    for j in range(1, p):
        Z[:, j] = draw_categorical_rows(hmm.latent.Q[j - 1][Z[:, j - 1]], U[:, j])
    X = np.empty((n_rows, p), dtype=np.int64)
    for j in range(p):
        X[:, j] = draw_categorical_rows(hmm.f[j][Z[:, j]], U[:, p + j])
    return X, Z


def sample_hmm_knockoff_rows(hmm: HiddenMarkovModel, X, key: SeedKey):
    """Knockoff copies of every row of ``X``; returns (Xt, Z, Zt).

    Row i consumes the stream (key, i) exactly as
    ``sample_hmm_knockoff(hmm, X[i], substream(key, i))`` would: p uniforms
    for backward sampling, p for the latent knockoff, p for the emissions.
    """
    X = _check_rows(X, hmm.M, hmm.p)
    U = row_uniforms(key, X.shape[0], 3 * hmm.p)
    return _hmm_knockoff_rows_given_uniforms(hmm, X, U)


def _hmm_knockoff_rows_given_uniforms(hmm: HiddenMarkovModel, X, U):
    """Batch knockoff core driven by a (n, 3p) table of uniforms.

    Split out so callers can pre-draw the uniforms for a full dataset and
    feed row chunks to worker threads: results depend only on (row, U-row),
    never on chunk boundaries.
    """
    p, K = hmm.p, hmm.K
    n = X.shape[0]

    alphas, _ = _forward_rows(hmm, X)
    Z = np.empty((n, p), dtype=np.int64)
    Z[:, p - 1] = draw_categorical_rows(alphas[:, p - 1], U[:, 0])
    for t, j in enumerate(range(p - 2, -1, -1), start=1):
        W = alphas[:, j] * hmm.latent.Q[j][:, Z[:, j + 1]].T
        Z[:, j] = draw_categorical_rows(W, U[:, t])

    # Latent knockoffs consume columns p..2p-1 of each row's stream.
    Zt = _knockoff_rows_given_uniforms(hmm.latent, Z, U[:, p : 2 * p])

    Xt = np.empty((n, p), dtype=np.int64)
    for j in range(p):
        Xt[:, j] = draw_categorical_rows(hmm.f[j][Zt[:, j]], U[:, 2 * p + j])
    return Xt, Z, Zt


def exact_hmm_joint(hmm: HiddenMarkovModel) -> np.ndarray:
    """Joint law of (x, z, x~, z~) as a 4p-dimensional table.

    Axis blocks, in order: x (p axes of size M), z (p axes of size K),
    x~ (p axes of size M), z~ (p axes of size K). The observed/latent
    quadruple factorizes as

        P(x, z, x~, z~) = P(z) P_knock(z~ | z) prod_j f_j(x_j | z_j)
                          * prod_j f_j(x~_j | z~_j),

    because the posterior draw satisfies P(x) P(z | x) = P(x, z) and the
    knockoff emissions depend on z~ only. Guarded to (K M)**(2p) <= 1e6
    entries.
    """
    K, M, p = hmm.K, hmm.M, hmm.p
    if (K * M) ** (2 * p) > ENUMERATION_GUARD:
        raise SizeError(f"(K*M)**(2p) = {(K * M) ** (2 * p)} exceeds {ENUMERATION_GUARD}")
    latent_joint = exact_joint_pmf(hmm.latent)

    shape = (M,) * p + (K,) * p + (M,) * p + (K,) * p
    table = np.ones(shape)

    def axis_shape(axis, size):
        s = [1] * (4 * p)
        s[axis] = size
        return s

    # P(z, z~) broadcast over the two latent axis blocks.
    lj_shape = [1] * (4 * p)
    for t in range(p):
        lj_shape[p + t] = K
        lj_shape[3 * p + t] = K
    table *= latent_joint.reshape(lj_shape)

    for j in range(p):
        emis = hmm.f[j].T  # (M, K): emis[m, k] = f_j(m | k)
        s = [1] * (4 * p)
        s[j], s[p + j] = M, K
        table *= emis.reshape(s)
        s = [1] * (4 * p)
        s[2 * p + j], s[3 * p + j] = M, K
        table *= emis.reshape(s)
    return table


def swapped_hmm_joint(table: np.ndarray, swap_set) -> np.ndarray:
    """The quadruple law with pairs in ``swap_set`` exchanged.

    Swapping pair j exchanges the observed axes (j, 2p+j) and the latent
    axes (p+j, 3p+j) simultaneously.
    """
    if table.ndim % 4:
        raise DimensionError("quadruple table must have 4p axes")
    p = table.ndim // 4
    axes = list(range(4 * p))
    for j in swap_set:
        if not 0 <= j < p:
            raise DimensionError(f"swap index {j} outside [0, {p})")
        axes[j], axes[2 * p + j] = axes[2 * p + j], axes[j]
        axes[p + j], axes[3 * p + j] = axes[3 * p + j], axes[p + j]
    return np.transpose(table, axes)

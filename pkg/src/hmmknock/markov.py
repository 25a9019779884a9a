"""Discrete Markov chains and exact knockoff copies of their trajectories.

A chain of length p over states {0, ..., K-1} is given by an initial
distribution ``q1`` and p-1 row-stochastic transition matrices ``Q`` (the
chain may be inhomogeneous). ``Q[i][l, k]`` is the probability of moving to
state k at position i+1 (0-based) given state l at position i.

A knockoff copy x~ of an observed trajectory x is sampled one position at a
time. The conditional law of x~_j given (x, x~_1..j-1) has a closed form:
an unnormalized weight per state, divided by a running normalization table
that is updated alongside the sampling. One full copy costs O(p K^2) time
and O(K) memory beyond the inputs, and the construction makes (x, x~)
exchangeable coordinate-pair by coordinate-pair: swapping any subset of
pairs (x_j, x~_j) leaves the joint law unchanged.

``exact_joint_pmf`` enumerates that joint law for small instances and backs
the exchangeability audits in the test-suite and the ``audit`` subcommand.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._rng import (
    SeedKey,
    draw_categorical,
    draw_categorical_rows,
    row_uniforms,
    substream,
)
from .errors import DimensionError, ImpossibleEvidenceError, SizeError

# Tolerance for "rows sum to one" checks on user-supplied distributions.
ROW_SUM_ATOL = 1e-9

# Largest table (number of entries) exact enumeration is allowed to build.
ENUMERATION_GUARD = 1_000_000


def _check_distribution(v: np.ndarray, what: str) -> None:
    if np.any(v < 0):
        raise ValueError(f"{what} has negative entries")
    s = v.sum(axis=-1)
    if np.any(np.abs(s - 1.0) > ROW_SUM_ATOL):
        raise ValueError(f"{what} rows must sum to 1 within {ROW_SUM_ATOL}")


@dataclass(frozen=True)
class DiscreteMarkovChain:
    """Inhomogeneous finite-state Markov chain.

    Parameters
    ----------
    q1
        Initial state distribution, shape (K,).
    Q
        Transition matrices, shape (p-1, K, K); ``Q[i][l, k]`` is the
        probability that position i+1 is k given position i is l (0-based
        positions). Pass an empty array for a length-1 chain.
    """

    q1: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        q1 = np.asarray(self.q1, dtype=float)
        if q1.ndim != 1 or q1.size < 1:
            raise DimensionError("q1 must be a non-empty vector")
        K = q1.size
        Q = np.asarray(self.Q, dtype=float)
        if Q.size == 0:
            Q = Q.reshape(0, K, K)
        if Q.ndim != 3 or Q.shape[1:] != (K, K):
            raise DimensionError(f"Q must have shape (p-1, {K}, {K}), got {Q.shape}")
        _check_distribution(q1, "q1")
        if Q.shape[0]:
            _check_distribution(Q, "Q")
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "Q", Q)

    @property
    def K(self) -> int:
        return self.q1.size

    @property
    def p(self) -> int:
        return self.Q.shape[0] + 1

    @classmethod
    def homogeneous(cls, q1, Q, p: int) -> "DiscreteMarkovChain":
        """Chain of length p that applies the same transition matrix throughout."""
        if p < 1:
            raise DimensionError("p must be >= 1")
        Q = np.asarray(Q, dtype=float)
        return cls(np.asarray(q1, dtype=float), np.tile(Q, (p - 1, 1, 1)))


def _check_sequence(x, K: int, p: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (p,):
        raise DimensionError(f"sequence must have length {p}, got shape {x.shape}")
    if not np.issubdtype(x.dtype, np.integer):
        raise DimensionError("sequence entries must be integers")
    if x.size and (x.min() < 0 or x.max() >= K):
        raise DimensionError(f"sequence entries must lie in [0, {K})")
    return x.astype(np.int64)


def _check_rows(X, K: int, p: int) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != p:
        raise DimensionError(f"row matrix must have shape (n, {p}), got {X.shape}")
    if not np.issubdtype(X.dtype, np.integer):
        raise DimensionError("row matrix entries must be integers")
    if X.size and (X.min() < 0 or X.max() >= K):
        raise DimensionError(f"row matrix entries must lie in [0, {K})")
    return X.astype(np.int64)


def mc_log_pmf(chain: DiscreteMarkovChain, x) -> float:
    """Log probability of the trajectory ``x``; -inf if it is impossible."""
    x = _check_sequence(x, chain.K, chain.p)
    factors = np.empty(chain.p)
    factors[0] = chain.q1[x[0]]
    if chain.p > 1:
        factors[1:] = chain.Q[np.arange(chain.p - 1), x[:-1], x[1:]]
    if np.any(factors == 0.0):
        return -np.inf
    return float(np.log(factors).sum())


def sample_mc(chain: DiscreteMarkovChain, rng: np.random.Generator) -> np.ndarray:
    """One trajectory, drawn with one uniform per position."""
    x = np.empty(chain.p, dtype=np.int64)
    x[0] = draw_categorical(chain.q1, rng.random())
    for i in range(1, chain.p):
        x[i] = draw_categorical(chain.Q[i - 1, x[i - 1]], rng.random())
    return x


def sample_mc_rows(chain: DiscreteMarkovChain, n_rows: int, key: SeedKey) -> np.ndarray:
    """n_rows independent trajectories; row i replays ``sample_mc`` on stream (key, i)."""
    U = row_uniforms(key, n_rows, chain.p)
    X = np.empty((n_rows, chain.p), dtype=np.int64)
    X[:, 0] = draw_categorical_rows(np.broadcast_to(chain.q1, (n_rows, chain.K)), U[:, 0])
    for i in range(1, chain.p):
        X[:, i] = draw_categorical_rows(chain.Q[i - 1][X[:, i - 1]], U[:, i])
    return X


def _step_ratio(chain, j1, x, xt_prev, norm_prev):
    """Weight vector r(l) = Q_j(l | x_{j-1}) Q_j(l | x~_{j-1}) / N_{j-1}(l).

    ``j1`` is the 1-based position, 2 <= j1 <= p. Ratios 0/0 are defined as
    0 (states carrying no probability mass); a positive numerator over a
    zero table entry means the conditioning event was impossible.
    """
    Qj = chain.Q[j1 - 2]
    num = Qj[x[j1 - 2]] * Qj[xt_prev]
    pos = num > 0.0
    if np.any(pos & (norm_prev <= 0.0)):
        raise ImpossibleEvidenceError(
            f"zero normalization at position {j1} for a state with positive weight"
        )
    return np.divide(num, norm_prev, out=np.zeros_like(num), where=pos)


def knockoff_step(
    chain: DiscreteMarkovChain,
    j: int,
    x,
    xt_prev: int | None = None,
    norm_prev: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional law of the j-th knockoff coordinate, plus the next table.

    Parameters
    ----------
    j
        1-based position, 1 <= j <= p.
    x
        The full observed trajectory.
    xt_prev, norm_prev
        Knockoff state sampled at position j-1 and the normalization table
        returned by the previous step. Both must be omitted when j == 1.

    Returns
    -------
    (vector, table)
        ``vector`` is the conditional distribution of x~_j (sums to 1).
        ``table`` holds the normalization values N_j(k) consumed by step
        j+1; at j == p it is a constant vector holding the final scalar.
    """
    K, p = chain.K, chain.p
    x = _check_sequence(x, K, p)
    if not 1 <= j <= p:
        raise DimensionError(f"step index must satisfy 1 <= j <= {p}, got {j}")
    if (j == 1) != (xt_prev is None) or (j == 1) != (norm_prev is None):
        raise DimensionError("xt_prev and norm_prev are required exactly when j > 1")

    if j == 1:
        if p == 1:
            vec, table = chain.q1.copy(), np.ones(K)
        else:
            table = chain.q1 @ chain.Q[0]
            norm = table[x[1]]
            if norm <= 0.0:
                raise ImpossibleEvidenceError("observed sequence impossible under chain")
            vec = chain.q1 * chain.Q[0][:, x[1]] / norm
    else:
        r = _step_ratio(chain, j, x, int(xt_prev), np.asarray(norm_prev, dtype=float))
        if j < p:
            Qn = chain.Q[j - 1]
            table = r @ Qn
            norm = table[x[j]]
            if norm <= 0.0:
                raise ImpossibleEvidenceError("observed sequence impossible under chain")
            vec = r * Qn[:, x[j]] / norm
        else:
            total = r.sum()
            if total <= 0.0:
                raise ImpossibleEvidenceError("observed sequence impossible under chain")
            table = np.full(K, total)
            vec = r / total
    return vec / vec.sum(), table


def sample_mc_knockoff(
    chain: DiscreteMarkovChain, x, rng: np.random.Generator
) -> np.ndarray:
    """Knockoff copy of ``x``, one uniform per position."""
    xt = np.empty(chain.p, dtype=np.int64)
    xt_prev, table = None, None
    for j in range(1, chain.p + 1):
        vec, table = knockoff_step(chain, j, x, xt_prev, table)
        xt[j - 1] = xt_prev = draw_categorical(vec, rng.random())
    return xt


def sample_mc_knockoff_rows(
    chain: DiscreteMarkovChain, X, key: SeedKey
) -> np.ndarray:
    """Knockoff copies of every row of ``X``.

    Row i consumes the stream (key, i) exactly as
    ``sample_mc_knockoff(chain, X[i], substream(key, i))`` would, so the
    batched and per-row samplers are interchangeable. Work is vectorized
    across rows position by position.
    """
    X = _check_rows(X, chain.K, chain.p)
    return _knockoff_rows_given_uniforms(chain, X, row_uniforms(key, X.shape[0], chain.p))


def _knockoff_rows_given_uniforms(
    chain: DiscreteMarkovChain, X: np.ndarray, U: np.ndarray
) -> np.ndarray:
    """Batched knockoff sampler driven by caller-supplied uniforms (n, p)."""
    K, p = chain.K, chain.p
    n = X.shape[0]
    Xt = np.empty((n, p), dtype=np.int64)
    table = None

    for j in range(1, p + 1):
        if j == 1:
            if p == 1:
                V = np.broadcast_to(chain.q1, (n, K)).copy()
            else:
                table1 = chain.q1 @ chain.Q[0]
                norm = table1[X[:, 1]]
                if np.any(norm <= 0.0):
                    raise ImpossibleEvidenceError("a row is impossible under the chain")
                V = chain.q1[None, :] * chain.Q[0][:, X[:, 1]].T / norm[:, None]
                table = np.broadcast_to(table1, (n, K))
        else:
            Qj = chain.Q[j - 2]
            num = Qj[X[:, j - 2]] * Qj[Xt[:, j - 2]]
            pos = num > 0.0
            if np.any(pos & (table <= 0.0)):
                raise ImpossibleEvidenceError("a row is impossible under the chain")
            r = np.divide(num, table, out=np.zeros_like(num), where=pos)
            if j < p:
                Qn = chain.Q[j - 1]
                table = r @ Qn
                norm = table[np.arange(n), X[:, j]]
                if np.any(norm <= 0.0):
                    raise ImpossibleEvidenceError("a row is impossible under the chain")
                V = r * Qn[:, X[:, j]].T / norm[:, None]
            else:
                total = r.sum(axis=1)
                if np.any(total <= 0.0):
                    raise ImpossibleEvidenceError("a row is impossible under the chain")
                V = r / total[:, None]
        V = V / V.sum(axis=1, keepdims=True)
        Xt[:, j - 1] = draw_categorical_rows(V, U[:, j - 1])
    return Xt


def exact_joint_pmf(chain: DiscreteMarkovChain) -> np.ndarray:
    """Joint law of (x, x~) as a 2p-dimensional table.

    Axes 0..p-1 index the original coordinates and axes p..2p-1 the
    knockoff coordinates, each of size K. Entries sum to 1. Guarded to
    K**(2p) <= 1e6 table entries; larger requests raise SizeError.
    """
    K, p = chain.K, chain.p
    if K ** (2 * p) > ENUMERATION_GUARD:
        raise SizeError(f"K**(2p) = {K ** (2 * p)} exceeds {ENUMERATION_GUARD}")
    table = np.zeros((K,) * (2 * p))
    for xs in product(range(K), repeat=p):
        x = np.array(xs, dtype=np.int64)
        logw = mc_log_pmf(chain, x)
        if logw == -np.inf:
            continue
        w = np.exp(logw)
        block = table[xs]

        def fill(j, prob, xt_prefix, xt_prev, norm_prev):
            vec, nxt = knockoff_step(chain, j, x, xt_prev, norm_prev)
            for k in range(K):
                if vec[k] == 0.0:
                    continue
                if j == p:
                    block[xt_prefix + (k,)] = prob * vec[k]
                else:
                    fill(j + 1, prob * vec[k], xt_prefix + (k,), k, nxt)

        fill(1, 1.0, (), None, None)
        block *= w
    return table


def swapped_joint(table: np.ndarray, swap_set) -> np.ndarray:
    """The joint table with coordinate pairs in ``swap_set`` (0-based) exchanged.

    For a 2p-dimensional table from :func:`exact_joint_pmf`, swapping pair j
    transposes axis j with axis p+j. Exchangeability of the construction
    means the result equals the input for every swap set.
    """
    if table.ndim % 2:
        raise DimensionError("joint table must have an even number of axes")
    p = table.ndim // 2
    axes = list(range(2 * p))
    for j in swap_set:
        if not 0 <= j < p:
            raise DimensionError(f"swap index {j} outside [0, {p})")
        axes[j], axes[p + j] = axes[p + j], axes[j]
    return np.transpose(table, axes)

"""Parameter estimation: closed-form chain MLE and Baum-Welch for HMMs.

Both fitters consume a matrix of observed rows (one sequence per row) and
return models from :mod:`hmmknock.markov` / :mod:`hmmknock.hmm`. Counts are
smoothed with an additive pseudo-count so fitted models place positive
probability everywhere, which downstream knockoff generation relies on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .errors import DimensionError, SizeError, ZeroRowError
from .hmm import HiddenMarkovModel
from .markov import DiscreteMarkovChain, _check_rows

# Monotonicity slack for the EM log-likelihood assertion.
EM_LL_SLACK = 1e-8

# Guard on the state-space size an EM fit is allowed to attempt.
EM_SIZE_GUARD = 1_000_000


@dataclass(frozen=True)
class EmConfig:
    """Knobs for :func:`fit_hmm_em`.

    ``restarts`` independent Dirichlet(1) initializations are run to
    ``tol`` relative log-likelihood improvement (or ``max_iters``), and the
    best final log-likelihood wins. ``pseudo_count`` smooths every M-step
    row. ``seed`` derives the initialization streams.
    """

    max_iters: int = 200
    tol: float = 1e-6
    restarts: int = 3
    seed: int = 0
    pseudo_count: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError("max_iters and restarts must be >= 1")
        if self.tol < 0 or self.pseudo_count < 0:
            raise ValueError("tol and pseudo_count must be >= 0")


def fit_mc_mle(samples, K: int, pseudo_count: float = 1.0) -> DiscreteMarkovChain:
    """Maximum-likelihood chain from observed rows, with additive smoothing.

    Every initial-state and transition count gets ``pseudo_count`` added
    before normalization. With ``pseudo_count=0`` the estimate is the bare
    frequency estimate, and any source state never visited at some position
    raises :class:`ZeroRowError` (its transition row would be 0/0).
    """
    if pseudo_count < 0:
        raise ValueError("pseudo_count must be >= 0")
    X = np.asarray(samples)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DimensionError("samples must be a non-empty (n, p) matrix")
    n, p = X.shape
    X = _check_rows(X, K, p)

    c1 = np.bincount(X[:, 0], minlength=K).astype(float)
    q1 = (c1 + pseudo_count) / (n + K * pseudo_count)
    Q = np.empty((p - 1, K, K))
    for j in range(p - 1):
        counts = np.zeros((K, K))
        np.add.at(counts, (X[:, j], X[:, j + 1]), 1.0)
        row_tot = counts.sum(axis=1)
        if pseudo_count == 0 and np.any(row_tot == 0):
            state = int(np.flatnonzero(row_tot == 0)[0])
            raise ZeroRowError(
                f"state {state} never observed at position {j}; "
                "use pseudo_count > 0"
            )
        Q[j] = (counts + pseudo_count) / (row_tot + K * pseudo_count)[:, None]
    return DiscreteMarkovChain(q1, Q)


def _random_init(K, M, p, pos_blocks, rng):
    q1 = rng.dirichlet(np.ones(K))
    Q = rng.dirichlet(np.ones(K), size=(pos_blocks["Q"], K))
    f = rng.dirichlet(np.ones(M), size=(pos_blocks["F"], K))
    return q1, Q, f


def _log_prior(pc, q1, Q, f):
    """Log-density (up to a constant) of the smoothing prior at (q1, Q, f).

    Zero when ``pc`` is 0 so the objective reduces to the raw likelihood;
    guarded against 0 * log(0) because unsmoothed blocks may contain zeros.
    """
    if pc == 0.0:
        return 0.0
    with np.errstate(divide="ignore"):
        return pc * (np.log(q1).sum() + np.log(Q).sum() + np.log(f).sum())


def _e_step(X, q1, Q, f, tied):
    """One batched forward-backward sweep.

    Returns (log-likelihood, start counts, transition counts, emission
    counts). ``Q``/``f`` hold one block when tied, per-position blocks
    otherwise; the returned counts match that layout.
    """
    n, p = X.shape
    K = q1.size
    M = f.shape[2]
    Qat = lambda j: Q[0] if tied else Q[j]
    fat = lambda j: f[0] if tied else f[j]

    emis = np.empty((p, n, K))
    for j in range(p):
        emis[j] = fat(j)[:, X[:, j]].T

    alphas = np.empty((p, n, K))
    scales = np.empty((p, n))
    a = q1[None, :] * emis[0]
    for j in range(p):
        if j:
            a = (alphas[j - 1] @ Qat(j - 1)) * emis[j]
        c = a.sum(axis=1)
        c[c == 0.0] = np.finfo(float).tiny  # impossible rows never occur with smoothing
        alphas[j] = a / c[:, None]
        scales[j] = c
    ll = float(np.log(scales).sum())

    betas = np.empty((p, n, K))
    betas[p - 1] = 1.0
    for j in range(p - 2, -1, -1):
        betas[j] = ((betas[j + 1] * emis[j + 1]) @ Qat(j).T) / scales[j + 1][:, None]

    gamma = alphas * betas
    gamma /= gamma.sum(axis=2, keepdims=True)

    start = gamma[0].sum(axis=0)

    n_q = 1 if tied else p - 1
    trans = np.zeros((n_q, K, K))
    for j in range(p - 1):
        contrib = Qat(j) * (alphas[j].T @ (emis[j + 1] * betas[j + 1] / scales[j + 1][:, None]))
        trans[0 if tied else j] += contrib

    n_f = 1 if tied else p
    emit_counts = np.zeros((n_f, K, M))
    for j in range(p):
        block = emit_counts[0 if tied else j]
        for m in range(M):
            sel = X[:, j] == m
            if np.any(sel):
                block[:, m] += gamma[j][sel].sum(axis=0)
    return ll, start, trans, emit_counts


def fit_hmm_em(
    samples,
    K: int,
    M: int,
    config: EmConfig | None = None,
    tie_across_sites: bool = False,
    return_history: bool = False,
):
    """Baum-Welch fit of a K-state HMM over an M-symbol alphabet.

    With ``tie_across_sites=True`` a single transition matrix and a single
    emission table are estimated from pooled counts and then replicated to
    every position of the returned model (the model class always stores
    per-position blocks).

    Each iteration maximizes the smoothed objective: log-likelihood plus
    ``pseudo_count`` times the sum of the log-parameters (the log-density of
    the implied Dirichlet prior, up to a constant). That objective is
    asserted non-decreasing within a 1e-8 relative slack; it equals the raw
    log-likelihood exactly when ``pseudo_count`` is 0. With
    ``return_history=True`` the per-iteration raw log-likelihoods of the
    winning restart are returned alongside the model.
    """
    cfg = config or EmConfig()
    if K < 1 or M < 1:
        raise DimensionError("K and M must be >= 1")
    if K * M > EM_SIZE_GUARD:
        raise SizeError(f"K*M = {K * M} exceeds sanity bound {EM_SIZE_GUARD}")
    X = np.asarray(samples)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DimensionError("samples must be a non-empty (n, p) matrix")
    n, p = X.shape
    X = _check_rows(X, M, p)
    pc = cfg.pseudo_count

    blocks = {"Q": 1 if tie_across_sites else max(p - 1, 1),
              "F": 1 if tie_across_sites else p}
    best = None
    for restart in range(cfg.restarts):
        rng = substream(cfg.seed, restart)
        q1, Q, f = _random_init(K, M, p, blocks, rng)
        history: list[float] = []
        prev = -np.inf
        for _ in range(cfg.max_iters):
            ll, start, trans, emit_counts = _e_step(X, q1, Q, f, tie_across_sites)
            obj = ll + _log_prior(pc, q1, Q, f)
            if obj < prev - EM_LL_SLACK * max(1.0, abs(prev)):
                raise AssertionError(
                    f"EM objective decreased: {prev} -> {obj}"
                )
            history.append(ll)
            q1 = (start + pc) / (n + K * pc)
            Q = (trans + pc) / (trans.sum(axis=2, keepdims=True) + K * pc)
            f = (emit_counts + pc) / (emit_counts.sum(axis=2, keepdims=True) + M * pc)
            if obj - prev < cfg.tol * max(1.0, abs(prev)):
                prev = obj
                break
            prev = obj
        if best is None or prev > best[0]:
            best = (prev, q1, Q, f, history)

    _, q1, Q, f, history = best
    if tie_across_sites:
        Q = np.tile(Q[0], (p - 1, 1, 1)) if p > 1 else np.zeros((0, K, K))
        f = np.tile(f[0], (p, 1, 1))
    elif p == 1:
        Q = np.zeros((0, K, K))
    model = HiddenMarkovModel(DiscreteMarkovChain(q1, Q), f)
    return (model, history) if return_history else model

"""Simulation harness: toy models, synthetic responses, replicated experiments.

A single replicate is a full pipeline run: draw a design from a known model,
attach a sparse (generalized) linear signal, build knockoff copies under a
chosen working model, run the cross-validated L1 fit on the augmented design,
threshold the importance statistics, and score the selection against the
planted support. :func:`run_experiment` repeats this over independent
replicates (optionally in parallel) and :func:`summarize` reduces the records
to mean false discovery proportion and power with normal-theory error bars.

The generating model is built once (see :class:`ToyMcSpec` /
:class:`ToyHmmSpec`) and held fixed across replicates; each replicate draws
its own design rows, signal support and response. Every random quantity
comes from a substream keyed by ``(seed, replicate, purpose)``, so results
are bit-identical regardless of worker count or replicate execution order.
Purposes, in draw order:

    0  design matrix rows
    1  signal support
    2  response noise
    3  knockoff rows
    4  cross-validation fold assignment
    5  EM initialization (refit / unsup model sources)
    6  unsupervised estimation panel
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform
from scipy.special import expit
from scipy.stats import ttest_ind

from ._rng import SeedKey, derive_seed, substream
from .errors import DimensionError, FamilyError
from .estimate import EmConfig, fit_hmm_em, fit_mc_mle
from .genotype import HaplotypeModel
from .hmm import HiddenMarkovModel, sample_hmm_knockoff_rows, sample_hmm_rows
from .markov import DiscreteMarkovChain, sample_mc_knockoff_rows, sample_mc_rows
from .select import (
    KKT_CERT,
    augment_design,
    compute_w,
    fdp_power,
    knockoff_threshold,
    l1_fit_cv,
)

MODEL_SOURCES = ("true", "refit", "unsup")


def state_labels(K: int) -> np.ndarray:
    """Centered numeric codes for a K-letter alphabet: 0..K-1 -> -(K//2)..."""
    return np.arange(K, dtype=float) - K // 2


@dataclass(frozen=True)
class ToyMcSpec:
    """Sticky inhomogeneous chain: per-site diagonal boost gamma_j.

    ``gamma`` is drawn once per spec from Uniform[0, 0.5] (seeded) when not
    given explicitly; the chain built from a spec is then deterministic, so
    replicates share one model.
    """

    p: int
    K: int = 5
    gamma: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.K < 2:
            raise DimensionError("need p >= 1 and K >= 2")
        g = self.gamma
        if g is None:
            g = substream(self.seed).uniform(0.0, 0.5, size=max(self.p - 1, 0))
        g = np.asarray(g, dtype=float)
        if g.shape != (max(self.p - 1, 0),):
            raise DimensionError(f"gamma must have length p-1 = {self.p - 1}")
        if g.size and (g.min() < 0.0 or g.max() > 0.5):
            raise ValueError("gamma entries must lie in [0, 0.5]")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class ToyHmmSpec:
    """Cyclic-drift latent chain with a matched-size emission alphabet.

    The latent state starts at 0, keeps its value with probability
    ``self_prob`` and advances one step around the cycle with ``step_prob``.
    State z emits z or z+1 (mod K) with probability ``gamma``/2 each and any
    other letter uniformly; gamma = 2/K makes the emissions exactly uniform
    (an informative boundary case, not an error).
    """

    p: int
    K: int = 9
    M: int | None = None
    gamma: float = 0.35
    self_prob: float = 0.9
    step_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.M is None:
            object.__setattr__(self, "M", self.K)
        if self.p < 1 or self.K < 3:
            raise DimensionError("need p >= 1 and K >= 3")
        if self.M != self.K:
            raise DimensionError("the toy uses matched alphabet sizes (M = K)")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if abs(self.self_prob + self.step_prob - 1.0) > 1e-12:
            raise ValueError("self_prob + step_prob must equal 1")


def build_toy_mc(spec: ToyMcSpec) -> DiscreteMarkovChain:
    """Uniform start; site j keeps state w.p. 1/K + gamma_j (1 - 1/K)."""
    K, p = spec.K, spec.p
    q1 = np.full(K, 1.0 / K)
    diag = 1.0 / K + spec.gamma * (1.0 - 1.0 / K)
    Q = np.empty((p - 1, K, K))
    for j in range(p - 1):
        Q[j] = (1.0 - diag[j]) / (K - 1)
        np.fill_diagonal(Q[j], diag[j])
    return DiscreteMarkovChain(q1, Q)


def build_toy_hmm(spec: ToyHmmSpec) -> HiddenMarkovModel:
    """Point-mass start, self/step cyclic transitions, two-symbol emissions."""
    K, p = spec.K, spec.p
    q1 = np.zeros(K)
    q1[0] = 1.0
    T = np.zeros((K, K))
    for z in range(K):
        T[z, z] = spec.self_prob
        T[z, (z + 1) % K] = spec.step_prob
    Q = np.broadcast_to(T, (p - 1, K, K)).copy()
    f_row = np.full((K, K), (1.0 - spec.gamma) / (K - 2))
    for z in range(K):
        f_row[z, z] = spec.gamma / 2.0
        f_row[z, (z + 1) % K] = spec.gamma / 2.0
    f = np.broadcast_to(f_row, (p, K, K)).copy()
    return HiddenMarkovModel(DiscreteMarkovChain(q1, Q), f)


def build_toy_haplotype(p: int, K: int, seed: int = 0) -> HaplotypeModel:
    """Random mosaic model: moderate recombination, Dirichlet motif weights."""
    if K < 2 or p < 1:
        raise DimensionError("need K >= 2 and p >= 1")
    rng = substream(seed)
    r = np.zeros(p)
    if p > 1:
        r[1:] = rng.uniform(0.1, 2.0, size=p - 1)
    a = rng.dirichlet(np.full(K, 5.0), size=p)
    theta = rng.uniform(0.05, 0.95, size=(p, K))
    return HaplotypeModel(r, a, theta)


@dataclass(frozen=True)
class ResponseSpec:
    """Sparse positive signal: beta_j = amplitude / sqrt(n) exactly on truth."""

    s: int
    amplitude: float
    truth: np.ndarray
    beta: np.ndarray
    family: str = "logistic"

    def __post_init__(self):
        if self.family not in ("logistic", "linear"):
            raise FamilyError(f"unknown family {self.family!r}")
        truth = np.asarray(self.truth, dtype=np.int64)
        if truth.size != self.s or np.unique(truth).size != self.s:
            raise DimensionError("truth must hold exactly s distinct indices")
        support = np.flatnonzero(np.asarray(self.beta) != 0.0)
        if not np.array_equal(np.sort(truth), support):
            raise DimensionError("beta must be supported exactly on truth")


def make_response_spec(
    p: int, s: int, amplitude: float, n: int, rng: np.random.Generator,
    family: str = "logistic",
) -> ResponseSpec:
    """s coordinates drawn without replacement; one shared positive sign."""
    if not 0 <= s <= p:
        raise DimensionError(f"need 0 <= s <= p, got s={s}, p={p}")
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    truth = np.sort(rng.choice(p, size=s, replace=False))
    beta = np.zeros(p)
    if amplitude > 0:
        beta[truth] = amplitude / np.sqrt(n)
    else:
        truth = truth[:0]  # amplitude 0 plants no signal at all
        return ResponseSpec(0, 0.0, truth, beta, family)
    return ResponseSpec(s, amplitude, truth, beta, family)


def encode_design(X: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Numeric design: column j is labels[X[:, j]]."""
    X = np.asarray(X)
    labels = np.asarray(labels, dtype=float)
    if X.size and (X.min() < 0 or X.max() >= labels.size):
        raise DimensionError("design entries outside the label alphabet")
    return labels[X]


def sample_response(x, spec: ResponseSpec, rng: np.random.Generator):
    """Draw the response for real-valued rows x in the family ``spec`` names.

    ``x`` is the already label-mapped sequence (or a matrix of such rows);
    binary responses are Bernoulli with success probability sigmoid(x beta).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    rows = np.atleast_2d(x)
    if rows.shape[1] != spec.beta.size:
        raise DimensionError("x length does not match beta")
    signal = rows @ spec.beta
    if spec.family == "logistic":
        y = (rng.random(signal.size) < expit(signal)).astype(float)
    else:
        y = signal + rng.standard_normal(signal.size)
    return float(y[0]) if single else y


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    amplitude: float
    fdp: float
    power: float
    n_selected: int
    wall_ms: float


def _default_labels(model) -> np.ndarray:
    alphabet = model.M if isinstance(model, HiddenMarkovModel) else model.K
    return state_labels(alphabet)


def _working_model(model, model_source, X, panel, pseudo_count, em, em_seed):
    """The model handed to the knockoff sampler for this replicate."""
    if model_source == "true":
        return model
    data = X if model_source == "refit" else panel
    if isinstance(model, HiddenMarkovModel):
        cfg = EmConfig(max_iters=em.max_iters, tol=em.tol, restarts=em.restarts,
                       seed=em_seed, pseudo_count=pseudo_count)
        return fit_hmm_em(data, model.K, model.M, cfg)
    return fit_mc_mle(data, model.K, pseudo_count=pseudo_count)


def run_replicate(
    model_source: str,
    model,
    amplitude: float,
    rep: int,
    seed: SeedKey,
    *,
    n: int = 300,
    s: int = 20,
    alpha: float = 0.1,
    offset: int = 1,
    labels: np.ndarray | None = None,
    family: str = "logistic",
    combiner: str = "difference",
    folds: int = 10,
    grid_size: int = 100,
    pseudo_count: float = 1.0,
    em: EmConfig = EmConfig(max_iters=50, tol=1e-5, restarts=2),
    unsup_n: int | None = None,
) -> ReplicateRecord:
    """Execute one replicate of the pipeline and score it against the truth.

    Raises ``AssertionError`` if the returned CV fit misses the stationarity
    certificate; a selection computed from a non-converged fit would be
    silently wrong, so it must never enter the records.
    """
    if model_source not in MODEL_SOURCES:
        raise ValueError(f"model_source must be one of {MODEL_SOURCES}")
    t0 = time.perf_counter()
    is_hmm = isinstance(model, HiddenMarkovModel)
    if labels is None:
        labels = _default_labels(model)

    if is_hmm:
        X, _ = sample_hmm_rows(model, n, (seed, rep, 0))
    else:
        X = sample_mc_rows(model, n, (seed, rep, 0))
    spec = make_response_spec(model.p, s, amplitude, n, substream(seed, rep, 1),
                              family)
    y = sample_response(encode_design(X, labels), spec, substream(seed, rep, 2))

    panel = None
    if model_source == "unsup":
        n_u = n if unsup_n is None else unsup_n
        if is_hmm:
            panel, _ = sample_hmm_rows(model, n_u, (seed, rep, 6))
        else:
            panel = sample_mc_rows(model, n_u, (seed, rep, 6))
    working = _working_model(model, model_source, X, panel, pseudo_count, em,
                             derive_seed(seed, rep, 5))

    if is_hmm:
        Xt, _, _ = sample_hmm_knockoff_rows(working, X, (seed, rep, 3))
    else:
        Xt = sample_mc_knockoff_rows(working, X, (seed, rep, 3))

    design = augment_design(
        encode_design(X, labels), encode_design(Xt, labels), y, family)
    fit = l1_fit_cv(design, folds=folds, grid_size=grid_size,
                    rng=substream(seed, rep, 4))
    assert fit.kkt_violation <= KKT_CERT, (
        f"CV fit failed its stationarity certificate: {fit.kkt_violation:.2e}")
    w = compute_w(fit.beta, combiner=combiner)
    result = knockoff_threshold(w.w, alpha=alpha, offset=offset)
    fdp, power = fdp_power(result.selected, spec.truth)
    wall_ms = (time.perf_counter() - t0) * 1e3
    return ReplicateRecord(rep, float(amplitude), fdp, power,
                           int(result.selected.size), wall_ms)


def run_experiment(
    model_source: str,
    model,
    amplitudes,
    replications: int,
    alpha: float = 0.1,
    offset: int = 1,
    seed: int = 0,
    *,
    n: int = 300,
    s: int = 20,
    labels: np.ndarray | None = None,
    family: str = "logistic",
    combiner: str = "difference",
    folds: int = 10,
    grid_size: int = 100,
    pseudo_count: float = 1.0,
    em: EmConfig = EmConfig(max_iters=50, tol=1e-5, restarts=2),
    unsup_n: int | None = None,
    n_jobs: int = 1,
) -> list[ReplicateRecord]:
    """Independent replicates of one design, across an amplitude grid.

    ``model`` is the fixed generating chain or HMM; ``model_source`` picks
    what the knockoff sampler sees: the same object ("true"), a model
    re-estimated from the rows being analyzed ("refit"), or one estimated
    from a fresh unlabeled panel of ``unsup_n`` rows ("unsup").

    Replicates are embarrassingly parallel; ``n_jobs`` only changes wall
    time, never the records, because every replicate derives its randomness
    from (seed, replicate, purpose) alone. Records come back ordered by
    amplitude then replicate id.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    amps = [float(a) for a in np.atleast_1d(np.asarray(amplitudes, dtype=float))]
    kw = dict(n=n, s=s, alpha=alpha, offset=offset, labels=labels, family=family,
              combiner=combiner, folds=folds, grid_size=grid_size,
              pseudo_count=pseudo_count, em=em, unsup_n=unsup_n)
    tasks = [(a, rep) for a in amps for rep in range(replications)]
    if n_jobs == 1:
        return [run_replicate(model_source, model, a, rep, seed, **kw)
                for a, rep in tasks]
    out = Parallel(n_jobs=n_jobs)(
        delayed(run_replicate)(model_source, model, a, rep, seed, **kw)
        for a, rep in tasks)
    return list(out)


@dataclass(frozen=True)
class SummaryRow:
    """Monte Carlo means with normal-approximation 95% half-widths."""

    amplitude: float
    n_reps: int
    fdr: float
    fdr_halfwidth: float
    power: float
    power_halfwidth: float
    mean_selected: float
    mean_wall_ms: float


def _mean_halfwidth(values: np.ndarray) -> tuple[float, float]:
    m = float(values.mean())
    return m, float(1.96 * values.std(ddof=1) / np.sqrt(values.size))


def summarize(records) -> list[SummaryRow]:
    """Reduce replicate records to one row per amplitude (ascending)."""
    records = list(records)
    rows = []
    for a in sorted({r.amplitude for r in records}):
        group = sorted((r for r in records if r.amplitude == a),
                       key=lambda r: r.replicate)
        if len(group) < 2:
            raise DimensionError("need at least 2 records per amplitude")
        fdr, fdr_hw = _mean_halfwidth(np.array([r.fdp for r in group]))
        pw, pw_hw = _mean_halfwidth(np.array([r.power for r in group]))
        rows.append(SummaryRow(
            amplitude=a, n_reps=len(group), fdr=fdr, fdr_halfwidth=fdr_hw,
            power=pw, power_halfwidth=pw_hw,
            mean_selected=float(np.mean([r.n_selected for r in group])),
            mean_wall_ms=float(np.mean([r.wall_ms for r in group])),
        ))
    return rows


@dataclass(frozen=True)
class PruneResult:
    """Correlation-pruned variable set and the rows spent choosing it.

    ``representatives`` holds one column index per cluster (sorted);
    ``cluster_ids`` maps each column to its 1-based cluster, 0 for excluded
    constant columns; ``holdout_rows`` are the rows used to rank columns
    within clusters and ``main_rows`` the remainder, which stay clean for
    selection.
    """

    representatives: np.ndarray
    cluster_ids: np.ndarray
    holdout_rows: np.ndarray
    main_rows: np.ndarray


def cluster_prune(
    data: np.ndarray,
    y: np.ndarray,
    cutoff: float = 0.5,
    holdout_frac: float = 0.2,
    rng: np.random.Generator | int = 0,
) -> PruneResult:
    """Group columns whose |correlation| exceeds ``cutoff``; keep one each.

    Single-linkage clustering on the distance 1 - |corr|, cut so that only
    pairs strictly above the cutoff can drive a merge (chains of such pairs
    still coalesce, as single linkage does). Within each cluster the kept
    column is the one most marginally associated with ``y`` on a held-out
    row fraction (two-sample t statistic for binary y, absolute correlation
    otherwise), so the remaining rows never touch y before selection.
    Constant columns carry no information and are excluded with a warning.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if not 0.0 < cutoff < 1.0:
        raise ValueError("cutoff must be in (0, 1)")
    E = np.asarray(data, dtype=float)
    if E.ndim != 2:
        raise DimensionError("data must be an (n, p) matrix")
    n, p = E.shape
    if n < 10:
        raise DimensionError(f"need n >= 10 rows to split off a holdout, got {n}")
    n_hold = int(round(holdout_frac * n))
    if not 2 <= n_hold < n:
        raise DimensionError(f"holdout of {n_hold} rows from n={n} is unusable")
    perm = rng.permutation(n)
    holdout_rows = np.sort(perm[:n_hold])
    main_rows = np.sort(perm[n_hold:])

    sd = E.std(axis=0)
    # max-min is exact for constant columns; std can round away from 0
    degenerate = np.ptp(E, axis=0) == 0.0
    if degenerate.any():
        warnings.warn(f"excluding {int(degenerate.sum())} constant column(s)",
                      stacklevel=2)
    live = np.flatnonzero(~degenerate)
    cluster_ids = np.zeros(p, dtype=np.int64)
    if live.size == 1:
        cluster_ids[live] = 1
    elif live.size > 1:
        Z = (E[:, live] - E[:, live].mean(axis=0)) / sd[live]
        D = np.clip(1.0 - np.abs(Z.T @ Z / n), 0.0, None)
        np.fill_diagonal(D, 0.0)
        links = linkage(squareform(D, checks=False), method="single")
        # strict: |corr| == cutoff must NOT merge
        cluster_ids[live] = fcluster(links, t=1.0 - cutoff - 1e-9,
                                     criterion="distance")

    scores = _association_scores(E[holdout_rows], y[holdout_rows])
    reps = []
    for c in np.unique(cluster_ids[live]) if live.size else []:
        members = np.flatnonzero(cluster_ids == c)
        reps.append(members[np.argmax(scores[members])])
    return PruneResult(np.sort(np.array(reps, dtype=np.int64)), cluster_ids,
                       holdout_rows, main_rows)


def _association_scores(E: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-column marginal association with y; larger = stronger."""
    y = np.asarray(y, dtype=float)
    binary = set(np.unique(y)) <= {0.0, 1.0}
    scores = np.zeros(E.shape[1])
    if binary and 0 < y.sum() < y.size:
        g1, g0 = E[y == 1.0], E[y == 0.0]
        # degenerate columns score 0 below; silence the precision warning
        # scipy emits for them
        with np.errstate(divide="ignore", invalid="ignore"), \
                warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            t = ttest_ind(g1, g0, equal_var=False).statistic
        scores = np.abs(np.nan_to_num(t, nan=0.0, posinf=0.0, neginf=0.0))
    else:
        yc = y - y.mean()
        sy = yc.std()
        if sy > 0:
            Ec = E - E.mean(axis=0)
            se = Ec.std(axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                corr = (Ec.T @ yc) / (E.shape[0] * se * sy)
            scores = np.abs(np.nan_to_num(corr, nan=0.0, posinf=0.0, neginf=0.0))
    return scores


def recycle_holdout_knockoffs(
    X: np.ndarray, Xt: np.ndarray, holdout_rows: np.ndarray
) -> np.ndarray:
    """Copy the original rows over the knockoff rows on the holdout.

    After a holdout has been spent ranking variables, its rows cannot also
    carry knockoff randomness; re-using the originals there keeps the
    augmented design full-height while the comparison between a column and
    its copy is driven by the untouched rows alone.
    """
    X, Xt = np.asarray(X), np.asarray(Xt)
    if X.shape != Xt.shape:
        raise DimensionError("X and Xt must have the same shape")
    out = Xt.copy()
    out[holdout_rows] = X[holdout_rows]
    return out

"""Haplotype copying model and its compilation to a genotype HMM.

The haplotype model is the classic mosaic parametrization used by phasing
and imputation software: each haplotype is a hidden mosaic of K founder
motifs. At site j the motif either survives with probability exp(-r_j) or
is redrawn from the site's motif weights alpha_{j,.}; motif k emits allele
1 with probability theta_{j,k}.

An unphased genotype is the sum of two independent haplotypes. Tracking the
unordered motif pair {ka, kb} turns that sum into a single HMM with
K_eff = K (K + 1) / 2 latent states and emission alphabet {0, 1, 2} (allele
dosage), which is what ``compile_genotype_hmm`` builds. Knockoff generation
then runs on the compiled model with the machinery from :mod:`hmmknock.hmm`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .hmm import HiddenMarkovModel
from .markov import DiscreteMarkovChain, _check_distribution

# theta is clamped into [THETA_CLAMP, 1 - THETA_CLAMP] on ingestion so no
# allele is ever emitted with probability exactly 0 or 1.
THETA_CLAMP = 1e-6


@dataclass(frozen=True)
class HaplotypeModel:
    """Mosaic haplotype model over K founder motifs at p sites.

    Parameters
    ----------
    r
        Jump-rate parameters, shape (p,); ``r[0]`` is unused (the first
        site draws its motif from ``a[0]`` directly).
    a
        Motif weights per site, shape (p, K); rows sum to 1.
    theta
        Allele-1 emission probability per site and motif, shape (p, K).
    """

    r: np.ndarray
    a: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        a = np.asarray(self.a, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if r.ndim != 1 or a.ndim != 2 or theta.ndim != 2:
            raise DimensionError("r must be (p,), a and theta must be (p, K)")
        p = r.size
        if a.shape[0] != p or theta.shape != a.shape:
            raise DimensionError(
                f"inconsistent shapes: r {r.shape}, a {a.shape}, theta {theta.shape}"
            )
        if np.any(r[1:] < 0):
            raise ValueError("jump rates r must be non-negative")
        _check_distribution(a, "motif weights a")
        theta = np.clip(theta, THETA_CLAMP, 1.0 - THETA_CLAMP)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "theta", theta)

    @property
    def K(self) -> int:
        return self.a.shape[1]

    @property
    def p(self) -> int:
        return self.r.size


def n_pair_states(K: int) -> int:
    """Number of unordered motif pairs, K (K + 1) / 2."""
    return K * (K + 1) // 2


def pair_index(ka: int, kb: int, K: int) -> int:
    """Index of the unordered pair {ka, kb} with 0 <= ka <= kb < K.

    Pairs are enumerated row-major over the upper triangle:
    (0,0), (0,1), ..., (0,K-1), (1,1), ..., (K-1,K-1).
    """
    if not 0 <= ka <= kb < K:
        raise DimensionError(f"need 0 <= ka <= kb < K, got ({ka}, {kb}) with K={K}")
    return ka * K - ka * (ka - 1) // 2 + (kb - ka)


def index_pair(idx: int, K: int) -> tuple[int, int]:
    """Inverse of :func:`pair_index`."""
    if not 0 <= idx < n_pair_states(K):
        raise DimensionError(f"pair index {idx} outside [0, {n_pair_states(K)})")
    ka = 0
    while pair_index(ka, K - 1, K) < idx:
        ka += 1
    kb = ka + (idx - pair_index(ka, ka, K))
    return ka, kb


def _pair_table(K: int) -> tuple[np.ndarray, np.ndarray]:
    """(ia, ib) arrays listing the motif pair for every pair-state index."""
    pairs = [(ka, kb) for ka in range(K) for kb in range(ka, K)]
    arr = np.array(pairs, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def haplotype_transition(model: HaplotypeModel, j: int) -> np.ndarray:
    """Single-haplotype transition matrix into site j (1-based, 2 <= j <= p).

    Row k is exp(-r_j) on the diagonal plus (1 - exp(-r_j)) times the site's
    motif weights: the mosaic either survives or is redrawn.
    """
    if not 2 <= j <= model.p:
        raise DimensionError(f"need 2 <= j <= {model.p}, got {j}")
    stay = np.exp(-model.r[j - 1])
    return stay * np.eye(model.K) + (1.0 - stay) * model.a[j - 1][None, :]


def _alpha_rows(model: HaplotypeModel, alpha_constant_per_site: bool) -> np.ndarray:
    if alpha_constant_per_site:
        return np.full_like(model.a, 1.0 / model.K)
    return model.a


def compile_haplotype_hmm(
    model: HaplotypeModel, alpha_constant_per_site: bool = False
) -> HiddenMarkovModel:
    """HMM for a single haplotype: K motif states, binary allele emissions."""
    a = _alpha_rows(model, alpha_constant_per_site)
    constrained = HaplotypeModel(model.r, a, model.theta)
    Q = np.stack(
        [haplotype_transition(constrained, j) for j in range(2, model.p + 1)]
    ) if model.p > 1 else np.zeros((0, model.K, model.K))
    f = np.stack([1.0 - model.theta, model.theta], axis=2)
    return HiddenMarkovModel(DiscreteMarkovChain(a[0], Q), f)


def compile_genotype_hmm(
    model: HaplotypeModel, alpha_constant_per_site: bool = False
) -> HiddenMarkovModel:
    """Genotype HMM over unordered motif pairs with dosage emissions {0, 1, 2}.

    The latent state at site j is the unordered pair of motifs carried by
    the two haplotypes; the two mosaics move independently, so the pair
    transition symmetrizes the single-haplotype kernel. Emissions convolve
    the two allele draws: dosage 0 needs both reference, 2 needs both
    alternate, 1 is the cross term.

    With ``alpha_constant_per_site=True`` the motif weights are replaced by
    the row-constant (uniform) weights before compiling.
    """
    K, p = model.K, model.p
    a = _alpha_rows(model, alpha_constant_per_site)
    constrained = HaplotypeModel(model.r, a, model.theta)
    ia, ib = _pair_table(K)
    off_diag = ia != ib

    q1_hap = a[0]
    q1 = q1_hap[ia] * q1_hap[ib] * np.where(off_diag, 2.0, 1.0)

    n_pairs = ia.size
    Q = np.empty((p - 1, n_pairs, n_pairs))
    for j in range(2, p + 1):
        Qh = haplotype_transition(constrained, j)
        direct = Qh[ia[:, None], ia[None, :]] * Qh[ib[:, None], ib[None, :]]
        crossed = Qh[ia[:, None], ib[None, :]] * Qh[ib[:, None], ia[None, :]]
        Q[j - 2] = direct + np.where(off_diag[None, :], crossed, 0.0)

    ta, tb = constrained.theta[:, ia], constrained.theta[:, ib]  # (p, n_pairs)
    f = np.stack(
        [(1.0 - ta) * (1.0 - tb), ta * (1.0 - tb) + (1.0 - ta) * tb, ta * tb],
        axis=2,
    )
    return HiddenMarkovModel(DiscreteMarkovChain(q1, Q), f)

"""FDR-controlled variable selection on an augmented original/knockoff design.

Pipeline: standardize the n x 2p matrix [X, X~], fit an L1-penalized
regression path by cyclic coordinate descent (linear least squares, or
logistic via iteratively reweighted coordinate descent), pick the penalty
by K-fold cross-validated deviance, reduce the 2p coefficients to p
contrast statistics w, and threshold w by the knockoff rule.

The objective is (1/(2n)) * loss + lambda * ||beta||_1 with an unpenalized
intercept; columns are standardized to mean 0 and population variance 1,
so the subgradient (KKT) conditions have the clean form
|x_j' r| / n <= lambda for zero coefficients and = lambda * sign(beta_j)
for active ones. Every fit records its worst KKT violation so callers can
certify convergence.

Only coefficient symmetry matters downstream: swapping a column with its
knockoff flips the sign of that variable's w and changes nothing else
(given the same fold assignment and penalty grid), which is what makes the
selection threshold an FDR-controlling rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionError, FamilyError

FAMILIES = ("linear", "logistic")

# Convergence targets. Fits along the penalty grid run to PATH_KKT_TOL;
# the fit actually returned is polished to KKT_TARGET, well inside the
# public certificate bound of 1e-6.
KKT_TARGET = 2e-7
PATH_KKT_TOL = 1e-5
ACTIVE_TOL = 1e-10
MAX_OUTER = 40
POLISH_MAX_OUTER = 400
# certificate bound consumers may rely on: a returned CV fit is only
# trusted when its KKT violation is at most this
KKT_CERT = 1e-6

LAMBDA_MIN_RATIO = 1e-3


def standardize_columns(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Columns centered and scaled to population variance 1.

    Constant columns cannot be scaled; they are set to all zeros and
    flagged in the returned boolean mask (True = constant). Zero columns
    never enter the model: their gradient is identically zero.
    """
    A = np.asarray(A, dtype=float)
    mean = A.mean(axis=0)
    sd = A.std(axis=0)  # population convention, divides by n
    const = sd == 0.0
    out = (A - mean) / np.where(const, 1.0, sd)
    out[:, const] = 0.0
    return np.ascontiguousarray(out), const


@dataclass(frozen=True)
class AugmentedDesign:
    """Standardized [X, X~] design with its response.

    ``matrix`` has shape (n, 2p): original columns first, knockoff columns
    second, each standardized (constant columns zeroed and flagged in
    ``const_mask``).
    """

    matrix: np.ndarray
    y: np.ndarray
    family: str
    const_mask: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1] // 2


def augment_design(X, X_knock, y, family: str = "logistic") -> AugmentedDesign:
    """Build the standardized augmented design from raw value matrices."""
    X = np.asarray(X, dtype=float)
    Xk = np.asarray(X_knock, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape != Xk.shape:
        raise DimensionError(f"X {X.shape} and knockoffs {Xk.shape} must match")
    if y.shape[0] != X.shape[0]:
        raise DimensionError(f"response length {y.shape[0]} != n = {X.shape[0]}")
    if family not in FAMILIES:
        raise FamilyError(f"family must be one of {FAMILIES}, got '{family}'")
    if family == "logistic" and not np.isin(y, (0.0, 1.0)).all():
        raise FamilyError("logistic family requires a binary 0/1 response")
    mat, const = standardize_columns(np.hstack([X, Xk]))
    return AugmentedDesign(mat, y, family, const)


# ---------------------------------------------------------------------------
# Coordinate-descent kernels


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _gauss_sweep(X, r, beta, xn, lam, active_only):
    n, m = X.shape
    maxch = 0.0
    for j in range(m):
        if xn[j] <= 0.0:
            continue
        bj = beta[j]
        if active_only and bj == 0.0:
            continue
        dot = 0.0
        for i in range(n):
            dot += X[i, j] * r[i]
        bnew = _soft(dot / n + bj * xn[j], lam) / xn[j]
        d = bnew - bj
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = bnew
            if abs(d) > maxch:
                maxch = abs(d)
    return maxch


@njit(cache=True)
def _gauss_kkt(X, r, beta, xn, lam):
    n, m = X.shape
    viol = 0.0
    for j in range(m):
        if xn[j] <= 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        g /= n
        if beta[j] == 0.0:
            v = abs(g) - lam
        elif beta[j] > 0.0:
            v = abs(g - lam)
        else:
            v = abs(g + lam)
        if v > viol:
            viol = v
    s = 0.0
    for i in range(n):
        s += r[i]
    if abs(s / n) > viol:
        viol = abs(s / n)
    return viol


@njit(cache=True)
def _gaussian_path(X, y, lams, kkt_tol, max_rounds):
    n, m = X.shape
    L = lams.shape[0]
    betas = np.zeros((L, m))
    b0s = np.zeros(L)
    kkts = np.zeros(L)
    xn = np.empty(m)
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        xn[j] = s / n
    b0 = 0.0
    for i in range(n):
        b0 += y[i]
    b0 /= n
    beta = np.zeros(m)
    r = np.empty(n)
    for i in range(n):
        r[i] = y[i] - b0
    for li in range(L):
        lam = lams[li]
        viol = lam
        for _ in range(max_rounds):
            # converge the active set to a tolerance tied to the current
            # KKT violation, so early rounds stay cheap
            tol_now = 0.01 * viol
            if tol_now < ACTIVE_TOL:
                tol_now = ACTIVE_TOL
            for _ in range(50):
                chg = _gauss_sweep(X, r, beta, xn, lam, True)
                if chg <= tol_now:
                    break
            _gauss_sweep(X, r, beta, xn, lam, False)
            mr = 0.0
            for i in range(n):
                mr += r[i]
            mr /= n
            if mr != 0.0:
                b0 += mr
                for i in range(n):
                    r[i] -= mr
            viol = _gauss_kkt(X, r, beta, xn, lam)
            if viol <= kkt_tol:
                break
        betas[li] = beta
        b0s[li] = b0
        kkts[li] = viol
    return betas, b0s, kkts


@njit(cache=True)
def _logit_clip(t):
    if t > 30.0:
        return 30.0
    if t < -30.0:
        return -30.0
    return t


@njit(cache=True)
def _logistic_grad_kkt(X, y, eta, beta, const, lam):
    """Worst KKT violation of the true logistic objective at (beta, eta)."""
    n, m = X.shape
    resid = np.empty(n)
    for i in range(n):
        p = 1.0 / (1.0 + np.exp(-_logit_clip(eta[i])))
        resid[i] = y[i] - p
    viol = 0.0
    for j in range(m):
        if const[j]:
            continue
        g = 0.0
        for i in range(n):
            g += X[i, j] * resid[i]
        g /= n
        if beta[j] == 0.0:
            v = abs(g) - lam
        elif beta[j] > 0.0:
            v = abs(g - lam)
        else:
            v = abs(g + lam)
        if v > viol:
            viol = v
    s = 0.0
    for i in range(n):
        s += resid[i]
    if abs(s / n) > viol:
        viol = abs(s / n)
    return viol


@njit(cache=True)
def _weighted_sweep(X, w, r, eta, beta, dn, lam, active_only):
    n, m = X.shape
    maxch = 0.0
    for j in range(m):
        if dn[j] <= 0.0:
            continue
        bj = beta[j]
        if active_only and bj == 0.0:
            continue
        dot = 0.0
        for i in range(n):
            dot += w[i] * X[i, j] * r[i]
        bnew = _soft(dot / n + bj * dn[j], lam) / dn[j]
        d = bnew - bj
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
                eta[i] += d * X[i, j]
            beta[j] = bnew
            if abs(d) > maxch:
                maxch = abs(d)
    return maxch


@njit(cache=True)
def _logistic_path(X, y, lams, kkt_tol, max_outer):
    n, m = X.shape
    L = lams.shape[0]
    betas = np.zeros((L, m))
    b0s = np.zeros(L)
    kkts = np.zeros(L)
    const = np.empty(m, dtype=np.bool_)
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        const[j] = s <= 0.0
    mu = 0.0
    for i in range(n):
        mu += y[i]
    mu /= n
    b0 = np.log(mu / (1.0 - mu))
    beta = np.zeros(m)
    eta = np.full(n, b0)
    w = np.empty(n)
    r = np.empty(n)
    dn = np.empty(m)
    for li in range(L):
        lam = lams[li]
        viol = lam
        for _ in range(max_outer):
            viol = _logistic_grad_kkt(X, y, eta, beta, const, lam)
            if viol <= kkt_tol:
                break
            # quadratic approximation at the current linear predictor
            for i in range(n):
                p = 1.0 / (1.0 + np.exp(-_logit_clip(eta[i])))
                wi = p * (1.0 - p)
                if wi < 1e-5:
                    wi = 1e-5
                w[i] = wi
                r[i] = (y[i] - p) / wi
            for j in range(m):
                if const[j]:
                    dn[j] = 0.0
                    continue
                s = 0.0
                for i in range(n):
                    s += w[i] * X[i, j] * X[i, j]
                dn[j] = s / n
            # solve the quadratic model roughly early on, tightly near the
            # end: its accuracy only needs to track the outer violation
            tol_now = 0.01 * viol
            if tol_now < ACTIVE_TOL:
                tol_now = ACTIVE_TOL
            for _ in range(3):
                for _ in range(50):
                    chg = _weighted_sweep(X, w, r, eta, beta, dn, lam, True)
                    if chg <= tol_now:
                        break
                chg = _weighted_sweep(X, w, r, eta, beta, dn, lam, False)
                sw = 0.0
                swr = 0.0
                for i in range(n):
                    sw += w[i]
                    swr += w[i] * r[i]
                db0 = swr / sw
                if db0 != 0.0:
                    b0 += db0
                    for i in range(n):
                        r[i] -= db0
                        eta[i] += db0
                if chg <= tol_now and abs(db0) <= tol_now:
                    break
        betas[li] = beta
        b0s[li] = b0
        kkts[li] = viol
    return betas, b0s, kkts


# ---------------------------------------------------------------------------
# Python-level API


def lambda_grid(matrix: np.ndarray, y: np.ndarray, family: str,
                grid_size: int = 100) -> np.ndarray:
    """Log-spaced penalty grid from lambda_max down to lambda_max * 1e-3.

    lambda_max = max_j |x_j'(y - ybar)| / n is the smallest penalty at
    which every coefficient is zero (for both families, via the null-model
    gradient).
    """
    if grid_size < 1:
        raise DimensionError("grid_size must be >= 1")
    n = matrix.shape[0]
    resid = y - y.mean()
    lam_max = np.abs(matrix.T @ resid).max() / n
    if lam_max <= 0.0:
        lam_max = 1.0  # constant response: any positive penalty gives the null fit
    return np.geomspace(lam_max, lam_max * LAMBDA_MIN_RATIO, grid_size)


def l1_fit(matrix, y, family: str, lambdas,
           kkt_tol: float = KKT_TARGET,
           max_outer: int = POLISH_MAX_OUTER) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coordinate-descent path at the given penalties (decreasing order).

    Returns (betas, intercepts, kkt_violations) with one row per penalty.
    The matrix is used as given; callers standardize first. ``kkt_tol`` is
    the convergence target on the true objective's subgradient conditions;
    the third return value certifies what each fit actually achieved.
    """
    X = np.ascontiguousarray(matrix, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    lams = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if family not in FAMILIES:
        raise FamilyError(f"family must be one of {FAMILIES}, got '{family}'")
    if X.shape[0] != y.shape[0]:
        raise DimensionError("matrix and response row counts differ")
    if family == "logistic":
        if not np.isin(y, (0.0, 1.0)).all():
            raise FamilyError("logistic family requires a binary 0/1 response")
        if y.min() == y.max():
            raise FamilyError("logistic family requires both response classes present")
        return _logistic_path(X, y, lams, kkt_tol, max_outer)
    return _gaussian_path(X, y, lams, kkt_tol, max_outer)


def _deviance(family: str, y: np.ndarray, eta: np.ndarray) -> float:
    if family == "linear":
        return float(((y - eta) ** 2).sum())
    p = 1.0 / (1.0 + np.exp(-np.clip(eta, -30.0, 30.0)))
    p = np.clip(p, 1e-10, 1.0 - 1e-10)
    return float(-2.0 * (y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())


@dataclass(frozen=True)
class L1CvFit:
    """Full-data path solution at the cross-validated penalty.

    ``beta`` is the 2p coefficient vector (no intercept). ``cv_deviance``
    holds the pooled held-out deviance per grid point, ``kkt_violation``
    the certified worst-case subgradient violation of the returned fit.
    """

    beta: np.ndarray
    intercept: float
    lambda_cv: float
    lambda_index: int
    lambda_grid: np.ndarray
    cv_deviance: np.ndarray
    kkt_violation: float
    fold_ids: np.ndarray


def l1_fit_cv(design: AugmentedDesign, folds: int = 10, grid_size: int = 100,
              rng: np.random.Generator | int = 0) -> L1CvFit:
    """Cross-validated L1 path fit on an augmented design.

    The penalty grid is computed once from the full data and shared by all
    folds; fold membership comes only from ``rng``, never from the data, so
    fits are reproducible and column-swap symmetric. The winning penalty
    minimizes pooled held-out deviance (ties break to the larger penalty).
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n = design.n
    if not 2 <= folds <= n:
        raise DimensionError(f"need 2 <= folds <= n = {n}, got {folds}")
    X, y = design.matrix, design.y
    grid = lambda_grid(X, y, design.family, grid_size)

    fold_ids = np.empty(n, dtype=np.int64)
    fold_ids[rng.permutation(n)] = np.arange(n) % folds
    if design.family == "logistic":
        for f in range(folds):
            tr = y[fold_ids != f]
            if tr.min() == tr.max():
                raise FamilyError(f"fold {f} leaves a single-class training set")

    cv_dev = np.zeros(grid.size)
    for f in range(folds):
        tr = fold_ids != f
        te = ~tr
        betas, b0s, _ = l1_fit(X[tr], y[tr], design.family, grid,
                               kkt_tol=PATH_KKT_TOL, max_outer=MAX_OUTER)
        etas = X[te] @ betas.T + b0s[None, :]
        for li in range(grid.size):
            cv_dev[li] += _deviance(design.family, y[te], etas[:, li])

    # Strict full-data solve at the winning penalty only; the grid fits
    # above run at the looser path tolerance.
    best = int(np.argmin(cv_dev))
    betas, b0s, kkts = l1_fit(X, y, design.family, grid[best : best + 1])
    return L1CvFit(
        beta=betas[0].copy(),
        intercept=float(b0s[0]),
        lambda_cv=float(grid[best]),
        lambda_index=best,
        lambda_grid=grid,
        cv_deviance=cv_dev,
        kkt_violation=float(kkts[0]),
        fold_ids=fold_ids,
    )


# ---------------------------------------------------------------------------
# Contrast statistics and the selection threshold


COMBINERS = ("difference", "signed_max")


@dataclass(frozen=True)
class WStatistics:
    """Per-variable contrasts between original and knockoff coefficients."""

    w: np.ndarray
    combiner: str


def compute_w(beta, combiner: str = "difference") -> WStatistics:
    """Reduce 2p coefficients to p contrast statistics.

    ``difference``: w_j = |beta_j| - |beta_{j+p}|. ``signed_max``:
    w_j = sign(|beta_j| - |beta_{j+p}|) * max of the two magnitudes (ties
    give 0). Both are antisymmetric: swapping a column with its knockoff
    flips the sign of w_j.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size % 2:
        raise DimensionError(f"coefficient vector length {beta.size} is odd")
    if combiner not in COMBINERS:
        raise DimensionError(f"combiner must be one of {COMBINERS}, got '{combiner}'")
    p = beta.size // 2
    a, b = np.abs(beta[:p]), np.abs(beta[p:])
    if combiner == "difference":
        w = a - b
    else:
        w = np.sign(a - b) * np.maximum(a, b)
    return WStatistics(w, combiner)


@dataclass(frozen=True)
class FilterResult:
    """Knockoff threshold and the indices (0-based) it selects."""

    threshold: float
    selected: np.ndarray
    alpha: float
    offset: int


def knockoff_threshold(w, alpha: float, offset: int = 1) -> FilterResult:
    """Data-dependent selection threshold at target FDR level ``alpha``.

    The threshold is the smallest candidate t (a nonzero |w_j|) whose
    estimated false discovery proportion (offset + #{w_j <= -t}) /
    max(1, #{w_j >= t}) is at most alpha; +inf (empty selection) if no
    candidate qualifies. ``offset=1`` gives the variant with a provable
    FDR guarantee; ``offset=0`` the slightly more liberal one.
    """
    if isinstance(w, WStatistics):
        w = w.w
    w = np.asarray(w, dtype=float).ravel()
    if not 0.0 < alpha < 1.0:
        raise DimensionError(f"alpha must lie in (0, 1), got {alpha}")
    if offset not in (0, 1):
        raise DimensionError(f"offset must be 0 or 1, got {offset}")
    threshold = np.inf
    for t in np.unique(np.abs(w[w != 0.0])):
        ratio = (offset + np.count_nonzero(w <= -t)) / max(1, np.count_nonzero(w >= t))
        if ratio <= alpha:
            threshold = float(t)
            break
    selected = np.flatnonzero(w >= threshold)
    return FilterResult(threshold, selected, alpha, offset)


def fdp_power(selected, truth) -> tuple[float, float]:
    """False discovery proportion and power of a selection.

    ``truth`` is the set (or array) of truly relevant indices; power is 0
    by convention when it is empty, likewise FDP when nothing is selected.
    """
    sel = set(int(i) for i in np.asarray(selected).ravel())
    tru = set(int(i) for i in np.asarray(list(truth)).ravel()) if len(truth) else set()
    fdp = len(sel - tru) / max(1, len(sel))
    power = len(sel & tru) / max(1, len(tru))
    return fdp, power

"""L1 path solver, cross-validation, contrast statistics, and the filter."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmmknock import DimensionError, FamilyError
from hmmknock.select import (
    KKT_CERT,
    AugmentedDesign,
    augment_design,
    compute_w,
    fdp_power,
    knockoff_threshold,
    l1_fit,
    l1_fit_cv,
    lambda_grid,
    standardize_columns,
)


def orthonormal_design(n, p, seed):
    """Zero-mean columns with X'X = n I exactly (to rounding)."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, p))
    G -= G.mean(axis=0)
    Q, _ = np.linalg.qr(G)
    return np.sqrt(n) * Q, rng


def logistic_problem(n, p, seed, signal=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    Xk = rng.standard_normal((n, p))
    eta = X[:, :signal].sum(axis=1) if signal else np.zeros(n)
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    return X, Xk, y


# -- standardization and design assembly --------------------------------------


def test_standardize_columns():
    A = np.array([[1.0, 5.0, 2.0], [3.0, 5.0, 4.0], [5.0, 5.0, 0.0]])
    out, const = standardize_columns(A)
    np.testing.assert_array_equal(const, [False, True, False])
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out[:, [0, 2]].std(axis=0), 1.0, atol=1e-12)
    np.testing.assert_array_equal(out[:, 1], 0.0)


def test_augment_design_shapes_and_checks():
    X, Xk, y = logistic_problem(40, 5, 0)
    d = augment_design(X, Xk, y)
    assert d.n == 40 and d.p == 5
    assert d.matrix.shape == (40, 10)
    with pytest.raises(DimensionError):
        augment_design(X, Xk[:, :4], y)
    with pytest.raises(DimensionError):
        augment_design(X, Xk, y[:-1])
    with pytest.raises(FamilyError):
        augment_design(X, Xk, y + 0.5)  # not 0/1
    with pytest.raises(FamilyError):
        augment_design(X, Xk, y, family="poisson")
    # continuous responses are fine for the linear family
    augment_design(X, Xk, np.linspace(-1, 1, 40), family="linear")


# -- penalty grid and path solutions ------------------------------------------


def test_lambda_grid_shape_and_nullity():
    X, Xk, y = logistic_problem(60, 8, 1)
    d = augment_design(X, Xk, y)
    grid = lambda_grid(d.matrix, d.y, d.family, grid_size=25)
    assert grid.shape == (25,)
    assert np.all(np.diff(grid) < 0)
    assert grid[-1] == pytest.approx(grid[0] * 1e-3, rel=1e-9)
    for family in ("logistic", "linear"):
        betas, _, kkts = l1_fit(d.matrix, d.y, family, grid[:1])
        # the argmax coordinate sits exactly on the subgradient boundary,
        # so allow rounding-level mass there
        np.testing.assert_allclose(betas[0], 0.0, atol=1e-12)
        assert kkts[0] <= KKT_CERT


def test_orthonormal_solution_is_soft_thresholding():
    n, p = 200, 12
    X, rng = orthonormal_design(n, p, seed=2)
    beta_true = np.zeros(p)
    beta_true[:4] = [2.0, -1.5, 0.8, 0.3]
    y = X @ beta_true + rng.standard_normal(n)
    c = X.T @ (y - y.mean()) / n
    lams = np.array([0.5, 0.2, 0.05, 0.01])
    betas, intercepts, kkts = l1_fit(X, y, "linear", lams)
    for li, lam in enumerate(lams):
        oracle = np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)
        np.testing.assert_allclose(betas[li], oracle, atol=1e-8)
        assert intercepts[li] == pytest.approx(y.mean(), abs=1e-8)
        assert kkts[li] <= KKT_CERT


def test_single_penalty_accepts_scalar():
    X, rng = orthonormal_design(50, 4, seed=3)
    y = rng.standard_normal(50)
    betas, _, _ = l1_fit(X, y, "linear", 0.3)
    assert betas.shape == (1, 4)


def test_solver_input_validation():
    X, rng = orthonormal_design(30, 3, seed=4)
    with pytest.raises(FamilyError):
        l1_fit(X, np.zeros(30), "logistic", 0.1)  # single class
    with pytest.raises(FamilyError):
        l1_fit(X, rng.standard_normal(30), "logistic", 0.1)  # not binary
    with pytest.raises(DimensionError):
        l1_fit(X, np.zeros(29), "linear", 0.1)
    with pytest.raises(FamilyError):
        l1_fit(X, np.zeros(30), "huber", 0.1)


# -- cross-validated fits -----------------------------------------------------


def cv_fixture(seed=5, signal=4):
    X, Xk, y = logistic_problem(150, 15, seed, signal=signal)
    return augment_design(X, Xk, y)


def test_cv_fit_is_reproducible_and_certified():
    d = cv_fixture()
    a = l1_fit_cv(d, folds=5, grid_size=40, rng=np.random.default_rng(0))
    b = l1_fit_cv(d, folds=5, grid_size=40, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(a.beta, b.beta)
    assert a.lambda_index == b.lambda_index
    np.testing.assert_array_equal(a.fold_ids, b.fold_ids)
    assert a.kkt_violation <= KKT_CERT
    assert a.lambda_cv == a.lambda_grid[a.lambda_index]
    assert a.cv_deviance.shape == a.lambda_grid.shape


def test_cv_fold_validation():
    d = cv_fixture()
    with pytest.raises(DimensionError):
        l1_fit_cv(d, folds=1)
    with pytest.raises(DimensionError):
        l1_fit_cv(d, folds=d.n + 1)


def test_cv_single_class_fold_rejected():
    X, Xk, _ = logistic_problem(12, 3, 6)
    y = np.zeros(12)
    y[0] = 1.0  # leave-one-out style folds strand the lone positive
    d = augment_design(X, Xk, y)
    with pytest.raises(FamilyError):
        l1_fit_cv(d, folds=12, rng=np.random.default_rng(0))


def test_column_swap_flips_contrast_sign():
    # swapping a variable with its knockoff must flip w_j and nothing else;
    # verified at a fixed penalty and through the full CV pipeline
    d = cv_fixture(seed=7)
    j, p = 3, d.p
    swapped_matrix = d.matrix.copy()
    swapped_matrix[:, [j, p + j]] = swapped_matrix[:, [p + j, j]]
    d_swap = AugmentedDesign(swapped_matrix, d.y, d.family, d.const_mask)

    lam = lambda_grid(d.matrix, d.y, d.family, 50)[25]
    beta = l1_fit(d.matrix, d.y, d.family, lam)[0][0]
    beta_swap = l1_fit(swapped_matrix, d.y, d.family, lam)[0][0]
    w = compute_w(beta).w
    w_swap = compute_w(beta_swap).w
    np.testing.assert_allclose(w_swap[j], -w[j], atol=1e-6)
    mask = np.arange(p) != j
    np.testing.assert_allclose(w_swap[mask], w[mask], atol=1e-6)

    fit = l1_fit_cv(d, folds=5, grid_size=40, rng=np.random.default_rng(1))
    fit_swap = l1_fit_cv(d_swap, folds=5, grid_size=40, rng=np.random.default_rng(1))
    assert fit.lambda_index == fit_swap.lambda_index
    np.testing.assert_allclose(compute_w(fit_swap.beta).w[j],
                               -compute_w(fit.beta).w[j], atol=1e-6)


def test_null_data_selects_nothing():
    d = cv_fixture(seed=8, signal=0)
    fit = l1_fit_cv(d, folds=5, grid_size=40, rng=np.random.default_rng(2))
    res = knockoff_threshold(compute_w(fit.beta), alpha=0.1, offset=1)
    assert res.selected.size == 0


# -- contrast statistics ------------------------------------------------------


def test_compute_w_difference():
    w = compute_w([1.0, -3.0, 0.5, 2.0, 1.0, 0.2], combiner="difference")
    np.testing.assert_allclose(w.w, [-1.0, 2.0, 0.3])


def test_compute_w_signed_max():
    w = compute_w([1.0, -3.0, 0.5, 2.0, 1.0, 0.2], combiner="signed_max")
    np.testing.assert_allclose(w.w, [-2.0, 3.0, 0.5])


def test_compute_w_ties_give_zero():
    beta = np.array([1.5, -2.0, 0.0, -1.5, 2.0, 0.0])
    for combiner in ("difference", "signed_max"):
        np.testing.assert_array_equal(compute_w(beta, combiner).w, 0.0)


def test_compute_w_antisymmetry():
    rng = np.random.default_rng(9)
    beta = rng.standard_normal(16)
    swapped = beta.copy()
    swapped[[2, 10]] = swapped[[10, 2]]
    for combiner in ("difference", "signed_max"):
        w = compute_w(beta, combiner).w
        ws = compute_w(swapped, combiner).w
        assert ws[2] == pytest.approx(-w[2])
        np.testing.assert_array_equal(np.delete(ws, 2), np.delete(w, 2))


def test_compute_w_validation():
    with pytest.raises(DimensionError):
        compute_w([1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        compute_w([1.0, 2.0], combiner="mean")


# -- selection threshold ------------------------------------------------------


def test_threshold_example_offset_one():
    res = knockoff_threshold(np.array([3.0, 2.0, 1.0, -1.0]), alpha=0.5, offset=1)
    assert res.threshold == 2.0
    np.testing.assert_array_equal(res.selected, [0, 1])


def test_threshold_example_offset_zero():
    res = knockoff_threshold(np.array([3.0, 2.0, 1.0, -1.0]), alpha=0.5, offset=0)
    assert res.threshold == 1.0
    np.testing.assert_array_equal(res.selected, [0, 1, 2])


def test_threshold_nonpositive_w_selects_nothing():
    res = knockoff_threshold(np.array([-2.0, 0.0, -0.5]), alpha=0.5, offset=1)
    assert res.threshold == np.inf
    assert res.selected.size == 0


def test_threshold_validation():
    with pytest.raises(DimensionError):
        knockoff_threshold(np.ones(3), alpha=0.0)
    with pytest.raises(DimensionError):
        knockoff_threshold(np.ones(3), alpha=0.5, offset=2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40),
       st.floats(0.05, 0.95))
def test_offset_one_selection_is_subset_of_offset_zero(w, alpha):
    w = np.asarray(w)
    strict = set(knockoff_threshold(w, alpha, offset=1).selected)
    liberal = set(knockoff_threshold(w, alpha, offset=0).selected)
    assert strict <= liberal


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=30),
       st.floats(0.05, 0.95))
def test_threshold_achieves_its_estimate(w, alpha):
    w = np.asarray(w)
    for offset in (0, 1):
        res = knockoff_threshold(w, alpha, offset)
        if np.isfinite(res.threshold):
            t = res.threshold
            est = (offset + np.sum(w <= -t)) / max(1, np.sum(w >= t))
            assert est <= alpha
            assert t in set(np.abs(w[w != 0]))


# -- scoring ------------------------------------------------------------------


def test_fdp_power_conventions():
    assert fdp_power([0, 1, 2, 3], [0, 1]) == (0.5, 1.0)
    assert fdp_power([], [0, 1]) == (0.0, 0.0)
    assert fdp_power([5], []) == (1.0, 0.0)
    assert fdp_power([], []) == (0.0, 0.0)
    fdp, power = fdp_power([1, 7], [1, 2, 3, 4])
    assert fdp == 0.5
    assert power == 0.25

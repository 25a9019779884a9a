"""Markov-chain MLE and Baum-Welch EM."""
import numpy as np
import pytest

from helpers import random_chain
from hmmknock import (
    DimensionError,
    DiscreteMarkovChain,
    HiddenMarkovModel,
    SizeError,
    ZeroRowError,
    sample_hmm_rows,
    sample_mc_rows,
)
from hmmknock.estimate import EmConfig, _log_prior, fit_hmm_em, fit_mc_mle
from hmmknock.harness import ToyHmmSpec, build_toy_hmm
from hmmknock.hmm import _forward_rows


def rows_log_likelihood(hmm, X):
    return float(_forward_rows(hmm, np.asarray(X))[1].sum())


# -- chain MLE ----------------------------------------------------------------


def test_mle_matches_hand_counts():
    samples = [[0, 1], [0, 1], [1, 0]]
    fit = fit_mc_mle(samples, K=2, pseudo_count=0.0)
    np.testing.assert_allclose(fit.q1, [2 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(fit.Q[0], [[0, 1], [1, 0]], atol=1e-15)


def test_mle_smoothing_formula():
    samples = [[0, 1], [0, 1], [1, 0]]
    fit = fit_mc_mle(samples, K=2, pseudo_count=1.0)
    # initial counts (2, 1) + 1 over 3 + 2; transition row 0 counts (0, 2) + 1
    np.testing.assert_allclose(fit.q1, [3 / 5, 2 / 5], atol=1e-15)
    np.testing.assert_allclose(fit.Q[0], [[1 / 4, 3 / 4], [2 / 3, 1 / 3]], atol=1e-15)


def test_mle_unvisited_state_needs_smoothing():
    with pytest.raises(ZeroRowError):
        fit_mc_mle([[0, 0], [0, 1]], K=2, pseudo_count=0.0)
    fit = fit_mc_mle([[0, 0], [0, 1]], K=2, pseudo_count=0.5)
    np.testing.assert_allclose(fit.Q[0][1], [0.5, 0.5], atol=1e-15)


def test_mle_validation():
    with pytest.raises(ValueError):
        fit_mc_mle([[0, 1]], K=2, pseudo_count=-1.0)
    with pytest.raises(DimensionError):
        fit_mc_mle(np.zeros((0, 3), dtype=int), K=2)
    with pytest.raises(DimensionError):
        fit_mc_mle([[0, 2]], K=2)  # symbol out of range


def test_mle_is_consistent():
    chain = random_chain(np.random.default_rng(3), p=4, K=3)
    X = sample_mc_rows(chain, 40_000, key=17)
    fit = fit_mc_mle(X, K=3, pseudo_count=0.0)
    assert np.abs(fit.q1 - chain.q1).max() < 0.02
    assert np.abs(fit.Q - chain.Q).max() < 0.02


# -- EM -----------------------------------------------------------------------


def test_log_prior_formula():
    q1 = np.array([0.25, 0.75])
    Q = np.full((1, 2, 2), 0.5)
    f = np.array([[[0.4, 0.6], [0.9, 0.1]]] * 2)
    assert _log_prior(0.0, q1, Q, f) == 0.0
    expected = 2.0 * (np.log(q1).sum() + np.log(Q).sum() + np.log(f).sum())
    assert _log_prior(2.0, q1, Q, f) == pytest.approx(expected, rel=1e-12)


def test_em_recovers_easy_model():
    q1 = np.array([0.5, 0.5])
    Q = np.array([[0.9, 0.1], [0.1, 0.9]])
    f = np.tile(np.array([[0.9, 0.1], [0.1, 0.9]]), (5, 1, 1))
    truth = HiddenMarkovModel(DiscreteMarkovChain.homogeneous(q1, Q, 5), f)
    X, _ = sample_hmm_rows(truth, 3000, key=21)
    cfg = EmConfig(max_iters=200, tol=1e-7, restarts=3, seed=0, pseudo_count=0.1)
    fit = fit_hmm_em(X, K=2, M=2, config=cfg)
    # the in-sample fit should at least match the generating model
    assert rows_log_likelihood(fit, X) >= rows_log_likelihood(truth, X) - 1.0


def test_em_raw_likelihood_monotone_when_unsmoothed():
    truth = build_toy_hmm(ToyHmmSpec(p=6, K=3))
    X, _ = sample_hmm_rows(truth, 400, key=22)
    cfg = EmConfig(max_iters=100, tol=1e-9, restarts=2, seed=1, pseudo_count=0.0)
    _, hist = fit_hmm_em(X, K=3, M=3, config=cfg, return_history=True)
    h = np.array(hist)
    assert h.size >= 2
    slack = 1e-8 * np.maximum(1.0, np.abs(h[:-1]))
    assert np.all(np.diff(h) >= -slack)


def test_em_smoothing_trades_raw_likelihood_for_the_map_objective():
    # with heavy smoothing the M-step maximizes likelihood-plus-prior, so
    # the raw likelihood is allowed to decrease between iterations; the fit
    # must complete without tripping its internal monotonicity check
    truth = build_toy_hmm(ToyHmmSpec(p=40, K=9))
    X, _ = sample_hmm_rows(truth, 150, key=(99, 0))
    cfg = EmConfig(max_iters=50, tol=1e-5, restarts=1, seed=0, pseudo_count=1.0)
    fit, hist = fit_hmm_em(X, K=9, M=9, config=cfg, return_history=True)
    h = np.array(hist)
    assert np.all(np.isfinite(h))
    assert np.diff(h).min() < -1.0, "expected a visible raw-likelihood dip"
    assert fit.K == 9 and fit.M == 9 and fit.p == 40


def test_em_tied_fit_shares_blocks():
    truth = build_toy_hmm(ToyHmmSpec(p=5, K=3))
    X, _ = sample_hmm_rows(truth, 300, key=23)
    cfg = EmConfig(max_iters=40, tol=1e-6, restarts=1, seed=0)
    fit = fit_hmm_em(X, K=3, M=3, config=cfg, tie_across_sites=True)
    for j in range(1, 4):
        np.testing.assert_array_equal(fit.latent.Q[j], fit.latent.Q[0])
    for j in range(1, 5):
        np.testing.assert_array_equal(fit.f[j], fit.f[0])


def test_em_fit_is_reproducible():
    truth = build_toy_hmm(ToyHmmSpec(p=4, K=3))
    X, _ = sample_hmm_rows(truth, 200, key=24)
    cfg = EmConfig(max_iters=20, tol=1e-6, restarts=2, seed=7)
    a = fit_hmm_em(X, K=3, M=3, config=cfg)
    b = fit_hmm_em(X, K=3, M=3, config=cfg)
    np.testing.assert_array_equal(a.latent.q1, b.latent.q1)
    np.testing.assert_array_equal(a.latent.Q, b.latent.Q)
    np.testing.assert_array_equal(a.f, b.f)


def test_em_validation():
    with pytest.raises(DimensionError):
        fit_hmm_em([[0, 1]], K=0, M=2)
    with pytest.raises(DimensionError):
        fit_hmm_em(np.zeros((0, 3), dtype=int), K=2, M=2)
    with pytest.raises(DimensionError):
        fit_hmm_em([[0, 5]], K=2, M=2)  # symbol outside the alphabet
    with pytest.raises(SizeError):
        fit_hmm_em([[0, 1]], K=2000, M=501)
    with pytest.raises(ValueError):
        EmConfig(max_iters=0)
    with pytest.raises(ValueError):
        EmConfig(pseudo_count=-0.5)

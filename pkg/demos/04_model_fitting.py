"""Estimating the generating model from data alone.

In practice the chain or HMM behind the covariates is unknown and must be
fit before knockoffs can be generated. Chains have a closed-form smoothed
maximum-likelihood estimate from transition counts; HMMs are fit with a
penalized Baum-Welch EM from random restarts.
"""
import numpy as np

from hmmknock import (
    EmConfig,
    build_toy_hmm,
    build_toy_mc,
    fit_hmm_em,
    fit_mc_mle,
    forward_pass,
    sample_hmm_rows,
    sample_mc_rows,
    ToyHmmSpec,
    ToyMcSpec,
)


def mean_ll(hmm, X):
    return np.mean([forward_pass(hmm, x).log_likelihood for x in X])


# 1. Markov chain: count-based estimate converges as n grows
truth = build_toy_mc(ToyMcSpec(p=10, K=4, seed=0))
for n in (100, 1000, 10_000):
    X = sample_mc_rows(truth, n, key=(0, n))
    fit = fit_mc_mle(X, K=4, pseudo_count=0.5)
    err = max(np.abs(fit.q1 - truth.q1).max(), np.abs(fit.Q - truth.Q).max())
    print("chain fit, n=%6d: max |param error| = %.4f" % (n, err))

# 2. HMM: EM from restarts, judged by held-out likelihood (latent labels
#    are only identified up to permutation, so parameters are not compared
#    directly)
truth_hmm = build_toy_hmm(ToyHmmSpec(p=12, K=3, seed=1))
Xtr, _ = sample_hmm_rows(truth_hmm, 600, key=1)
Xte, _ = sample_hmm_rows(truth_hmm, 600, key=2)
fit = fit_hmm_em(Xtr, K=3, M=truth_hmm.M,
                 config=EmConfig(max_iters=60, tol=1e-5, restarts=3, seed=0))
print("\nHMM fit: held-out mean log-likelihood")
print("  truth : %.4f" % mean_ll(truth_hmm, Xte))
print("  fitted: %.4f" % mean_ll(fit, Xte))

# 3. tying one transition/emission block across sites cuts parameters
#    sharply when the process is site-homogeneous
tied = fit_hmm_em(Xtr, K=3, M=truth_hmm.M, tie_across_sites=True,
                  config=EmConfig(max_iters=60, tol=1e-5, restarts=3, seed=0))
print("  tied  : %.4f  (single shared transition and emission table)"
      % mean_ll(tied, Xte))

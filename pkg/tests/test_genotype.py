"""Haplotype mosaic model and its compilation to a genotype HMM."""
import itertools

import numpy as np
import pytest

from helpers import all_sequences
from hmmknock import (
    DimensionError,
    HaplotypeModel,
    compile_genotype_hmm,
    compile_haplotype_hmm,
    forward_pass,
    haplotype_transition,
    index_pair,
    n_pair_states,
    pair_index,
)
from hmmknock.genotype import THETA_CLAMP


def toy_hap(p=3, K=2, seed=0):
    rng = np.random.default_rng(seed)
    r = np.concatenate([[0.0], rng.uniform(0.1, 2.0, p - 1)])
    a = rng.dirichlet(np.ones(K) * 5.0, size=p)
    theta = rng.uniform(0.05, 0.95, (p, K))
    return HaplotypeModel(r, a, theta)


def test_pair_state_count():
    assert [n_pair_states(K) for K in range(1, 6)] == [1, 3, 6, 10, 15]


@pytest.mark.parametrize("K", range(1, 13))
def test_pair_index_round_trip(K):
    seen = set()
    for ka in range(K):
        for kb in range(ka, K):
            idx = pair_index(ka, kb, K)
            assert index_pair(idx, K) == (ka, kb)
            seen.add(idx)
    assert seen == set(range(n_pair_states(K)))


def test_pair_index_enumeration_order():
    # row-major over the upper triangle
    assert [index_pair(i, 3) for i in range(6)] == [
        (0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)
    ]


def test_pair_index_validation():
    with pytest.raises(DimensionError):
        pair_index(1, 0, 2)  # ka > kb
    with pytest.raises(DimensionError):
        pair_index(0, 2, 2)  # kb >= K
    with pytest.raises(DimensionError):
        index_pair(3, 2)


def test_model_validation():
    with pytest.raises(DimensionError):
        HaplotypeModel(np.zeros(3), np.full((2, 2), 0.5), np.full((3, 2), 0.5))
    with pytest.raises(ValueError):
        HaplotypeModel([0.0, -1.0], np.full((2, 2), 0.5), np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        HaplotypeModel(np.zeros(2), np.full((2, 2), 0.4), np.full((2, 2), 0.5))


def test_theta_is_clamped_away_from_degeneracy():
    m = HaplotypeModel(np.zeros(1), [[0.5, 0.5]], [[0.0, 1.0]])
    assert m.theta.min() == THETA_CLAMP
    assert m.theta.max() == 1.0 - THETA_CLAMP


def test_haplotype_transition_mixes_survival_and_redraw():
    m = toy_hap(p=2, K=3, seed=1)
    Q = haplotype_transition(m, 2)
    stay = np.exp(-m.r[1])
    np.testing.assert_allclose(Q, stay * np.eye(3) + (1 - stay) * m.a[1], atol=1e-15)
    np.testing.assert_allclose(Q.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(DimensionError):
        haplotype_transition(m, 1)  # the first site has no incoming transition


def test_initial_pair_distribution_example():
    # two haplotypes drawn independently from motif weights (0.3, 0.7):
    # P{0,0} = 0.09, P{0,1} = 2 * 0.21 = 0.42, P{1,1} = 0.49
    m = HaplotypeModel(np.zeros(2), np.array([[0.3, 0.7]] * 2),
                       np.full((2, 2), 0.5))
    geno = compile_genotype_hmm(m)
    np.testing.assert_allclose(geno.latent.q1, [0.09, 0.42, 0.49], atol=1e-15)
    assert geno.K == 3
    assert geno.M == 3


def test_compiled_models_are_stochastic():
    for K in range(1, 13):
        m = toy_hap(p=4, K=K, seed=K)
        geno = compile_genotype_hmm(m)
        assert geno.K == n_pair_states(K)
        np.testing.assert_allclose(geno.latent.q1.sum(), 1.0, atol=1e-9)
        np.testing.assert_allclose(geno.latent.Q.sum(axis=2), 1.0, atol=1e-9)
        np.testing.assert_allclose(geno.f.sum(axis=2), 1.0, atol=1e-9)


@pytest.mark.parametrize("p,K,seed", [(1, 2, 0), (2, 3, 1), (3, 2, 2), (3, 4, 3)])
def test_genotype_law_is_haplotype_convolution(p, K, seed):
    # dosage sequence likelihood must equal the sum over all ordered pairs
    # of haplotypes adding up to it
    m = toy_hap(p=p, K=K, seed=seed)
    hap = compile_haplotype_hmm(m)
    geno = compile_genotype_hmm(m)

    hap_prob = {h: np.exp(forward_pass(hap, h).log_likelihood)
                for h in all_sequences(2, p)}
    for g in all_sequences(3, p):
        conv = sum(
            hap_prob[h1] * hap_prob[h2]
            for h1, h2 in itertools.product(hap_prob, repeat=2)
            if all(a + b == c for a, b, c in zip(h1, h2, g))
        )
        direct = np.exp(forward_pass(geno, np.array(g)).log_likelihood)
        assert abs(direct - conv) <= 1e-10


def test_alpha_constant_flag_uniformizes_weights():
    m = toy_hap(p=3, K=3, seed=5)
    hap = compile_haplotype_hmm(m, alpha_constant_per_site=True)
    np.testing.assert_allclose(hap.latent.q1, np.full(3, 1 / 3), atol=1e-15)
    geno = compile_genotype_hmm(m, alpha_constant_per_site=True)
    # pair weights from uniform motif weights: 1/9 on diagonal, 2/9 off
    expected = np.array([1 / 9 if a == b else 2 / 9
                         for a in range(3) for b in range(a, 3)])
    np.testing.assert_allclose(geno.latent.q1, expected, atol=1e-15)
    # emissions are untouched by the flag
    np.testing.assert_allclose(geno.f, compile_genotype_hmm(m).f, atol=1e-15)


def test_forward_pass_runs_on_impossible_free_model():
    # clamped emissions mean no dosage sequence is ever impossible
    m = toy_hap(p=3, K=2, seed=7)
    geno = compile_genotype_hmm(m)
    for g in all_sequences(3, 3):
        ll = forward_pass(geno, np.array(g)).log_likelihood
        assert np.isfinite(ll)

"""Markov-chain model, sampling, and exact knockoff construction."""
import numpy as np
import pytest

from helpers import (
    all_sequences,
    chain_prob,
    empirical_table,
    mc_table,
    nonempty_subsets,
    random_chain,
    tv_distance,
)
from hmmknock import (
    DimensionError,
    DiscreteMarkovChain,
    ImpossibleEvidenceError,
    SizeError,
    exact_joint_pmf,
    knockoff_step,
    mc_log_pmf,
    sample_mc,
    sample_mc_knockoff,
    sample_mc_knockoff_rows,
    sample_mc_rows,
    substream,
    swapped_joint,
)


def test_chain_shape_and_properties():
    chain = random_chain(np.random.default_rng(0), p=4, K=3)
    assert chain.K == 3
    assert chain.p == 4
    assert chain.Q.shape == (3, 3, 3)


def test_length_one_chain():
    chain = DiscreteMarkovChain([0.25, 0.75], np.zeros((0, 2, 2)))
    assert chain.p == 1
    assert mc_log_pmf(chain, [1]) == pytest.approx(np.log(0.75))


def test_homogeneous_constructor_tiles_transition():
    Q = np.array([[0.9, 0.1], [0.2, 0.8]])
    chain = DiscreteMarkovChain.homogeneous([0.5, 0.5], Q, p=5)
    assert chain.p == 5
    for j in range(4):
        np.testing.assert_array_equal(chain.Q[j], Q)


@pytest.mark.parametrize(
    "q1, Q",
    [
        ([0.6, 0.5], np.full((1, 2, 2), 0.5)),          # q1 not a distribution
        ([0.5, 0.5], np.full((1, 2, 2), 0.3)),          # rows sum to 0.6
        ([0.5, 0.5], np.full((1, 3, 3), 1 / 3)),        # K mismatch
        ([-0.2, 1.2], np.full((1, 2, 2), 0.5)),         # negative mass
    ],
)
def test_invalid_chain_rejected(q1, Q):
    with pytest.raises((DimensionError, ValueError)):
        DiscreteMarkovChain(q1, Q)


@pytest.mark.parametrize("seed,p,K", [(0, 3, 2), (1, 4, 3), (2, 2, 4), (3, 5, 2)])
def test_log_pmf_matches_factor_product(seed, p, K):
    chain = random_chain(np.random.default_rng(seed), p, K)
    rng = np.random.default_rng(seed + 100)
    for _ in range(20):
        x = rng.integers(0, K, size=p)
        assert mc_log_pmf(chain, x) == pytest.approx(np.log(chain_prob(chain, x)), abs=1e-12)


def test_log_pmf_of_zero_probability_sequence():
    chain = DiscreteMarkovChain([1.0, 0.0], np.full((1, 2, 2), 0.5))
    assert mc_log_pmf(chain, [1, 0]) == -np.inf


def test_sampler_matches_law():
    chain = random_chain(np.random.default_rng(5), p=3, K=3)
    X = sample_mc_rows(chain, 60_000, key=7)
    assert tv_distance(empirical_table(X, [3, 3, 3]), mc_table(chain)) < 0.02


def test_row_sampler_replays_single_draws():
    chain = random_chain(np.random.default_rng(6), p=4, K=3)
    X = sample_mc_rows(chain, 50, key=(9, 1))
    for i in range(50):
        np.testing.assert_array_equal(X[i], sample_mc(chain, substream((9, 1), i)))


# -- knockoff conditional step ------------------------------------------------


def test_step_vectors_are_distributions():
    chain = random_chain(np.random.default_rng(10), p=5, K=4)
    x = sample_mc(chain, np.random.default_rng(0))
    xt_prev, norm = None, None
    for j in range(1, 6):
        v, norm = knockoff_step(chain, j, x, xt_prev, norm)
        assert v.shape == (4,)
        assert np.all(v >= 0)
        assert v.sum() == pytest.approx(1.0, abs=1e-12)
        xt_prev = int(np.argmax(v))


def test_step_index_validation():
    chain = random_chain(np.random.default_rng(11), p=3, K=2)
    with pytest.raises(DimensionError):
        knockoff_step(chain, 0, [0, 0, 0])
    with pytest.raises(DimensionError):
        knockoff_step(chain, 4, [0, 0, 0])
    with pytest.raises(DimensionError):
        # j=2 requires the state and table from step 1
        knockoff_step(chain, 2, [0, 0, 0])


def test_impossible_evidence_raises():
    # the chain always moves 0 -> 1, so symbol 0 can never appear second
    chain = DiscreteMarkovChain([1.0, 0.0], [[[0.0, 1.0], [0.5, 0.5]]])
    with pytest.raises(ImpossibleEvidenceError):
        knockoff_step(chain, 1, [0, 0])
    with pytest.raises(ImpossibleEvidenceError):
        sample_mc_knockoff_rows(chain, [[0, 1], [0, 0]], key=0)


def test_deterministic_chain_copies_itself():
    # cyclic permutation chain: every conditional is a point mass, so the
    # knockoff must reproduce the original sequence exactly
    K = 3
    Q = np.roll(np.eye(K), 1, axis=1)
    chain = DiscreteMarkovChain.homogeneous(np.eye(K)[0], Q, p=6)
    x = sample_mc(chain, np.random.default_rng(0))
    for seed in range(5):
        xt = sample_mc_knockoff(chain, x, np.random.default_rng(seed))
        np.testing.assert_array_equal(xt, x)


# -- exact joint law ----------------------------------------------------------


@pytest.mark.parametrize("seed,p,K", [(0, 3, 2), (1, 3, 3), (2, 4, 2), (3, 2, 3)])
def test_joint_marginal_recovers_chain_law(seed, p, K):
    chain = random_chain(np.random.default_rng(seed), p, K)
    table = exact_joint_pmf(chain)
    assert table.shape == (K,) * (2 * p)
    assert table.sum() == pytest.approx(1.0, abs=1e-12)
    marginal = table.sum(axis=tuple(range(p, 2 * p)))
    np.testing.assert_allclose(marginal, mc_table(chain), atol=1e-12)


@pytest.mark.parametrize("seed,p,K", [(4, 3, 2), (5, 3, 3), (6, 4, 2)])
def test_joint_invariant_under_every_swap(seed, p, K):
    chain = random_chain(np.random.default_rng(seed), p, K)
    table = exact_joint_pmf(chain)
    for S in nonempty_subsets(p):
        dev = np.abs(swapped_joint(table, S) - table).max()
        assert dev <= 1e-12, f"swap {S} deviates by {dev}"


def test_swapped_joint_validates_indices():
    chain = random_chain(np.random.default_rng(7), p=3, K=2)
    table = exact_joint_pmf(chain)
    with pytest.raises(DimensionError):
        swapped_joint(table, [3])
    with pytest.raises(DimensionError):
        swapped_joint(table[0], [0])  # odd number of axes


def test_joint_agrees_with_sampler():
    chain = random_chain(np.random.default_rng(8), p=3, K=2)
    X = sample_mc_rows(chain, 100_000, key=3)
    Xt = sample_mc_knockoff_rows(chain, X, key=4)
    emp = empirical_table(np.hstack([X, Xt]), [2] * 6)
    assert tv_distance(emp, exact_joint_pmf(chain)) < 0.02


def test_enumeration_guard():
    chain = random_chain(np.random.default_rng(9), p=4, K=10)
    with pytest.raises(SizeError):
        exact_joint_pmf(chain)


# -- batched knockoffs --------------------------------------------------------


def test_batch_knockoffs_replay_single_draws():
    chain = random_chain(np.random.default_rng(12), p=5, K=3)
    X = sample_mc_rows(chain, 40, key=(2, 0))
    Xt = sample_mc_knockoff_rows(chain, X, key=(2, 1))
    for i in range(40):
        single = sample_mc_knockoff(chain, X[i], substream((2, 1), i))
        np.testing.assert_array_equal(Xt[i], single)


def test_batch_knockoffs_validate_rows():
    chain = random_chain(np.random.default_rng(13), p=3, K=2)
    with pytest.raises(DimensionError):
        sample_mc_knockoff_rows(chain, [[0, 1]], key=0)  # wrong length
    with pytest.raises(DimensionError):
        sample_mc_knockoff_rows(chain, [[0, 1, 2]], key=0)  # symbol out of range


def test_knockoff_preserves_marginal_law():
    chain = random_chain(np.random.default_rng(14), p=3, K=3)
    X = sample_mc_rows(chain, 60_000, key=11)
    Xt = sample_mc_knockoff_rows(chain, X, key=12)
    assert tv_distance(empirical_table(Xt, [3, 3, 3]), mc_table(chain)) < 0.02

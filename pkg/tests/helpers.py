"""Shared brute-force oracles for the test suite.

Everything here is written independently of the library internals: joint
laws are built by explicit enumeration over all sequences, so agreement
between these tables and the library is evidence, not tautology.
"""
import itertools

import numpy as np

from hmmknock import DiscreteMarkovChain, HiddenMarkovModel


def all_sequences(K, p):
    return itertools.product(range(K), repeat=p)


def chain_prob(chain, x):
    """P(x) as an explicit product of the chain factors."""
    prob = chain.q1[x[0]]
    for j in range(1, len(x)):
        prob *= chain.Q[j - 1][x[j - 1], x[j]]
    return prob


def mc_table(chain):
    """Brute-force p-dimensional law of the chain."""
    K, p = chain.K, chain.p
    table = np.zeros((K,) * p)
    for x in all_sequences(K, p):
        table[x] = chain_prob(chain, x)
    return table


def hmm_seq_prob(hmm, x):
    """P(x) as an explicit sum over every latent path."""
    total = 0.0
    for z in all_sequences(hmm.K, hmm.p):
        prob = chain_prob(hmm.latent, z)
        for j in range(hmm.p):
            prob *= hmm.f[j][z[j], x[j]]
        total += prob
    return total


def hmm_x_table(hmm):
    """Brute-force p-dimensional law of the observed sequence."""
    M, p = hmm.M, hmm.p
    table = np.zeros((M,) * p)
    for x in all_sequences(M, p):
        table[x] = hmm_seq_prob(hmm, x)
    return table


def hmm_posterior_table(hmm, x):
    """Brute-force posterior over latent paths given the observed x."""
    K, p = hmm.K, hmm.p
    table = np.zeros((K,) * p)
    for z in all_sequences(K, p):
        prob = chain_prob(hmm.latent, z)
        for j in range(p):
            prob *= hmm.f[j][z[j], x[j]]
        table[z] = prob
    return table / table.sum()


def random_chain(rng, p, K, floor=0.05):
    """Random inhomogeneous chain with all entries bounded away from 0."""
    q1 = rng.random(K) + floor
    q1 /= q1.sum()
    Q = rng.random((p - 1, K, K)) + floor
    Q /= Q.sum(axis=2, keepdims=True)
    return DiscreteMarkovChain(q1, Q)


def random_hmm(rng, p, K, M, floor=0.05):
    f = rng.random((p, K, M)) + floor
    f /= f.sum(axis=2, keepdims=True)
    return HiddenMarkovModel(random_chain(rng, p, K, floor), f)


def nonempty_subsets(p):
    for size in range(1, p + 1):
        yield from itertools.combinations(range(p), size)


def tv_distance(a, b):
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def empirical_table(rows, sizes):
    """Frequency table of integer rows over a product alphabet."""
    rows = np.asarray(rows)
    table = np.zeros(tuple(sizes))
    np.add.at(table, tuple(rows.T), 1.0)
    return table / rows.shape[0]

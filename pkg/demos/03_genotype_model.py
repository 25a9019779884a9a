"""From a haplotype mosaic model to a genotype HMM.

SNP genotypes are modeled as the sum of two independent haplotypes, each a
mosaic of K founder motifs. The pair of founder indices at a site is an
ordered-pair-collapsed state (K(K+1)/2 of them), and the emission at each
site is the dosage 0/1/2. Compiling this once yields an ordinary HMM that
all the chain and knockoff machinery accepts unchanged.
"""
import itertools

import numpy as np

from hmmknock import (
    build_toy_haplotype,
    compile_genotype_hmm,
    compile_haplotype_hmm,
    forward_pass,
    index_pair,
    n_pair_states,
    sample_hmm_knockoff_rows,
    sample_hmm_rows,
)

hap = build_toy_haplotype(p=4, K=3, seed=11)
print("haplotype model: p=%d sites, K=%d founder motifs" % (hap.p, hap.K))
print("recombination rates r:", np.round(hap.r, 3))

geno = compile_genotype_hmm(hap)
print("\ncompiled genotype HMM: K_eff=%d pair states (K(K+1)/2 = %d), M=%d dosages"
      % (geno.K, n_pair_states(hap.K), geno.M))
print("pair state order:", [index_pair(i, hap.K) for i in range(geno.K)])

# dosage law = convolution of two independent haplotype laws, exactly
single = compile_haplotype_hmm(hap)
hseqs = list(itertools.product((0, 1), repeat=hap.p))
hprob = {h: np.exp(forward_pass(single, np.array(h)).log_likelihood)
         for h in hseqs}
worst = 0.0
for g in itertools.product((0, 1, 2), repeat=hap.p):
    conv = sum(hprob[h1] * hprob[h2] for h1 in hseqs for h2 in hseqs
               if all(a + b == c for a, b, c in zip(h1, h2, g)))
    direct = np.exp(forward_pass(geno, np.array(g)).log_likelihood)
    worst = max(worst, abs(direct - conv))
print("\nconvolution identity over all %d dosage sequences: max dev %.3g"
      % (3**hap.p, worst))

# knockoffs of genotype rows need nothing genotype-specific
G, _ = sample_hmm_rows(geno, 5, key=0)
Gt, _, _ = sample_hmm_knockoff_rows(geno, G, key=1)
print("\ngenotype rows -> knockoffs:")
for g, gt in zip(G, Gt):
    print("  %s -> %s" % ("".join(map(str, g)), "".join(map(str, gt))))

"""Pruning highly correlated columns before selection.

Near-duplicate variables (adjacent SNPs in strong LD, say) make individual
selections ambiguous. Single-linkage clustering on 1 - |correlation| groups
columns whose absolute correlation exceeds a cutoff; one representative per
cluster is kept, chosen by the strongest marginal association measured on a
held-out row split so the choice does not bias the main analysis.
"""
import numpy as np

from hmmknock import cluster_prune

rng = np.random.default_rng(2)
n = 800
base = rng.standard_normal(n)

# columns 0-2 are jittered copies of one signal; 3-4 are a second pair;
# 5 is independent; 6 is constant (degenerate, always its own cluster)
cols = [
    base + 0.3 * rng.standard_normal(n),
    base + 0.3 * rng.standard_normal(n),
    base + 0.4 * rng.standard_normal(n),
    None, None,
    rng.standard_normal(n),
    np.full(n, 1.7),
]
second = rng.standard_normal(n)
cols[3] = second + 0.35 * rng.standard_normal(n)
cols[4] = second + 0.35 * rng.standard_normal(n)
X = np.column_stack(cols)
y = (base + 0.5 * rng.standard_normal(n) > 0).astype(float)

res = cluster_prune(X, y, cutoff=0.5, holdout_frac=0.25,
                    rng=np.random.default_rng(0))

print("columns: 3 copies of signal A, 2 copies of B, 1 independent, 1 constant")
print("cluster ids:", res.cluster_ids)
print("representatives kept:", sorted(int(j) for j in res.representatives))
print("holdout rows: %d of %d (representatives scored there only)"
      % (len(res.holdout_rows), n))

corr = np.corrcoef(X[:, :6].T)
print("\n|correlation| within the first six columns:")
print(np.round(np.abs(corr), 2))

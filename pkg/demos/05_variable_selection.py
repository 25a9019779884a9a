"""The knockoff filter end to end on one dataset.

Pipeline: sample covariate rows from a chain, generate knockoff copies,
encode both as binary indicators, run a cross-validated L1 logistic fit on
the augmented design, form a contrast statistic per variable, and threshold
it at the level that caps the estimated false discovery proportion.
"""
import numpy as np

from hmmknock import (
    augment_design,
    build_toy_mc,
    compute_w,
    encode_design,
    fdp_power,
    knockoff_threshold,
    l1_fit_cv,
    make_response_spec,
    sample_mc_knockoff_rows,
    sample_mc_rows,
    sample_response,
    state_labels,
    ToyMcSpec,
)

n, p, K, s = 400, 40, 3, 8
chain = build_toy_mc(ToyMcSpec(p=p, K=K, seed=5))
rng = np.random.default_rng(5)

X = sample_mc_rows(chain, n, key=0)
Xt = sample_mc_knockoff_rows(chain, X, key=1)

# states enter the regression as centered numeric labels
labels = state_labels(K)
E, Et = encode_design(X, labels), encode_design(Xt, labels)

spec = make_response_spec(p, s, amplitude=12.0, n=n, rng=rng)
y = sample_response(E, spec, rng)
print("n=%d rows, p=%d variables, %d truly active: %s"
      % (n, p, s, sorted(int(j) for j in spec.truth)))

design = augment_design(E, Et, y)
fit = l1_fit_cv(design, folds=10, grid_size=60, rng=np.random.default_rng(0))
print("CV picked lambda=%.4g (index %d of %d), KKT violation %.2g"
      % (fit.lambda_cv, fit.lambda_index, len(fit.lambda_grid),
         fit.kkt_violation))

w = compute_w(fit.beta, combiner="difference")
res = knockoff_threshold(w.w, alpha=0.2, offset=1)
fdp, power = fdp_power(res.selected, spec.truth)
print("\nthreshold %.4f at target FDR 0.2" % res.threshold)
print("selected: %s" % sorted(int(j) for j in res.selected))
print("fdp=%.3f  power=%.3f" % (fdp, power))

print("\nlargest |w| per variable (+ marks truth, * marks selected):")
order = np.argsort(-np.abs(w.w))[:12]
for j in order:
    print("  j=%-3d w=%+.4f %s%s" % (j, w.w[j],
                                     "+" if j in spec.truth else " ",
                                     "*" if j in res.selected else ""))

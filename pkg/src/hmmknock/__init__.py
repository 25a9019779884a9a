"""Exact knockoff copies of Markov chains and hidden Markov models,
with an FDR-controlled variable selection filter on top.

The package splits into thin layers:

``markov``    discrete chains: sampling, exact knockoffs, enumeration oracles
``hmm``       HMMs: forward pass, posterior sampling, knockoffs, oracles
``genotype``  haplotype mosaic models compiled down to HMMs (SNP dosage data)
``estimate``  Markov-chain MLE and Baum-Welch EM
``select``    L1 path solver with CV, importance statistics, the filter
``harness``   toy models, synthetic responses, replicated experiments
``io``        params-file and TSV formats
``cli``       the ``hmmknock`` executable

All in-memory indices are 0-based; file formats number positions from 1.
"""

__version__ = "0.1.0"

from .errors import (
    DimensionError,
    FamilyError,
    ImpossibleEvidenceError,
    KnockoffError,
    ParseError,
    SizeError,
    ZeroRowError,
)
from ._rng import derive_seed, row_uniforms, substream
from .markov import (
    DiscreteMarkovChain,
    exact_joint_pmf,
    knockoff_step,
    mc_log_pmf,
    sample_mc,
    sample_mc_knockoff,
    sample_mc_knockoff_rows,
    sample_mc_rows,
    swapped_joint,
)
from .hmm import (
    ForwardState,
    HiddenMarkovModel,
    HmmKnockoffResult,
    backward_sample,
    exact_hmm_joint,
    forward_pass,
    sample_hmm,
    sample_hmm_knockoff,
    sample_hmm_knockoff_rows,
    sample_hmm_rows,
    swapped_hmm_joint,
)
from .genotype import (
    HaplotypeModel,
    compile_genotype_hmm,
    compile_haplotype_hmm,
    haplotype_transition,
    index_pair,
    n_pair_states,
    pair_index,
)
from .estimate import EmConfig, fit_hmm_em, fit_mc_mle
from .select import (
    AugmentedDesign,
    FilterResult,
    L1CvFit,
    WStatistics,
    augment_design,
    compute_w,
    fdp_power,
    knockoff_threshold,
    l1_fit,
    l1_fit_cv,
    lambda_grid,
    standardize_columns,
)
from .harness import (
    PruneResult,
    ReplicateRecord,
    ResponseSpec,
    SummaryRow,
    ToyHmmSpec,
    ToyMcSpec,
    build_toy_haplotype,
    build_toy_hmm,
    build_toy_mc,
    cluster_prune,
    encode_design,
    make_response_spec,
    recycle_holdout_knockoffs,
    run_experiment,
    run_replicate,
    sample_response,
    state_labels,
    summarize,
)
from .io import (
    read_geno_params,
    read_hmm_params,
    read_mc_params,
    read_tsv_matrix,
    sniff_params,
    write_geno_params,
    write_hmm_params,
    write_mc_params,
    write_tsv_matrix,
)

__all__ = [
    "__version__",
    # errors
    "KnockoffError", "DimensionError", "ImpossibleEvidenceError", "SizeError",
    "ZeroRowError", "FamilyError", "ParseError",
    # seeding protocol
    "substream", "derive_seed", "row_uniforms",
    # markov
    "DiscreteMarkovChain", "mc_log_pmf", "sample_mc", "sample_mc_rows",
    "knockoff_step", "sample_mc_knockoff", "sample_mc_knockoff_rows",
    "exact_joint_pmf", "swapped_joint",
    # hmm
    "HiddenMarkovModel", "ForwardState", "HmmKnockoffResult", "forward_pass",
    "backward_sample", "sample_hmm", "sample_hmm_rows", "sample_hmm_knockoff",
    "sample_hmm_knockoff_rows", "exact_hmm_joint", "swapped_hmm_joint",
    # genotype
    "HaplotypeModel", "n_pair_states", "pair_index", "index_pair",
    "haplotype_transition", "compile_haplotype_hmm", "compile_genotype_hmm",
    # estimate
    "EmConfig", "fit_mc_mle", "fit_hmm_em",
    # select
    "standardize_columns", "AugmentedDesign", "augment_design", "lambda_grid",
    "l1_fit", "L1CvFit", "l1_fit_cv", "WStatistics", "compute_w",
    "FilterResult", "knockoff_threshold", "fdp_power",
    # harness
    "ToyMcSpec", "ToyHmmSpec", "ResponseSpec", "ReplicateRecord", "SummaryRow",
    "PruneResult", "state_labels", "build_toy_mc", "build_toy_hmm",
    "build_toy_haplotype", "make_response_spec", "encode_design",
    "sample_response", "run_replicate", "run_experiment", "summarize",
    "cluster_prune", "recycle_holdout_knockoffs",
    # io
    "read_mc_params", "write_mc_params", "read_hmm_params", "write_hmm_params",
    "read_geno_params", "write_geno_params", "sniff_params", "read_tsv_matrix",
    "write_tsv_matrix",
]

"""Command-line entry point: ``hmmknock <subcommand>``.

Subcommands
    fit-mc        maximum-likelihood Markov chain from integer rows
    fit-hmm       Baum-Welch HMM fit
    compile-geno  mosaic params -> genotype (or haplotype) HMM params
    knockoff      knockoff copies of a data matrix under a params file
    filter        FDR-controlled variable selection from design + knockoffs
    simulate      replicated synthetic-data experiments, CSV (+ SVG) output
    audit         exact exchangeability check of a small params file

Exit codes: 0 success, 1 usage error, 2 data/model error (including a failed
audit). Every output file starts with a comment header recording the package
version, the subcommand, the full argument list, the seed and a timestamp;
reruns with the same seed and thread count are byte-identical outside the
timestamp line and measured wall times. ``KNOCKOFF_THREADS`` overrides
``--threads``.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from ._rng import row_uniforms, substream
from .errors import DimensionError, KnockoffError, ParseError
from .estimate import EmConfig, fit_hmm_em, fit_mc_mle
from .genotype import compile_genotype_hmm, compile_haplotype_hmm
from .harness import (
    ToyHmmSpec,
    ToyMcSpec,
    build_toy_haplotype,
    build_toy_hmm,
    build_toy_mc,
    run_experiment,
    summarize,
)
from .hmm import (
    HiddenMarkovModel,
    _hmm_knockoff_rows_given_uniforms,
    exact_hmm_joint,
    swapped_hmm_joint,
)
from .io import (
    REAL_FMT,
    read_geno_params,
    read_hmm_params,
    read_mc_params,
    read_tsv_matrix,
    sniff_params,
    write_hmm_params,
    write_mc_params,
    write_tsv_matrix,
)
from .markov import (
    _knockoff_rows_given_uniforms,
    exact_joint_pmf,
    swapped_joint,
)
from .select import augment_design, compute_w, knockoff_threshold, l1_fit_cv

THREAD_CHUNK = 512  # rows per worker task; never affects results


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here is exit 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _header(subcommand: str, argv: list[str], seed) -> list[str]:
    return [
        f"hmmknock {__version__}",
        f"subcommand: {subcommand}",
        "args: " + " ".join(argv),
        f"seed: {seed}",
        "timestamp: " + datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    ]


def _read_params(path):
    magic = sniff_params(path)
    readers = {"MCPARAMS": ("mc", read_mc_params),
               "HMMPARAMS": ("hmm", read_hmm_params),
               "GENOPARAMS": ("geno", read_geno_params)}
    if magic not in readers:
        raise ParseError(f"unknown params format {magic!r}", line=1)
    kind, reader = readers[magic]
    return kind, reader(path)


def _threads(args) -> int:
    env = os.environ.get("KNOCKOFF_THREADS")
    n = int(env) if env is not None else args.threads
    if n < 1:
        raise _UsageError("thread count must be >= 1")
    return n


# ---------------------------------------------------------------- handlers


def _cmd_fit_mc(args, argv):
    X = read_tsv_matrix(args.data, dtype=int)
    chain = fit_mc_mle(X, args.alphabet, pseudo_count=args.pseudo_count)
    write_mc_params(args.out, chain, header=_header("fit-mc", argv, args.seed))
    return 0


def _cmd_fit_hmm(args, argv):
    X = read_tsv_matrix(args.data, dtype=int)
    cfg = EmConfig(max_iters=args.max_iters, tol=args.tol,
                   restarts=args.restarts, seed=args.seed,
                   pseudo_count=args.pseudo_count)
    model = fit_hmm_em(X, args.states, args.alphabet, cfg,
                       tie_across_sites=args.tie)
    write_hmm_params(args.out, model, header=_header("fit-hmm", argv, args.seed))
    return 0


def _cmd_compile_geno(args, argv):
    kind, model = _read_params(args.params)
    if kind != "geno":
        raise _UsageError(f"compile-geno needs a GENOPARAMS file, got {kind}")
    compiler = compile_haplotype_hmm if args.haplotype else compile_genotype_hmm
    hmm = compiler(model, alpha_constant_per_site=args.alpha_constant)
    write_hmm_params(args.out, hmm,
                     header=_header("compile-geno", argv, args.seed))
    return 0


def _cmd_knockoff(args, argv):
    kind, model = _read_params(args.params)
    if kind == "geno":
        model = compile_haplotype_hmm(model) if args.haplotype \
            else compile_genotype_hmm(model)
    alphabet = model.M if isinstance(model, HiddenMarkovModel) else model.K
    X = read_tsv_matrix(args.data, dtype=int)
    if X.shape[1] != model.p:
        raise DimensionError(
            f"data has {X.shape[1]} columns, params expect {model.p}")
    if X.size and (X.min() < 0 or X.max() >= alphabet):
        raise DimensionError(f"data entries must lie in 0..{alphabet - 1}")
    n = X.shape[0]
    threads = _threads(args)

    # the chunked cores skip per-call validation, so ranges were checked above
    if isinstance(model, HiddenMarkovModel):
        U = row_uniforms(args.seed, n, 3 * model.p)
        core = lambda rows: _hmm_knockoff_rows_given_uniforms(
            model, X[rows], U[rows])[0]
    else:
        U = row_uniforms(args.seed, n, model.p)
        core = lambda rows: _knockoff_rows_given_uniforms(model, X[rows], U[rows])

    Xt = np.empty_like(X)
    chunks = [slice(a, min(a + THREAD_CHUNK, n)) for a in range(0, n, THREAD_CHUNK)]
    if threads == 1 or len(chunks) == 1:
        for rows in chunks:
            Xt[rows] = core(rows)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rows, block in zip(chunks, pool.map(core, chunks)):
                Xt[rows] = block
    write_tsv_matrix(args.out, Xt, header=_header("knockoff", argv, args.seed))
    return 0


def _cmd_filter(args, argv):
    X = read_tsv_matrix(args.design)
    Xt = read_tsv_matrix(args.knockoffs)
    y = read_tsv_matrix(args.response).ravel()
    design = augment_design(X, Xt, y, family=args.family)
    fit = l1_fit_cv(design, folds=args.folds, grid_size=args.grid_size,
                    rng=substream(args.seed))
    w = compute_w(fit.beta, combiner=args.combiner)
    result = knockoff_threshold(w.w, alpha=args.alpha, offset=args.offset)
    sel = np.zeros(w.w.size, dtype=int)
    sel[result.selected] = 1

    lines = _header("filter", argv, args.seed)
    lines += [
        f"family: {args.family}",
        "lambda: " + REAL_FMT % fit.lambda_cv,
        f"kkt: {fit.kkt_violation:.3e}",
        "threshold: " + REAL_FMT % result.threshold,
        f"n_selected: {int(sel.sum())}",
    ]
    with open(args.out, "w") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        fh.write("j,w,selected\n")
        for j in range(w.w.size):
            fh.write(f"{j + 1},{REAL_FMT % w.w[j]},{sel[j]}\n")
    return 0


def _parse_model_source(text: str) -> tuple[str, int | None]:
    base, _, size = text.partition(":")
    if base not in ("true", "refit", "unsup") or (size and base != "unsup"):
        raise _UsageError(f"bad --model-source {text!r}")
    if size:
        try:
            n_u = int(size)
        except ValueError:
            raise _UsageError(f"bad unsup panel size {size!r}") from None
        if n_u < 1:
            raise _UsageError("unsup panel size must be >= 1")
        return base, n_u
    return base, None


def _build_design_model(args):
    if args.design == "mc":
        K = args.K or 5
        return build_toy_mc(ToyMcSpec(p=args.p, K=K, seed=args.seed))
    if args.design == "hmm":
        K = args.K or 9
        return build_toy_hmm(ToyHmmSpec(p=args.p, K=K, seed=args.seed))
    K = args.K or 5
    return compile_genotype_hmm(build_toy_haplotype(args.p, K, seed=args.seed))


def _cmd_simulate(args, argv):
    try:
        amps = [float(a) for a in args.amps.split(",") if a]
    except ValueError:
        raise _UsageError(f"bad --amps {args.amps!r}") from None
    if not amps:
        raise _UsageError("need at least one amplitude")
    source, unsup_n = _parse_model_source(args.model_source)
    model = _build_design_model(args)
    records = run_experiment(
        source, model, amps, args.reps, alpha=args.alpha, offset=args.offset,
        seed=args.seed, n=args.n, s=args.s, family=args.family,
        folds=args.folds, grid_size=args.grid_size, unsup_n=unsup_n,
        n_jobs=args.jobs)
    rows = summarize(records)

    with open(args.out, "w") as fh:
        for line in _header("simulate", argv, args.seed):
            fh.write(f"# {line}\n")
        fh.write("design,model_source,amplitude,replicate,fdp,power,"
                 "n_selected,wall_ms\n")
        for r in records:
            fh.write(f"{args.design},{args.model_source},{REAL_FMT % r.amplitude},"
                     f"{r.replicate},{REAL_FMT % r.fdp},{REAL_FMT % r.power},"
                     f"{r.n_selected},{r.wall_ms:.3f}\n")
        fh.write("# summary\n")
        fh.write("design,model_source,amplitude,n_reps,fdr,fdr_halfwidth,"
                 "power,power_halfwidth,mean_selected,mean_wall_ms\n")
        for s in rows:
            fh.write(f"{args.design},{args.model_source},{REAL_FMT % s.amplitude},"
                     f"{s.n_reps},{REAL_FMT % s.fdr},{REAL_FMT % s.fdr_halfwidth},"
                     f"{REAL_FMT % s.power},{REAL_FMT % s.power_halfwidth},"
                     f"{s.mean_selected:.3f},{s.mean_wall_ms:.3f}\n")

    for s in rows:
        print(f"amplitude {s.amplitude:g}: FDR {s.fdr:.3f} (+-{s.fdr_halfwidth:.3f})"
              f"  power {s.power:.3f} (+-{s.power_halfwidth:.3f})"
              f"  over {s.n_reps} replicates")
    if args.plot:
        _plot_records(args, argv, records, amps)
    return 0


def _plot_records(args, argv, records, amps):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "hmmknock"
    order = sorted(set(amps))
    fdp = [[r.fdp for r in records if r.amplitude == a] for a in order]
    power = [[r.power for r in records if r.amplitude == a] for a in order]
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    for ax, data, title in ((axes[0], fdp, "FDP"), (axes[1], power, "power")):
        ax.boxplot(data, positions=range(len(order)))
        ax.set_xticks(range(len(order)))
        ax.set_xticklabels([f"{a:g}" for a in order])
        ax.set_xlabel("amplitude")
        ax.set_title(title)
    axes[0].axhline(args.alpha, linestyle="--", color="tab:red", linewidth=1)
    fig.tight_layout()
    fig.savefig(args.plot, format="svg", metadata={"Date": None})
    plt.close(fig)
    _stamp_svg(args.plot, _header("simulate", argv, args.seed))


def _stamp_svg(path, header: list[str]) -> None:
    """Annotate an SVG with the standard header.

    XML comments cannot contain "--" (most flags do), so the header rides in
    processing instructions right after the XML declaration.
    """
    with open(path) as fh:
        text = fh.read()
    stamp = "".join(f"<?hmmknock {line}?>\n" for line in header)
    first_newline = text.index("\n") + 1
    with open(path, "w") as fh:
        fh.write(text[:first_newline] + stamp + text[first_newline:])


def _cmd_audit(args, argv):
    kind, model = _read_params(args.params)
    if kind == "geno":
        model = compile_genotype_hmm(model)
    if isinstance(model, HiddenMarkovModel):
        table = exact_hmm_joint(model)
        swap = lambda S: swapped_hmm_joint(table, S)
    else:
        table = exact_joint_pmf(model)
        swap = lambda S: swapped_joint(table, S)

    p = model.p
    worst = 0.0
    n_sets = 0
    for mask in range(1, 2 ** p):
        S = [j for j in range(p) if mask >> j & 1]
        worst = max(worst, float(np.abs(swap(S) - table).max()))
        n_sets += 1
    passed = worst <= args.tol
    lines = [
        f"model: {kind} p={p}",
        f"swap sets checked: {n_sets}",
        f"max deviation: {worst:.3e}",
        f"tolerance: {args.tol:g}",
        "PASS" if passed else "FAIL",
    ]
    for line in lines:
        print(line)
    if args.out:
        with open(args.out, "w") as fh:
            for line in _header("audit", argv, args.seed) + lines:
                fh.write(f"# {line}\n")
    return 0 if passed else 2


# ----------------------------------------------------------------- parser


def _add_seed(sp):
    sp.add_argument("--seed", type=int, default=0,
                    help="RNG seed; recorded in output headers even when "
                         "the subcommand is deterministic")


def build_parser() -> _Parser:
    parser = _Parser(prog="hmmknock",
                     description="exact knockoffs for Markov chains and HMMs")
    parser.add_argument("--version", action="version",
                        version=f"hmmknock {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    p = sub.add_parser("fit-mc", parents=[], help="Markov-chain MLE")
    p.add_argument("--data", required=True)
    p.add_argument("--alphabet", type=int, required=True, help="state count K")
    p.add_argument("--out", required=True)
    p.add_argument("--pseudo-count", type=float, default=1.0)
    _add_seed(p)
    p.set_defaults(func=_cmd_fit_mc)

    p = sub.add_parser("fit-hmm", help="Baum-Welch HMM fit")
    p.add_argument("--data", required=True)
    p.add_argument("--states", type=int, required=True, help="latent count K")
    p.add_argument("--alphabet", type=int, required=True, help="symbol count M")
    p.add_argument("--out", required=True)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--pseudo-count", type=float, default=1.0)
    p.add_argument("--tie", action="store_true",
                   help="share one transition and one emission block "
                        "across sites")
    _add_seed(p)
    p.set_defaults(func=_cmd_fit_hmm)

    p = sub.add_parser("compile-geno", help="mosaic params to HMM params")
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--haplotype", action="store_true",
                   help="compile the single-haplotype model instead of "
                        "the genotype model")
    p.add_argument("--alpha-constant", action="store_true",
                   help="replace motif weights with uniform rows")
    _add_seed(p)
    p.set_defaults(func=_cmd_compile_geno)

    p = sub.add_parser("knockoff", help="knockoff copies of data rows")
    p.add_argument("--params", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (KNOCKOFF_THREADS overrides); "
                        "never changes the output")
    p.add_argument("--haplotype", action="store_true",
                   help="treat GENOPARAMS input as a haplotype panel")
    _add_seed(p)
    p.set_defaults(func=_cmd_knockoff)

    p = sub.add_parser("filter", help="knockoff filter selection")
    p.add_argument("--design", required=True)
    p.add_argument("--knockoffs", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--family", choices=("logistic", "linear"),
                   default="logistic")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--offset", type=int, choices=(0, 1), default=1)
    p.add_argument("--combiner", choices=("difference", "signed_max"),
                   default="difference")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid-size", type=int, default=100)
    _add_seed(p)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("simulate", help="replicated synthetic experiments")
    p.add_argument("--design", choices=("mc", "hmm", "geno"), required=True)
    p.add_argument("--model-source", default="true",
                   help="true | refit | unsup[:N] (N = unlabeled panel size)")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--p", type=int, default=200)
    p.add_argument("--s", type=int, default=20)
    p.add_argument("--K", type=int, default=None,
                   help="toy state count (defaults: mc 5, hmm 9, geno 5 motifs)")
    p.add_argument("--amps", default="10", help="comma-separated amplitudes")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--offset", type=int, choices=(0, 1), default=1)
    p.add_argument("--family", choices=("logistic", "linear"),
                   default="logistic")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid-size", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel replicate workers; never changes results")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None, help="optional SVG path")
    _add_seed(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("audit", help="exact exchangeability check")
    p.add_argument("--params", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default=None)
    _add_seed(p)
    p.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "subcommand", None) is None:
            raise _UsageError("a subcommand is required (see --help)")
        return args.func(args, argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (KnockoffError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

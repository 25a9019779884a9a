"""Plain-text model params files and TSV matrices.

Three versioned formats, whitespace-separated with ``#`` comments allowed
anywhere:

MCPARAMS 1
    ``MCPARAMS 1`` / ``K <int> P <int>`` / ``Q1`` with K reals / then p-1
    blocks ``Q <j>`` (j = 1..p-1, transition out of position j) each with
    K rows of K reals.

HMMPARAMS 1
    ``HMMPARAMS 1`` / ``K <int> P <int> M <int>`` / ``Q1`` + K reals /
    p-1 ``Q <j>`` blocks / p ``F <j>`` blocks (j = 1..p) each with K rows
    of M reals.

GENOPARAMS 1
    ``GENOPARAMS 1`` / ``K <int> P <int>`` / ``R`` + p reals / ``ALPHA`` +
    p rows of K reals / ``THETA`` + p rows of K reals.

Reals are serialized with 17 significant digits, so write/read round-trips
are lossless for float64. Matrices travel as TSV, one row per line, with an
optional single header row.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParseError
from .genotype import HaplotypeModel
from .hmm import HiddenMarkovModel
from .markov import DiscreteMarkovChain

REAL_FMT = "%.17g"


class _Tokens:
    """Token stream that remembers the source line of each token."""

    def __init__(self, text: str):
        self.items: list[tuple[str, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0]
            for tok in body.split():
                self.items.append((tok, lineno))
        self.pos = 0

    @property
    def line(self) -> int:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 1

    def next(self, what: str) -> str:
        if self.pos >= len(self.items):
            raise ParseError(f"unexpected end of file, expected {what}", self.line)
        tok, _ = self.items[self.pos]
        self.pos += 1
        return tok

    def expect(self, literal: str) -> None:
        line = self.line
        tok = self.next(f"'{literal}'")
        if tok != literal:
            raise ParseError(f"expected '{literal}', got '{tok}'", line)

    def next_int(self, what: str) -> int:
        line = self.line
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected integer {what}, got '{tok}'", line) from None

    def next_real(self, what: str) -> float:
        line = self.line
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected real {what}, got '{tok}'", line) from None

    def reals(self, count: int, what: str) -> np.ndarray:
        return np.array([self.next_real(what) for _ in range(count)])

    def done(self) -> None:
        if self.pos < len(self.items):
            raise ParseError(f"trailing content '{self.items[self.pos][0]}'", self.line)


def _read_magic(toks: _Tokens, magic: str) -> None:
    toks.expect(magic)
    line = toks.line
    version = toks.next_int("format version")
    if version != 1:
        raise ParseError(f"unsupported {magic} version {version}", line)


def _model_error(exc: Exception, toks: _Tokens) -> ParseError:
    return ParseError(f"invalid model: {exc}", toks.line)


def read_mc_params(path) -> DiscreteMarkovChain:
    toks = _Tokens(open(path).read())
    _read_magic(toks, "MCPARAMS")
    toks.expect("K")
    K = toks.next_int("K")
    toks.expect("P")
    p = toks.next_int("P")
    if K < 1 or p < 1:
        raise ParseError(f"K and P must be positive, got K={K} P={p}", toks.line)
    toks.expect("Q1")
    q1 = toks.reals(K, "initial probability")
    Q = np.empty((p - 1, K, K))
    for j in range(1, p):
        toks.expect("Q")
        line = toks.line
        jj = toks.next_int("transition block index")
        if jj != j:
            raise ParseError(f"expected block 'Q {j}', got 'Q {jj}'", line)
        Q[j - 1] = toks.reals(K * K, "transition probability").reshape(K, K)
    toks.done()
    try:
        return DiscreteMarkovChain(q1, Q)
    except (ValueError, DimensionError) as exc:
        raise _model_error(exc, toks) from exc


def write_mc_params(path, chain: DiscreteMarkovChain, header: list[str] | None = None):
    with open(path, "w") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        fh.write("MCPARAMS 1\n")
        fh.write(f"K {chain.K} P {chain.p}\n")
        fh.write("Q1\n")
        fh.write(_row(chain.q1))
        for j in range(1, chain.p):
            fh.write(f"Q {j}\n")
            _write_matrix_body(fh, chain.Q[j - 1])


def read_hmm_params(path) -> HiddenMarkovModel:
    toks = _Tokens(open(path).read())
    _read_magic(toks, "HMMPARAMS")
    toks.expect("K")
    K = toks.next_int("K")
    toks.expect("P")
    p = toks.next_int("P")
    toks.expect("M")
    M = toks.next_int("M")
    if K < 1 or p < 1 or M < 1:
        raise ParseError(f"K, P, M must be positive, got {K}, {p}, {M}", toks.line)
    toks.expect("Q1")
    q1 = toks.reals(K, "initial probability")
    Q = np.empty((p - 1, K, K))
    for j in range(1, p):
        toks.expect("Q")
        line = toks.line
        jj = toks.next_int("transition block index")
        if jj != j:
            raise ParseError(f"expected block 'Q {j}', got 'Q {jj}'", line)
        Q[j - 1] = toks.reals(K * K, "transition probability").reshape(K, K)
    f = np.empty((p, K, M))
    for j in range(1, p + 1):
        toks.expect("F")
        line = toks.line
        jj = toks.next_int("emission block index")
        if jj != j:
            raise ParseError(f"expected block 'F {j}', got 'F {jj}'", line)
        f[j - 1] = toks.reals(K * M, "emission probability").reshape(K, M)
    toks.done()
    try:
        return HiddenMarkovModel(DiscreteMarkovChain(q1, Q), f)
    except (ValueError, DimensionError) as exc:
        raise _model_error(exc, toks) from exc


def write_hmm_params(path, hmm: HiddenMarkovModel, header: list[str] | None = None):
    with open(path, "w") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        fh.write("HMMPARAMS 1\n")
        fh.write(f"K {hmm.K} P {hmm.p} M {hmm.M}\n")
        fh.write("Q1\n")
        fh.write(_row(hmm.latent.q1))
        for j in range(1, hmm.p):
            fh.write(f"Q {j}\n")
            _write_matrix_body(fh, hmm.latent.Q[j - 1])
        for j in range(1, hmm.p + 1):
            fh.write(f"F {j}\n")
            _write_matrix_body(fh, hmm.f[j - 1])


def read_geno_params(path) -> HaplotypeModel:
    toks = _Tokens(open(path).read())
    _read_magic(toks, "GENOPARAMS")
    toks.expect("K")
    K = toks.next_int("K")
    toks.expect("P")
    p = toks.next_int("P")
    if K < 1 or p < 1:
        raise ParseError(f"K and P must be positive, got K={K} P={p}", toks.line)
    toks.expect("R")
    r = toks.reals(p, "jump rate")
    toks.expect("ALPHA")
    a = toks.reals(p * K, "motif weight").reshape(p, K)
    toks.expect("THETA")
    theta = toks.reals(p * K, "allele probability").reshape(p, K)
    toks.done()
    try:
        return HaplotypeModel(r, a, theta)
    except (ValueError, DimensionError) as exc:
        raise _model_error(exc, toks) from exc


def write_geno_params(path, model: HaplotypeModel, header: list[str] | None = None):
    with open(path, "w") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        fh.write("GENOPARAMS 1\n")
        fh.write(f"K {model.K} P {model.p}\n")
        fh.write("R\n")
        fh.write(_row(model.r))
        fh.write("ALPHA\n")
        _write_matrix_body(fh, model.a)
        fh.write("THETA\n")
        _write_matrix_body(fh, model.theta)


def sniff_params(path) -> str:
    """First non-comment token of a params file: its format magic."""
    toks = _Tokens(open(path).read())
    return toks.next("format magic")


def _row(v: np.ndarray) -> str:
    return " ".join(REAL_FMT % x for x in v) + "\n"


def _write_matrix_body(fh, mat: np.ndarray) -> None:
    for row in mat:
        fh.write(_row(row))


def read_tsv_matrix(path, dtype=float) -> np.ndarray:
    """Matrix from TSV, skipping ``#`` comments and one optional header row.

    A first row whose fields are not all numeric is treated as a header and
    dropped. Returns a 2-D array even for a single row or column.
    """
    rows: list[list[str]] = []
    lines: list[int] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            rows.append(body.replace(",", "\t").split())
            lines.append(lineno)
    if rows and not all(_is_number(tok) for tok in rows[0]):
        rows, lines = rows[1:], lines[1:]
    if not rows:
        raise ParseError("no data rows found", 1)
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, (fields, lineno) in enumerate(zip(rows, lines)):
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, got {len(fields)}", lineno)
        try:
            out[i] = [float(tok) for tok in fields]
        except ValueError:
            raise ParseError("non-numeric field in data row", lineno) from None
    if dtype is not float:
        cast = out.astype(dtype)
        if not np.array_equal(cast.astype(float), out):
            raise ParseError("expected integer entries", lines[0])
        return cast
    return out


def write_tsv_matrix(path, mat: np.ndarray, header: list[str] | None = None,
                     columns: list[str] | None = None) -> None:
    mat = np.atleast_2d(np.asarray(mat))
    with open(path, "w") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        if columns is not None:
            fh.write("\t".join(columns) + "\n")
        integral = np.issubdtype(mat.dtype, np.integer)
        for row in mat:
            if integral:
                fh.write("\t".join(str(int(v)) for v in row) + "\n")
            else:
                fh.write("\t".join(REAL_FMT % v for v in row) + "\n")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False

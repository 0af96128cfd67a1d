"""Test-matrix generators and the experiment driver behind the CLI.

Banded generators can emit scipy.sparse matrices so that large instances are
compressed without materializing dense n x n arrays.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cluster_tree import build_tree
from .dense_core import matfun_dense, read_matrix_csv, rel_fro_error, scalar_function
from .errors import ContractError
from .hss import compress, hss_rank
from .matfun import (MatFunDiagnostics, MatFunRequest, estimate_spectrum_bounds,
                     matfun_telescopic)
from .poles import (aaa, pole_count_exp, pole_count_markov, poles_exp,
                    poles_markov)
from .rational_krylov import PoleList
from .telescopic import from_hss, telescopic_rank, to_dense, to_hss, to_standard

DENSE_CHECK_LIMIT = 8192
SPARSE_CUTOVER = 4096

MARKOV_FUNCTIONS = ("invsqrt", "sqrt", "log1p_over_x", "pow_gamma")


# ---------------------------------------------------------------------------
# generators

def gen_laplacian(n):
    """Discretized 1-D Laplacian -(1/h^2) tridiag(1, -2, 1), h = 1/(n+1); SPD."""
    if n < 2:
        raise ContractError(f"need n >= 2, got {n}")
    h = 1.0 / (n + 1)
    A = np.zeros((n, n))
    np.fill_diagonal(A, 2.0 / h**2)
    idx = np.arange(n - 1)
    A[idx, idx + 1] = -1.0 / h**2
    A[idx + 1, idx] = -1.0 / h**2
    return A


def _laplacian_sparse(n):
    h = 1.0 / (n + 1)
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def gl_coefficients(alpha, count):
    """Gruenwald-Letnikov weights g_0 = 1, g_j = g_{j-1} (j - 1 - alpha) / j."""
    g = np.empty(count)
    g[0] = 1.0
    for j in range(1, count):
        g[j] = g[j - 1] * (j - 1 - alpha) / j
    return g


def gen_gl_fractional(n, alpha):
    """Symmetrized Gruenwald-Letnikov fractional-derivative operator.

    Lower-triangular Toeplitz with weights g_j shifted one column (the
    superdiagonal carries g_0), symmetrized as (T + T^T)/2 and negated so the
    result is positive definite. Dense and non-banded; HSS rank grows like
    log n.
    """
    if not 1.0 < alpha < 2.0:
        raise ContractError(f"fractional order must lie in (1, 2), got {alpha}")
    g = gl_coefficients(alpha, n + 1)
    col = np.concatenate([[g[1]], g[2:]])
    row = np.zeros(n)
    row[0], row[1] = g[1], g[0]
    from scipy.linalg import toeplitz
    T = toeplitz(col, row)
    return -(T + T.T) / 2


def _lanczos_tridiag(eigs):
    """Lanczos on diag(eigs) with the normalized all-ones start and full
    reorthogonalization; returns the tridiagonal coefficients (alpha, beta)."""
    d = np.asarray(eigs, dtype=float)
    n = d.size
    if n == 0:
        raise ContractError("need at least one eigenvalue")
    Q = np.zeros((n, n))
    q = np.ones(n) / np.sqrt(n)
    Q[:, 0] = q
    alphas, betas = [], []
    scale = max(np.abs(d).max(), 1.0)
    for j in range(n):
        w = d * Q[:, j]
        a = float(Q[:, j] @ w)
        alphas.append(a)
        if j == n - 1:
            break
        w -= a * Q[:, j]
        if j > 0:
            w -= betas[-1] * Q[:, j - 1]
        for _ in range(2):
            w -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ w)
        b = np.linalg.norm(w)
        if b <= 1e-14 * scale:
            # invariant subspace found: restart with a fresh direction
            for i in range(n):
                e = np.zeros(n)
                e[i] = 1.0
                e -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ e)
                nrm = np.linalg.norm(e)
                if nrm > 1e-8:
                    w = e
                    b = 0.0
                    break
            betas.append(0.0)
            Q[:, j + 1] = w / np.linalg.norm(w)
        else:
            betas.append(float(b))
            Q[:, j + 1] = w / b
    return np.array(alphas), np.array(betas)


def gen_tridiag_spectrum(eigs):
    """Symmetric tridiagonal matrix with the prescribed spectrum."""
    alphas, betas = _lanczos_tridiag(eigs)
    n = alphas.size
    T = np.diag(alphas)
    idx = np.arange(n - 1)
    T[idx, idx + 1] = betas
    T[idx + 1, idx] = betas
    return T


def _tridiag_sparse(eigs):
    alphas, betas = _lanczos_tridiag(eigs)
    return sp.diags([betas, alphas, betas], [-1, 0, 1], format="csr")


def gen_gmrf_like(n, seed=0, bandwidth=8):
    """Seeded banded diagonally dominant SPD stand-in for a GMRF precision."""
    return _gmrf_sparse(n, seed, bandwidth).toarray()


def _gmrf_sparse(n, seed=0, bandwidth=8):
    rng = np.random.default_rng(seed)
    diags, offsets = [], []
    row_abs = np.zeros(n)
    for k in range(1, bandwidth + 1):
        v = rng.uniform(-1.0, 1.0, size=n - k)
        diags.append(v)
        offsets.append(k)
        row_abs[:-k] += np.abs(v)
        row_abs[k:] += np.abs(v)
    main = 1.0 + row_abs
    data = [d for d in diags] + [main] + [d for d in diags]
    offs = [-k for k in offsets] + [0] + offsets
    return sp.diags(data, offs, format="csr")


def spectrum_uniform(n, a_exponent):
    """n eigenvalues equispaced on [-10^a, 0]."""
    return np.linspace(-(10.0 ** a_exponent), 0.0, n)


def spectrum_sign_logspace(n, a_exponent, b=1.0):
    """Symmetric spectrum: n/2 values logspaced in [10^a, b] and their negatives."""
    half = n // 2
    pos = np.geomspace(10.0 ** a_exponent, b, half)
    eigs = np.concatenate([-pos[::-1], pos])
    if eigs.size < n:
        eigs = np.concatenate([eigs, [b]])
    return np.sort(eigs)


# ---------------------------------------------------------------------------
# experiment driver

@dataclass
class ExperimentSpec:
    function: str                    # invert | expm | invsqrt | sign | custom
    matrix: str                      # laplacian | glfrac | tridiag | gmrf_like | csv:PATH
    n: int = 0
    alpha: float = 1.5
    spectrum: np.ndarray = None
    poles: object = "auto"           # "auto" | int | PoleList | "json:PATH"
    eps: float = 1e-8
    threshold: int = 256
    compress_tol: float = 1e-12
    check_dense: bool = False
    to_hss: bool = False
    seed: int = 0
    gap: float = None                # inner spectral radius for sign
    fname: str = None                # custom scalar function name
    gamma: float = None
    max_poles: int = 60

    def __post_init__(self):
        if self.check_dense and self.n > DENSE_CHECK_LIMIT:
            raise ContractError(
                f"dense checks are limited to n <= {DENSE_CHECK_LIMIT}, got {self.n}")


@dataclass
class ExperimentReport:
    record: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(self.record)

    def to_csv(self):
        keys = list(self.record.keys())
        vals = [_csv_cell(self.record[k]) for k in keys]
        return ",".join(keys) + "\n" + ",".join(vals) + "\n"


def _csv_cell(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, str):
        return '"' + v.replace('"', '""') + '"'
    return str(v)


def _build_matrix(spec):
    """Returns (operand for compression, dense copy or None)."""
    name = spec.matrix
    if name.startswith("csv:"):
        A = read_matrix_csv(name[4:])
        return A, A
    n = spec.n
    want_dense = spec.check_dense or n <= SPARSE_CUTOVER
    if name == "laplacian":
        S = _laplacian_sparse(n)
    elif name == "glfrac":
        A = gen_gl_fractional(n, spec.alpha)
        return A, A
    elif name == "tridiag":
        if spec.spectrum is None:
            raise ContractError("tridiag generator needs a spectrum")
        S = _tridiag_sparse(spec.spectrum)
    elif name == "gmrf_like":
        S = _gmrf_sparse(n, seed=spec.seed)
    else:
        raise ContractError(f"unknown matrix generator {spec.matrix!r}")
    return S, (S.toarray() if want_dense else None)


_FUNC_BY_COMMAND = {"invert": "inv", "expm": "exp", "invsqrt": "invsqrt", "sign": "sign"}


def _resolve_function(spec):
    if spec.function == "custom":
        if not spec.fname:
            raise ContractError("custom experiments need --fname")
        return scalar_function(spec.fname, gamma=spec.gamma, gap=spec.gap or 0.0)
    try:
        name = _FUNC_BY_COMMAND[spec.function]
    except KeyError:
        raise ContractError(f"unknown function command {spec.function!r}") from None
    if name == "sign":
        return scalar_function("sign", gap=spec.gap or 0.0)
    return scalar_function(name)


def _markov_sup(fname, a, b, gamma=None):
    if fname == "invsqrt":
        return 1.0 / np.sqrt(a)
    if fname == "sqrt":
        return np.sqrt(b)
    if fname == "log1p_over_x":
        return np.log1p(a) / a if a > 0 else 1.0
    if fname.startswith("pow"):
        return a ** gamma if gamma is not None and gamma < 0 else b ** (gamma or 1.0)
    return 1.0


def _resolve_poles(spec, f, T, depth):
    """Pole strategy chosen by function name; 'auto' sizes k by the count
    formulas, an integer pins k, and json:PATH loads explicit poles."""
    sel = spec.poles
    if isinstance(sel, PoleList):
        return sel, True
    if isinstance(sel, str) and sel.startswith("json:"):
        with open(sel[5:], "r", encoding="utf-8") as fh:
            return PoleList.from_json(fh.read()), True
    explicit_k = None
    if not (isinstance(sel, str) and sel == "auto"):
        explicit_k = int(sel)

    L = max(depth, 1)
    if f.name == "inv":
        return PoleList([0.0] * (explicit_k or 1)), True

    if f.name == "exp":
        k = explicit_k or pole_count_exp(spec.eps, L)
        return poles_exp(k), True

    lo, hi = estimate_spectrum_bounds(T)
    if f.name == "sign":
        gap = spec.gap
        if gap is None and spec.spectrum is not None:
            gap = float(np.abs(spec.spectrum).min())
        if gap is None or gap <= 0:
            raise ContractError("sign experiments need a positive --gap "
                                "(or a spectrum to read it from)")
        b = max(abs(lo), abs(hi))
        samples = np.concatenate([-np.geomspace(gap, b, 1000)[::-1],
                                  np.geomspace(gap, b, 1000)])
        fit = aaa(f, samples, tol=spec.eps / (4 * L),
                  max_degree=explicit_k or spec.max_poles)
        return fit.pole_list(), fit.converged

    # Markov-type functions on a positive spectrum
    a = lo if lo > 0 else max(hi, 1e-300) * 1e-16
    b = max(hi, a)
    if explicit_k:
        k = explicit_k
    else:
        f_sup = _markov_sup(f.name, a, b, spec.gamma)
        k = min(pole_count_markov(spec.eps, L, a, b, f_sup), spec.max_poles)
    return poles_markov(k, a, b), True


def run_experiment(spec):
    """Build -> compress -> telescopic matfun -> optional conversions/checks.

    Returns an ExperimentReport whose record is a flat dict (identical content
    for the JSON and CSV serializations).
    """
    f = _resolve_function(spec)
    t0 = time.perf_counter()
    A, A_dense = _build_matrix(spec)
    n = A.shape[0]
    t_build = time.perf_counter() - t0

    t0 = time.perf_counter()
    tree = build_tree(n, spec.threshold)
    H = compress(A, tree=tree, tol=spec.compress_tol, symmetric=True)
    t_compress = time.perf_counter() - t0
    rank_in = hss_rank(H, tol=min(spec.compress_tol, 1e-12))

    T = from_hss(H)

    poles, poles_converged = _resolve_poles(spec, f, T, tree.depth)

    # nonpositive spectrum needed for the exponential strategy: shift and
    # rescale by the scalar factor afterwards
    shift = 0.0
    if f.name == "exp":
        _, hi = estimate_spectrum_bounds(T)
        if hi > 0:
            shift = hi
            T = from_hss(H.shifted(-shift))

    diag = MatFunDiagnostics()
    t0 = time.perf_counter()
    req = MatFunRequest(decomposition=T, f=f, poles=poles,
                        defl_tol=0.01 * spec.eps)
    result = matfun_telescopic(req, diagnostics=diag)
    t_matfun = time.perf_counter() - t0
    if shift != 0.0:
        factor = float(np.exp(shift))
        result.D = {node: factor * blk for node, blk in result.D.items()}

    rank_out = telescopic_rank(result)

    t_convert = 0.0
    if spec.to_hss:
        t0 = time.perf_counter()
        to_hss(to_standard(result))
        t_convert = time.perf_counter() - t0

    err = None
    t_check = 0.0
    if spec.check_dense:
        t0 = time.perf_counter()
        F_ref = matfun_dense(A_dense, f)
        err = rel_fro_error(to_dense(result), F_ref)
        t_check = time.perf_counter() - t0

    flagged = (not poles_converged) or (err is not None and err > spec.eps)
    record = {
        "function": f.name,
        "matrix": spec.matrix,
        "n": n,
        "hss_rank_in": rank_in,
        "telescopic_rank_out": rank_out,
        "k": len(poles),
        "eps": spec.eps,
        "threshold": spec.threshold,
        "seed": spec.seed,
        "time_build_s": t_build,
        "time_compress_s": t_compress,
        "time_matfun_s": t_matfun,
        "time_krylov_s": diag.time_krylov,
        "time_fevals_s": diag.time_fevals,
        "time_convert_s": t_convert,
        "time_check_s": t_check,
        "err": err if err is not None else "",
        "flagged": bool(flagged),
        "gap_violations": diag.gap_violations,
        "deflated": diag.deflated,
        "basis_dims": ";".join(
            f"{lvl}:" + "|".join(map(str, dims))
            for lvl, dims in sorted(diag.basis_dims.items()) if dims),
    }
    return ExperimentReport(record=record)

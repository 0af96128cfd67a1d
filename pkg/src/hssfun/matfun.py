"""Matrix functions of symmetric HSS matrices in telescopic form.

The driver walks the cluster tree from the leaves to the root. At each node it
keeps a non-orthonormal low-rank factor Z and a compressed diagonal block; a
rational Krylov basis of the block absorbs the low-rank update of f, and the
correction blocks returned per node form a symmetric telescopic decomposition
of the approximation to f(A).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .dense_core import matfun_dense, spectral_apply
from .errors import ContractError, FunctionDomainError, PoleCollisionError
from .rational_krylov import PoleList, is_inf_pole, rational_arnoldi
from .telescopic import TelescopicDecomposition, from_hss, matvec, to_hss, to_standard


@dataclass
class MatFunDiagnostics:
    """Per-run record: basis dimensions per level, deflation counts, out-of-domain
    eigenvalue count (sign gap violations), and phase timings in seconds."""

    basis_dims: dict = field(default_factory=dict)
    deflated: int = 0
    gap_violations: int = 0
    time_krylov: float = 0.0
    time_fevals: float = 0.0

    def as_dict(self):
        return {
            "basis_dims": {str(k): v for k, v in self.basis_dims.items()},
            "deflated": self.deflated,
            "gap_violations": self.gap_violations,
            "time_krylov": self.time_krylov,
            "time_fevals": self.time_fevals,
        }


@dataclass
class MatFunRequest:
    """Inputs of the telescopic matrix-function driver.

    ``decomposition`` must be standard and symmetric; ``poles`` must be closed
    under conjugation. ``spectrum_bounds`` is optional metadata ([lmin, lmax]);
    when absent it can be estimated with ``estimate_spectrum_bounds``.
    """

    decomposition: TelescopicDecomposition
    f: object
    poles: PoleList
    defl_tol: float = 0.0
    spectrum_bounds: tuple = None

    def __post_init__(self):
        if not isinstance(self.poles, PoleList):
            self.poles = PoleList(self.poles)
        if not self.decomposition.symmetric:
            raise ContractError("matfun requires a symmetric telescopic decomposition")
        if not self.decomposition.standard:
            raise ContractError("matfun requires a standard telescopic decomposition")


def _feval(S, f, diag, where):
    t0 = time.perf_counter()
    try:
        R, bad = spectral_apply(S, f)
    except FunctionDomainError as exc:
        raise FunctionDomainError(f"{exc} ({where})") from None
    finally:
        diag.time_fevals += time.perf_counter() - t0
    diag.gap_violations += len(bad)
    return R


def low_rank_update_matfun(D, Z, A_small, f, poles, defl_tol=0.0):
    """Approximate f(D + Z A_small Z^T) by the rational-Krylov update
    f(D) + W (f(W^T A W) - f(W^T D W)) W^T with W spanning Q(D, Z, poles)."""
    D = np.asarray(D, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    A = D + Z @ np.asarray(A_small, dtype=float) @ Z.T
    A = (A + A.T) / 2
    basis = rational_arnoldi(D, Z, poles, defl_tol)
    W = basis.W
    FD = matfun_dense(D, f)
    inner = matfun_dense(W.T @ A @ W, f) - matfun_dense(W.T @ D @ W, f)
    R = FD + W @ inner @ W.T
    return (R + R.T) / 2


def matfun_telescopic(req, diagnostics=None):
    """Telescopic decomposition of an approximation to f(A) (Algorithm main loop).

    The result reuses the cluster tree of the input and is symmetric but in
    general not standard; standardization is the caller's choice.
    """
    diag = diagnostics if diagnostics is not None else MatFunDiagnostics()
    T = req.decomposition
    tree = T.tree
    f = req.f
    poles = req.poles

    Z, Dt, W, C = {}, {}, {}, {}
    for level in range(tree.depth, -1, -1):
        diag.basis_dims[level] = []
        for node in tree.nodes_at_depth(level):
            if tree.is_leaf(node):
                Z[node] = T.U[node]
                Dt[node] = T.D[node]
            else:
                a, b = tree.children(node)
                Wa, Wb = W[a], W[b]
                WtZ_a = Wa.T @ Z[a]
                WtZ_b = Wb.T @ Z[b]
                da, db = Wa.shape[1], Wb.shape[1]
                ra, rb = WtZ_a.shape[1], WtZ_b.shape[1]
                S = np.zeros((da + db, ra + rb))
                S[:da, :ra] = WtZ_a
                S[da:, ra:] = WtZ_b
                if level > 0:
                    Z[node] = S @ T.U[node]
                Dtn = np.zeros((da + db, da + db))
                Dtn[:da, :da] = Wa.T @ Dt[a] @ Wa
                Dtn[da:, da:] = Wb.T @ Dt[b] @ Wb
                Dtn += S @ T.D[node] @ S.T
                Dt[node] = (Dtn + Dtn.T) / 2
                for child in (a, b):
                    del Z[child], Dt[child]
            if level == 0:
                C[node] = _feval(Dt[node], f, diag, f"root block, level 0")
            else:
                t0 = time.perf_counter()
                try:
                    basis = rational_arnoldi(Dt[node], Z[node], poles, req.defl_tol)
                except PoleCollisionError as exc:
                    raise PoleCollisionError(f"{exc} (node {node}, level {level})") from None
                diag.time_krylov += time.perf_counter() - t0
                Wn = basis.W
                W[node] = Wn
                diag.basis_dims[level].append(Wn.shape[1])
                diag.deflated += basis.deflated
                FD = _feval(Dt[node], f, diag, f"block at node {node}, level {level}")
                Fin = _feval(Wn.T @ Dt[node] @ Wn, f, diag,
                             f"compressed block at node {node}, level {level}")
                Cn = FD - Wn @ Fin @ Wn.T
                C[node] = (Cn + Cn.T) / 2

    out_U = {node: W[node] for node in W}
    return TelescopicDecomposition(tree=tree, U=out_U, V=out_U, D=C,
                                   symmetric=True, standard=False)


def matfun_hss(H, f, poles, defl_tol=0.0, diagnostics=None):
    """Convenience pipeline: HSS in, HSS approximation of f(A) out."""
    if not H.symmetric:
        raise ContractError("matfun_hss requires a symmetric HSS matrix")
    req = MatFunRequest(decomposition=from_hss(H), f=f, poles=poles,
                        defl_tol=defl_tol)
    result = matfun_telescopic(req, diagnostics=diagnostics)
    return to_hss(to_standard(result))


def error_bound_estimate(f, poles, interval, L, grid_size=10000):
    """Empirical Theorem-style bound 4 L max_grid |f - r| for the least-squares
    rational fit r with the supplied denominator (diagnostic only).

    The fit space is spanned by partial fractions of the finite poles (with
    multiplicities) plus a polynomial part matching the infinite-pole count
    and the starting block, evaluated on a Chebyshev grid of the interval.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo <= hi:
        raise ContractError(f"invalid interval [{lo}, {hi}]")
    if not isinstance(poles, PoleList):
        poles = PoleList(poles)
    m = max(int(grid_size), 4 * (len(poles.poles) + 2))
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    x = mid + half * np.cos(np.linspace(0.0, np.pi, m))
    fx = f(x)

    n_inf = sum(1 for p in poles.poles if is_inf_pole(p))
    cols = []
    t = (x - mid) / half if half > 0 else np.zeros_like(x)
    cols.extend(np.polynomial.chebyshev.chebvander(t, n_inf).T)
    mult = {}
    for p in poles.finite():
        key = p if p.imag >= 0 else p.conjugate()
        mult[key] = mult.get(key, 0) + 1
    for p, cnt in mult.items():
        reps = cnt if p.imag == 0 else (cnt + 1) // 2
        for j in range(1, reps + 1):
            c = 1.0 / (x - p) ** j
            if p.imag == 0:
                cols.append(c.real)
            else:
                cols.append(c.real)
                cols.append(c.imag)
    B = np.column_stack(cols)
    scale = np.linalg.norm(B, axis=0)
    scale[scale == 0] = 1.0
    coef, *_ = np.linalg.lstsq(B / scale, fx, rcond=None)
    resid = np.abs(B / scale @ coef - fx).max()
    return 4.0 * max(int(L), 1) * float(resid)


def estimate_spectrum_bounds(A, n=None, iters=20, margin=0.05, seed=0):
    """Estimate [lmin, lmax] by a short Lanczos run on the operator's matvec,
    widened by ``margin`` of the observed span on each end.

    ``A`` may be a TelescopicDecomposition, an HssMatrix, a dense array, or a
    callable matvec (then ``n`` is required).
    """
    from . import hss as hss_mod

    if isinstance(A, TelescopicDecomposition):
        mv, n = (lambda v: matvec(A, v)), A.n
    elif isinstance(A, hss_mod.HssMatrix):
        mv, n = (lambda v: hss_mod.hss_matvec(A, v)), A.n
    elif callable(A):
        if n is None:
            raise ContractError("matvec operator needs an explicit dimension")
        mv = A
    else:
        M = np.asarray(A, dtype=float)
        mv, n = (lambda v: M @ v), M.shape[0]

    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    Q = [q]
    alphas, betas = [], []
    for _ in range(min(iters, n)):
        w = mv(Q[-1])
        a = float(Q[-1] @ w)
        alphas.append(a)
        w = w - a * Q[-1]
        if len(Q) > 1:
            w = w - betas[-1] * Q[-2]
        for qv in Q:
            w = w - (qv @ w) * qv
        b = np.linalg.norm(w)
        if b < 1e-13 * max(abs(a), 1.0):
            break
        betas.append(float(b))
        Q.append(w / b)
    k = len(alphas)
    Tk = np.diag(alphas)
    for i in range(k - 1):
        Tk[i, i + 1] = Tk[i + 1, i] = betas[i]
    theta = np.linalg.eigvalsh(Tk)
    span = max(theta[-1] - theta[0], 1e-12 * max(abs(theta[0]), abs(theta[-1]), 1.0))
    return float(theta[0] - margin * span), float(theta[-1] + margin * span)

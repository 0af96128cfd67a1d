"""Small dense symmetric kernels: spectral matrix functions, orthonormalization
with deflation, and Frobenius-norm diagnostics.

Dense matrices are plain 2-D float64 ``numpy`` arrays throughout the package.
"""

import numpy as np

from .errors import ContractError, FunctionDomainError

SYMMETRY_RTOL = 1e-12

# double-precision floor for deflation decisions, relative to the block scale
_EPS_FLOOR = 100 * np.finfo(float).eps


class ScalarFunction:
    """Named real scalar function with domain metadata.

    Args:
        name: identifier used in reports and error messages.
        func: vectorized evaluator, finite on the declared domain.
        domain: sequence of intervals (lo, hi, lo_open, hi_open); defaults
            to the whole real line.
        total: the evaluator is defined for every real input even outside
            the nominal domain (used by the sign convention); out-of-domain
            eigenvalues are then counted instead of raised.
    """

    def __init__(self, name, func, domain=None, total=False):
        self.name = name
        self.func = func
        self.domain = tuple(domain) if domain is not None else ((-np.inf, np.inf, True, True),)
        self.total = total

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def contains(self, x):
        for lo, hi, lo_open, hi_open in self.domain:
            above = x > lo if lo_open else x >= lo
            below = x < hi if hi_open else x <= hi
            if above and below:
                return True
        return False

    def violations(self, values):
        return [float(v) for v in np.atleast_1d(values) if not self.contains(v)]

    def __repr__(self):
        return f"ScalarFunction({self.name!r})"


def _sign_evaluator(x):
    # sign(0) := -1
    return np.where(x > 0, 1.0, -1.0)


def scalar_function(name, *, gamma=None, gap=0.0):
    """Build one of the named scalar functions.

    Supported names: inv, exp, invsqrt, sqrt, sign, log1p_over_x, pow_gamma.
    ``gamma`` parametrizes pow_gamma; ``gap`` optionally narrows the nominal
    domain of sign to (-inf, -gap] u [gap, inf).
    """
    if name == "inv":
        return ScalarFunction("inv", lambda x: 1.0 / x,
                              domain=((-np.inf, 0.0, True, True), (0.0, np.inf, True, True)))
    if name == "exp":
        return ScalarFunction("exp", np.exp)
    if name == "invsqrt":
        return ScalarFunction("invsqrt", lambda x: 1.0 / np.sqrt(x),
                              domain=((0.0, np.inf, True, True),))
    if name == "sqrt":
        return ScalarFunction("sqrt", np.sqrt, domain=((0.0, np.inf, False, True),))
    if name == "sign":
        g = float(gap)
        if g > 0:
            dom = ((-np.inf, -g, True, False), (g, np.inf, False, True))
        else:
            dom = ((-np.inf, 0.0, True, True), (0.0, np.inf, True, True))
        return ScalarFunction("sign", _sign_evaluator, domain=dom, total=True)
    if name == "log1p_over_x":
        def _log1p_over_x(x):
            out = np.ones_like(x)
            nz = x != 0
            out[nz] = np.log1p(x[nz]) / x[nz]
            return out
        return ScalarFunction("log1p_over_x", _log1p_over_x,
                              domain=((-1.0, np.inf, True, True),))
    if name == "pow_gamma":
        if gamma is None:
            raise ValueError("pow_gamma requires gamma")
        return ScalarFunction(f"pow_{gamma:g}", lambda x: x**float(gamma),
                              domain=((0.0, np.inf, True, True),))
    raise ValueError(f"unknown scalar function {name!r}")


def check_symmetric(M, what="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError(f"{what} must be square, got shape {M.shape}")
    if M.size:
        scale = np.linalg.norm(M)
        if np.abs(M - M.T).max() > SYMMETRY_RTOL * max(scale, 1e-300):
            raise ContractError(f"{what} is not symmetric to {SYMMETRY_RTOL:g} relative")
    return M


def spectral_apply(S, f):
    """Evaluate f(S) spectrally; returns (result, out_of_domain_eigenvalues).

    Out-of-domain eigenvalues are only tolerated for total functions; they
    are evaluated with the function's convention and reported back.
    """
    S = check_symmetric(S, what="matfun input")
    if S.shape[0] == 0:
        return S.copy(), []
    vals, vecs = np.linalg.eigh(S)
    bad = f.violations(vals)
    if bad and not f.total:
        raise FunctionDomainError(
            f"eigenvalue {bad[0]:.17g} outside the domain of {f.name}")
    R = (vecs * f(vals)) @ vecs.T
    return (R + R.T) / 2, bad


def matfun_dense(S, f):
    """f(S) for symmetric S via spectral decomposition, symmetrized output."""
    R, _ = spectral_apply(S, f)
    return R


def orthonormalize(M, defl_tol):
    """Gram-Schmidt with one full reorthogonalization pass and deflation.

    Columns whose norm after reorthogonalization falls below
    defl_tol * ||M||_F are dropped. Returns (Q, rank).
    """
    if defl_tol < 0:
        raise ValueError("deflation tolerance must be nonnegative")
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ContractError(f"expected a 2-D array, got shape {M.shape}")
    scale = np.linalg.norm(M)
    if scale == 0.0 or M.shape[1] == 0:
        return np.zeros((M.shape[0], 0)), 0
    thresh = max(defl_tol, _EPS_FLOOR) * scale
    cols = []
    for j in range(M.shape[1]):
        v = M[:, j].copy()
        for _ in range(2):
            for q in cols:
                v -= q * (q @ v)
        nrm = np.linalg.norm(v)
        if nrm >= thresh:
            cols.append(v / nrm)
    if not cols:
        return np.zeros((M.shape[0], 0)), 0
    Q = np.column_stack(cols)
    return Q, Q.shape[1]


def rel_fro_error(A, B):
    """Relative Frobenius-norm error ||A - B||_F / ||B||_F (0 if both zero)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ContractError(f"shape mismatch {A.shape} vs {B.shape}")
    denom = np.linalg.norm(B)
    num = np.linalg.norm(A - B)
    if denom == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / denom


def write_matrix_csv(path, M):
    np.savetxt(path, np.atleast_2d(np.asarray(M, dtype=float)),
               delimiter=",", fmt="%.17g")


def read_matrix_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)

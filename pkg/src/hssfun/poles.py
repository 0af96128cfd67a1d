"""Pole selection: Zolotarev elliptic constructions for Markov and sign
functions, AAA barycentric rational approximation (with Lawson refinement for
the exponential), and pole-count formulas.

Complete elliptic integrals and Jacobi elliptic functions are computed by AGM
iterations so that extreme moduli (tiny spectral gaps) stay representable.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractError
from .rational_krylov import PoleList, make_conjugation_closed

EXP_RATE = 9.289          # geometric rate of rational approximation to exp on (-inf, 0]

_EXP_TRANSPLANT_SCALE = 9.0


# ---------------------------------------------------------------------------
# elliptic utilities (AGM)

def _agm(a, b, tol=1e-15, maxit=60):
    for _ in range(maxit):
        if abs(a - b) <= tol * abs(a):
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def ellipk_complement(ell):
    """K'(ell) = K(sqrt(1 - ell^2)) via AGM; accurate for tiny ell."""
    if not 0 < ell <= 1:
        raise ContractError(f"modulus must lie in (0, 1], got {ell}")
    return math.pi / (2.0 * _agm(1.0, ell))


def jacobi_sn_cn_dn(u, ell):
    """Jacobi sn, cn, dn of argument u for the modulus sqrt(1 - ell^2).

    Descending Landen transformation seeded by AGM(1, ell); ``ell`` is the
    complementary modulus, which keeps the iteration stable when the gap
    parameter is many orders of magnitude below one.
    """
    a, b = 1.0, ell
    c = math.sqrt(max(0.0, 1.0 - ell * ell))
    avals, cvals = [a], [c]
    for _ in range(60):
        if abs(c) <= 1e-15 * abs(a):
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        avals.append(a)
        cvals.append(c)
    phi = (2.0 ** (len(avals) - 1)) * avals[-1] * u
    for i in range(len(avals) - 1, 0, -1):
        s = cvals[i] * math.sin(phi) / avals[i]
        phi = 0.5 * (phi + math.asin(max(-1.0, min(1.0, s))))
    sn = math.sin(phi)
    cn = math.cos(phi)
    dn = math.sqrt(max(1e-300, 1.0 - (1.0 - ell * ell) * sn * sn))
    return sn, cn, dn


def _zolotarev_coefficients(r, ell):
    """c_1..c_{2r-1} of the Zolotarev sign approximant on [ell, 1]."""
    Kp = ellipk_complement(ell)
    out = []
    for j in range(1, 2 * r):
        sn, cn, _ = jacobi_sn_cn_dn(j * Kp / (2.0 * r), ell)
        if abs(cn) < 1e-300:
            raise ContractError(f"degenerate elliptic coefficient at j={j}")
        out.append(ell * ell * sn * sn / (cn * cn))
    return out


# ---------------------------------------------------------------------------
# pole families

def poles_markov(k, a, b):
    """k real negative quasi-optimal poles for Markov functions with spectrum
    in [a, b] (Zolotarev construction through the square-root interval)."""
    if not 0 < a <= b:
        raise ContractError(f"need 0 < a <= b, got a={a}, b={b}")
    if k < 1:
        raise ContractError("pole count must be positive")
    ell = math.sqrt(a / b)
    c = _zolotarev_coefficients(k, min(ell, 1.0))
    return PoleList([-b * c[2 * j] for j in range(k)])


def poles_sign(k, a, b):
    """Purely imaginary conjugate pole pairs of the Zolotarev best rational
    approximation of sign on [-b, -a] u [a, b]; k must be even."""
    if not 0 < a <= b:
        raise ContractError(f"need 0 < a <= b, got a={a}, b={b}")
    if k < 2 or k % 2:
        raise ContractError(f"sign poles come in conjugate pairs; need even k >= 2, got {k}")
    r = k // 2
    c = _zolotarev_coefficients(r, min(a / b, 1.0))
    poles = []
    for j in range(r):
        v = b * math.sqrt(c[2 * j])
        poles.append(complex(0.0, v))
        poles.append(complex(0.0, -v))
    return PoleList(poles)


def pole_count_exp(eps, L):
    """ceil(log(4 L / eps) / log(9.289)), clamped to at least 1."""
    if not 0 < eps < 1:
        raise ContractError(f"accuracy must lie in (0, 1), got {eps}")
    if L < 1:
        raise ContractError(f"depth must be >= 1, got {L}")
    return max(1, math.ceil(math.log(4.0 * L / eps) / math.log(EXP_RATE)))


def pole_count_markov(eps, L, a, b, f_sup):
    """ceil(log(16 L ||f|| / eps) * log(16 b / a) / pi^2), clamped to >= 1."""
    if not 0 < a <= b:
        raise ContractError(f"need 0 < a <= b, got a={a}, b={b}")
    if eps <= 0 or f_sup <= 0:
        raise ContractError("accuracy and function bound must be positive")
    if L < 1:
        raise ContractError(f"depth must be >= 1, got {L}")
    val = math.log(16.0 * L * f_sup / eps) * math.log(16.0 * b / a) / math.pi**2
    return max(1, math.ceil(val))


# ---------------------------------------------------------------------------
# AAA barycentric rational approximation

@dataclass
class RationalApproximant:
    """Barycentric rational approximant with derived poles and residues."""

    nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    converged: bool = True
    max_error: float = 0.0
    poles_: np.ndarray = field(default=None, repr=False)
    residues_: np.ndarray = field(default=None, repr=False)

    @property
    def degree(self):
        return len(self.nodes) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        xv = x.ravel()
        D = xv[:, None] - self.nodes[None, :]
        hit_i, hit_j = np.nonzero(D == 0)
        D[hit_i, hit_j] = 1.0
        C = 1.0 / D
        r = (C @ (self.weights * self.values)) / (C @ self.weights)
        r[hit_i] = self.values[hit_j]
        return r.reshape(shape)

    def poles(self):
        if self.poles_ is None:
            self.poles_ = _barycentric_poles(self.nodes, self.weights)
        return self.poles_

    def residues(self):
        if self.residues_ is None:
            self.residues_ = _barycentric_residues(
                self.nodes, self.values, self.weights, self.poles())
        return self.residues_

    def pole_list(self):
        return PoleList(make_conjugation_closed(self.poles()))


def _barycentric_poles(nodes, weights):
    import scipy.linalg as sla

    m = len(nodes)
    if m < 2:
        return np.array([], dtype=complex)
    E = np.zeros((m + 1, m + 1))
    E[0, 1:] = weights
    E[1:, 0] = 1.0
    E[1:, 1:] = np.diag(nodes)
    B = np.eye(m + 1)
    B[0, 0] = 0.0
    ev = sla.eigvals(E, B)
    return ev[np.isfinite(ev)]


def _barycentric_residues(nodes, values, weights, poles):
    # residue = N(p) / D'(p) for the barycentric numerator and denominator
    if len(poles) == 0:
        return np.array([], dtype=complex)
    C = 1.0 / (poles[:, None] - nodes[None, :])
    N = C @ (weights * values)
    Dp = -(C**2) @ weights
    return N / Dp


def aaa(f, sample_set, tol=1e-13, max_degree=100):
    """Greedy AAA fit of ``f`` on ``sample_set``.

    Stops when the residual drops below tol * max|f| or the degree budget is
    exhausted (the result is then flagged non-converged). Spurious poles inside
    the sample hull with residues below 1e-13 of the function scale are pruned
    with one re-fit pass.
    """
    Z = np.asarray(sample_set, dtype=float).ravel()
    if Z.size < 4:
        raise ContractError("AAA needs at least 4 sample points")
    F = f(Z) if callable(f) else np.asarray(f, dtype=float).ravel()
    scale = np.abs(F).max()
    if scale == 0.0:
        raise ContractError("cannot fit the zero function")

    J = list(range(len(F)))
    zj, fj = [], []
    R = np.full_like(F, F.mean())
    w = np.array([1.0])
    err = np.inf
    converged = False
    for _ in range(max_degree + 1):
        jj = int(np.argmax(np.abs(F - R)))
        zj.append(Z[jj])
        fj.append(F[jj])
        J.remove(jj)
        zv, fv = np.array(zj), np.array(fj)
        C = 1.0 / (Z[J, None] - zv[None, :])
        A = (F[J, None] - fv[None, :]) * C
        _, _, Vh = np.linalg.svd(A, full_matrices=False)
        w = Vh[-1, :].conj()
        R = F.copy()
        R[J] = (C @ (w * fv)) / (C @ w)
        err = float(np.abs(F - R).max())
        if err <= tol * scale:
            converged = True
            break

    r = RationalApproximant(nodes=np.array(zj), values=np.array(fj),
                            weights=np.real_if_close(w).astype(float),
                            converged=converged, max_error=err)
    return _prune_spurious(r, Z, F, tol)


def _prune_spurious(r, Z, F, tol):
    poles = r.poles()
    if len(poles) == 0:
        return r
    res = r.residues()
    scale = np.abs(F).max()
    hull = (Z.min(), Z.max())
    bad = [i for i, (p, q) in enumerate(zip(poles, res))
           if hull[0] <= p.real <= hull[1]
           and abs(p.imag) <= 1e-8 * max(abs(p), 1.0)
           and abs(q) < 1e-13 * scale]
    if not bad:
        return r
    keep = np.ones(len(r.nodes), dtype=bool)
    for i in bad:
        j = int(np.argmin(np.abs(r.nodes - poles[i].real)))
        keep[j] = False
    nodes, values = r.nodes[keep], r.values[keep]
    mask = ~np.isin(Z, nodes)
    C = 1.0 / (Z[mask, None] - nodes[None, :])
    A = (F[mask, None] - values[None, :]) * C
    _, _, Vh = np.linalg.svd(A, full_matrices=False)
    w = np.real_if_close(Vh[-1, :].conj()).astype(float)
    R = (C @ (w * values)) / (C @ w)
    err = float(np.abs(F[mask] - R).max())
    return RationalApproximant(nodes=nodes, values=values, weights=w,
                               converged=r.converged, max_error=err)


# ---------------------------------------------------------------------------
# near-best exponential poles

def _lawson_weights(C, A, Fr, fj, w0, nit=120):
    lam = np.ones(A.shape[0])
    best_err, best_w = np.inf, w0
    for _ in range(nit):
        _, _, Vh = np.linalg.svd(np.sqrt(lam)[:, None] * A, full_matrices=False)
        w = Vh[-1, :].conj()
        res = np.abs(Fr - (C @ (w * fj)) / (C @ w))
        err = res.max()
        if err < best_err:
            best_err, best_w = err, w
        lam = lam * res
        mx = lam.max()
        if not np.isfinite(mx) or mx <= 0:
            break
        lam = np.maximum(lam / mx, 1e-300)
    return best_w, best_err


def _lawson_joint(C, Fr, nit=200):
    A = np.hstack([C, -Fr[:, None] * C])
    m = C.shape[1]
    lam = np.ones(A.shape[0])
    best = (np.inf, None, None)
    for _ in range(nit):
        _, _, Vh = np.linalg.svd(np.sqrt(lam)[:, None] * A, full_matrices=False)
        ab = Vh[-1, :].conj()
        a, b = ab[:m], ab[m:]
        denom = C @ b
        if np.any(denom == 0):
            break
        res = np.abs(Fr - (C @ a) / denom)
        err = res.max()
        if err < best[0]:
            best = (err, a.copy(), b.copy())
        lam = lam * res
        mx = lam.max()
        if not np.isfinite(mx) or mx <= 0:
            break
        lam = np.maximum(lam / mx, 1e-300)
    return best


@lru_cache(maxsize=None)
def poles_exp(k):
    """k conjugation-closed poles of a near-best rational approximant to exp
    on (-inf, 0].

    AAA runs on the Moebius transplant t -> 9 (t - 1)/(t + 1) of the negative
    axis onto [-1, 1]; Lawson reweighting refines toward the minimax fit, and
    the best candidate by measured residual wins. Poles on the negative real
    axis (inside the spectral region) disqualify a candidate.
    """
    if k < 1:
        raise ContractError("pole count must be positive")
    scl = _EXP_TRANSPLANT_SCALE
    t = np.cos(np.linspace(0.0, math.pi, 4000))[::-1]
    t = t[t > -1.0 + 1e-13]
    G = np.exp(scl * (t - 1.0) / (t + 1.0))

    base = aaa(G, t, tol=0.0, max_degree=k)
    nodes, fj = base.nodes, base.values
    mask = ~np.isin(t, nodes)
    Zr, Fr = t[mask], G[mask]
    C = 1.0 / (Zr[:, None] - nodes[None, :])
    A = (Fr[:, None] - fj[None, :]) * C

    candidates = [(base.max_error, fj * base.weights, base.weights)]
    w1, e1 = _lawson_weights(C, A, Fr, fj, base.weights)
    candidates.append((e1, fj * w1, w1))
    e2, a2, b2 = _lawson_joint(C, Fr)
    if a2 is not None:
        candidates.append((e2, a2, b2))

    best = None
    for err, _, den in sorted(candidates, key=lambda c: c[0]):
        pt = _barycentric_poles(nodes, den)
        if len(pt) != k:
            continue
        px = scl * (pt - 1.0) / (pt + 1.0)
        on_axis = (np.abs(px.imag) <= 1e-10 * np.maximum(np.abs(px), 1.0)) & (px.real <= 0)
        if np.any(on_axis):
            continue
        best = px
        break
    if best is None:
        raise ContractError(f"no admissible exponential pole set of size {k}")
    return PoleList(make_conjugation_closed(best))

"""Block rational Krylov bases for small dense symmetric matrices.

Bases include the starting block, so k poles yield up to b*(k+1) columns.
Conjugate pole pairs are processed jointly (one complex solve, real and
imaginary parts appended) so all stored data stays real.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .dense_core import check_symmetric, _EPS_FLOOR
from .errors import ContractError, PoleCollisionError

INF = complex(np.inf, 0.0)


def is_inf_pole(xi):
    return np.isinf(complex(xi).real) or np.isinf(complex(xi).imag)


def make_conjugation_closed(values, tol=1e-10):
    """Snap a numerically conjugate-symmetric pole set to exact closure.

    Poles with relatively tiny imaginary part are made real; the remaining
    complex poles are greedily paired with their nearest conjugate and both
    members replaced by an exact conjugate pair.
    """
    vals = [complex(v) for v in values]
    scale = max((abs(v) for v in vals if not is_inf_pole(v)), default=1.0)
    scale = max(scale, 1e-300)
    out, pending = [], []
    for v in vals:
        if is_inf_pole(v):
            out.append(INF)
        elif abs(v.imag) <= tol * max(abs(v), scale):
            out.append(complex(v.real, 0.0))
        else:
            pending.append(v)
    used = [False] * len(pending)
    for i, v in enumerate(pending):
        if used[i]:
            continue
        used[i] = True
        best, best_d = None, np.inf
        for j in range(i + 1, len(pending)):
            if used[j]:
                continue
            d = abs(pending[j] - v.conjugate())
            if d < best_d:
                best, best_d = j, d
        if best is None or best_d > tol * max(abs(v), scale):
            raise ContractError(f"pole {v} has no conjugate partner")
        used[best] = True
        w = pending[best]
        re = 0.5 * (v.real + w.real)
        im = 0.5 * (abs(v.imag) + abs(w.imag))
        out.append(complex(re, im))
        out.append(complex(re, -im))
    return out


@dataclass(frozen=True)
class PoleList:
    """Ordered poles (complex or infinity), closed under conjugation."""

    poles: tuple

    def __init__(self, poles):
        vals = []
        for p in poles:
            if isinstance(p, str):
                if p.lower() != "inf":
                    raise ContractError(f"unrecognized pole {p!r}")
                vals.append(INF)
            else:
                vals.append(INF if is_inf_pole(p) else complex(p))
        _check_conjugation_closed(vals)
        object.__setattr__(self, "poles", tuple(vals))

    def __len__(self):
        return len(self.poles)

    def __iter__(self):
        return iter(self.poles)

    @property
    def k(self):
        return len(self.poles)

    def finite(self):
        return [p for p in self.poles if not is_inf_pole(p)]

    def shifted(self, c):
        """Poles of the same subspace for the shifted matrix D + c*I."""
        return PoleList([INF if is_inf_pole(p) else p + c for p in self.poles])

    def to_json(self):
        items = []
        for p in self.poles:
            if is_inf_pole(p):
                items.append("inf")
            elif p.imag == 0.0:
                items.append(p.real)
            else:
                items.append([p.real, p.imag])
        return json.dumps(items)

    @staticmethod
    def from_json(text):
        items = json.loads(text)
        poles = []
        for it in items:
            if isinstance(it, str):
                poles.append(it)
            elif isinstance(it, (list, tuple)):
                if len(it) != 2:
                    raise ContractError(f"complex pole must be [re, im], got {it}")
                poles.append(complex(it[0], it[1]))
            else:
                poles.append(complex(it))
        return PoleList(poles)


def _check_conjugation_closed(vals):
    finite = [v for v in vals if not is_inf_pole(v)]
    remaining = list(finite)
    for v in finite:
        if v not in remaining:
            continue
        if v.imag == 0.0:
            remaining.remove(v)
            continue
        if v.conjugate() not in remaining:
            raise ContractError(
                f"pole list is not closed under conjugation: {v} lacks its conjugate")
        remaining.remove(v)
        remaining.remove(v.conjugate())


@dataclass
class KrylovBasis:
    """Orthonormal basis of a block rational Krylov subspace."""

    W: np.ndarray
    n: int
    b: int
    k: int
    deflated: int = 0

    @property
    def dim(self):
        return self.W.shape[1]


def _append_block(cols, X, defl_tol):
    """Orthogonalize the columns of X against cols (two passes), deflate, and
    extend cols in place. Returns (new_columns, n_dropped)."""
    X = np.asarray(X, dtype=float)
    scale = np.linalg.norm(X)
    if scale == 0.0 or X.shape[1] == 0:
        return [], X.shape[1]
    thresh = max(defl_tol, _EPS_FLOOR) * scale
    new = []
    dropped = 0
    for j in range(X.shape[1]):
        v = X[:, j].copy()
        for _ in range(2):
            for q in cols:
                v -= q * (q @ v)
            for q in new:
                v -= q * (q @ v)
        nrm = np.linalg.norm(v)
        if nrm >= thresh:
            new.append(v / nrm)
        else:
            dropped += 1
    cols.extend(new)
    return new, dropped


def _shifted_solve(D, xi, B):
    n = D.shape[0]
    try:
        if np.iscomplexobj(np.asarray(xi)) and complex(xi).imag != 0.0:
            X = np.linalg.solve(D - complex(xi) * np.eye(n), B.astype(complex))
        else:
            X = np.linalg.solve(D - float(np.real(xi)) * np.eye(n), B)
    except np.linalg.LinAlgError as exc:
        raise PoleCollisionError(f"shifted solve singular at pole {xi}") from exc
    if not np.all(np.isfinite(X)):
        raise PoleCollisionError(f"shifted solve overflowed at pole {xi}")
    return X


def rational_arnoldi(D, Z, poles, defl_tol=0.0):
    """Orthonormal basis of the block rational Krylov subspace Q(D, Z, poles).

    The starting block is included. Complex conjugate pole pairs are solved
    once; the real and imaginary parts enter as two real directions and the
    imaginary part (spanning the real quadratic-solve directions) carries the
    recursion forward.
    """
    D = check_symmetric(D, what="rational Arnoldi operator")
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != D.shape[0]:
        raise ContractError(f"operator is {D.shape} but block has {Z.shape[0]} rows")
    if not isinstance(poles, PoleList):
        poles = PoleList(poles)

    n, b = Z.shape
    cols = []
    start, dropped = _append_block(cols, Z, defl_tol)
    deflated = dropped
    prev = np.column_stack(start) if start else np.zeros((n, 0))

    consumed = [False] * len(poles.poles)
    for i, xi in enumerate(poles.poles):
        if consumed[i]:
            continue
        consumed[i] = True
        if prev.shape[1] == 0:
            break
        pair_imag = None
        if is_inf_pole(xi):
            cand = D @ prev
        elif xi.imag == 0.0:
            cand = _shifted_solve(D, xi.real, prev)
        else:
            j = _find_conjugate(poles.poles, consumed, xi)
            consumed[j] = True
            X = _shifted_solve(D, xi, prev)
            cand = np.hstack([X.real, X.imag])
            pair_imag = X.imag
        n_before = len(cols)
        new, dropped = _append_block(cols, cand, defl_tol)
        deflated += dropped
        if not new:
            continue
        if pair_imag is None:
            prev = np.column_stack(new)
        else:
            # continuation spans the real quadratic-resolvent directions,
            # orthogonalized against the basis prior to this block
            cont, _ = _project_block(cols[:n_before], pair_imag)
            prev = cont if cont.shape[1] else np.column_stack(new)

    W = np.column_stack(cols) if cols else np.zeros((n, 0))
    return KrylovBasis(W=W, n=n, b=b, k=len(poles.poles), deflated=deflated)


def _find_conjugate(poles, consumed, xi):
    for j, p in enumerate(poles):
        if not consumed[j] and not is_inf_pole(p) and p == xi.conjugate():
            return j
    raise ContractError(f"pole {xi} lacks an unconsumed conjugate partner")


def _normalize_columns(X):
    X = np.asarray(X, dtype=float)
    nrm = np.linalg.norm(X, axis=0)
    keep = nrm > 0
    return X[:, keep] / nrm[keep]


@dataclass
class BlockDiagReport:
    """Comparison of the block-diagonal basis with the monolithic one."""

    distance: float
    dim_blockdiag: int
    dim_monolithic: int
    block_dims: list = field(default_factory=list)

    @property
    def ok(self):
        return self.distance < 1e-10


def check_blockdiag_property(Ds, Zs, poles, defl_tol=0.0):
    """Verify that blkdiag of per-block bases spans the same subspace as the
    basis of the assembled block-diagonal problem. Returns a report with the
    spectral-norm distance between the two orthogonal projectors."""
    if len(Ds) != len(Zs):
        raise ContractError("need as many starting blocks as diagonal blocks")
    bases = [rational_arnoldi(D, Z, poles, defl_tol) for D, Z in zip(Ds, Zs)]
    n_tot = sum(D.shape[0] for D in Ds)
    U = np.zeros((n_tot, sum(B.dim for B in bases)))
    r0, c0 = 0, 0
    for D, B in zip(Ds, bases):
        U[r0:r0 + D.shape[0], c0:c0 + B.dim] = B.W
        r0 += D.shape[0]
        c0 += B.dim

    Dbig = np.zeros((n_tot, n_tot))
    Zbig = np.zeros((n_tot, sum(np.atleast_2d(Z.T).shape[0] for Z in Zs)))
    r0, c0 = 0, 0
    for D, Z in zip(Ds, Zs):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        m = D.shape[0]
        Dbig[r0:r0 + m, r0:r0 + m] = D
        Zbig[r0:r0 + m, c0:c0 + Z.shape[1]] = Z
        r0 += m
        c0 += Z.shape[1]
    mono = rational_arnoldi(Dbig, Zbig, poles, defl_tol)

    P1 = U @ U.T
    P2 = mono.W @ mono.W.T
    distance = float(np.linalg.norm(P1 - P2, 2)) if n_tot else 0.0
    return BlockDiagReport(distance=distance,
                           dim_blockdiag=U.shape[1],
                           dim_monolithic=mono.dim,
                           block_dims=[B.dim for B in bases])

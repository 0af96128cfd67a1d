"""Classical data-sparse HSS representation: construction from dense or sparse
input, reconstruction, matvec, and rank measurement.

Generators are stored per node: leaf bases U, V and diagonal blocks, translation
operators at non-leaf nodes, and coupling blocks per sibling pair (keyed by the
parent node). Big bases are never materialized outside of tests.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cluster_tree import ClusterTree, build_tree
from .dense_core import check_symmetric
from .errors import ContractError

ORTHO_RTOL = 1e-12


@dataclass
class HssMatrix:
    tree: ClusterTree
    U: dict
    V: dict
    D: dict
    B: dict                     # parent node -> (A~_ab, A~_ba)
    symmetric: bool = False
    diag_extra: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.tree.n

    def rank(self, node):
        return self.U[node].shape[1]

    def max_rank(self):
        return max((u.shape[1] for u in self.U.values()), default=0)

    def validate(self):
        """Check orthonormality of the stored bases and the symmetric-flag
        structure; raises ContractError on violation."""
        for node, U in self.U.items():
            _check_orthonormal(U, f"U{node}")
            _check_orthonormal(self.V[node], f"V{node}")
        if self.symmetric:
            for node in self.U:
                if self.V[node] is not self.U[node] and not np.array_equal(self.V[node], self.U[node]):
                    raise ContractError(f"symmetric flag requires V=U at node {node}")
            for parent, (Bab, Bba) in self.B.items():
                if not np.array_equal(Bba, Bab.T):
                    raise ContractError(f"symmetric flag requires transposed couplings at {parent}")
        return self

    def shifted(self, c):
        """The HSS matrix A + c*I (only leaf diagonal blocks change)."""
        D = {node: blk + c * np.eye(blk.shape[0]) for node, blk in self.D.items()}
        return HssMatrix(tree=self.tree, U=self.U, V=self.V, D=D, B=self.B,
                         symmetric=self.symmetric)

    def to_json(self):
        data = {
            "kind": "hss",
            "tree": self.tree.to_dict(),
            "symmetric": self.symmetric,
            "U": {_key(n): u.tolist() for n, u in self.U.items()},
            "V": {_key(n): v.tolist() for n, v in self.V.items()},
            "D": {_key(n): d.tolist() for n, d in self.D.items()},
            "B": {_key(n): [b[0].tolist(), b[1].tolist()] for n, b in self.B.items()},
        }
        return json.dumps(data)

    @staticmethod
    def from_json(text):
        data = json.loads(text)
        if data.get("kind") != "hss":
            raise ContractError(f"expected kind 'hss', got {data.get('kind')!r}")
        tree = ClusterTree.from_dict(data["tree"])
        U = {_unkey(k): np.array(v, dtype=float) for k, v in data["U"].items()}
        V = {_unkey(k): np.array(v, dtype=float) for k, v in data["V"].items()}
        D = {_unkey(k): np.array(v, dtype=float) for k, v in data["D"].items()}
        B = {_unkey(k): (np.array(v[0], dtype=float), np.array(v[1], dtype=float))
             for k, v in data["B"].items()}
        return HssMatrix(tree=tree, U=U, V=V, D=D, B=B,
                         symmetric=bool(data["symmetric"]))


def _key(node):
    return f"{node[0]}/{node[1]}"


def _unkey(key):
    d, p = key.split("/")
    return (int(d), int(p))


def _check_orthonormal(U, what):
    r = U.shape[1]
    if r == 0:
        return
    err = np.linalg.norm(U.T @ U - np.eye(r))
    if err > ORTHO_RTOL * max(r, 1):
        raise ContractError(f"{what} is not orthonormal ({err:.2e})")


def _norm2_estimate(A, iters=20):
    n = A.shape[0]
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(iters):
        w = A @ v
        w = A.T @ w if sp.issparse(A) else A.T @ w
        s = np.linalg.norm(w)
        if s == 0.0:
            return 0.0
        v = w / s
    return float(np.sqrt(s))


def _trunc_basis(block, cutoff):
    """Left singular vectors of ``block`` with singular values >= cutoff."""
    m = block.shape[0]
    if block.size == 0:
        return np.zeros((m, 0))
    U, s, _ = np.linalg.svd(block, full_matrices=False)
    r = int(np.sum(s >= cutoff))
    return U[:, :r].copy()


def _sparse_offdiag_rows(A, lo, hi):
    """Dense copy of the nonzero off-diagonal columns of rows [lo, hi)."""
    rows = A[lo:hi].tocsc()
    idx = np.unique(rows.indices)
    idx = idx[(idx < lo) | (idx >= hi)]
    return rows[:, idx].toarray()


def compress(A, tree=None, tol=1e-12, symmetric=False, threshold=256):
    """Compress a dense or scipy-sparse matrix into HSS form.

    Off-diagonal block rows/columns are truncated at singular values below
    tol * sigma_max(A) level by level, bottom up; nestedness holds by
    construction. ``tree`` defaults to build_tree(n, threshold).
    """
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ContractError(f"matrix must be square, got {A.shape}")
    if tree is None:
        tree = build_tree(n, threshold)
    if tree.n != n:
        raise ContractError(f"tree covers {tree.n} indices but matrix has {n}")
    if tol <= 0:
        raise ContractError("compression tolerance must be positive")
    sparse_in = sp.issparse(A)
    if not sparse_in:
        A = np.asarray(A, dtype=float)
        if symmetric:
            check_symmetric(A, what="compress input")
    elif symmetric:
        diff = (A - A.T).tocoo()
        scale = max(np.abs(A.data).max() if A.nnz else 0.0, 1e-300)
        if diff.nnz and np.abs(diff.data).max() > 1e-12 * scale:
            raise ContractError("compress input is not symmetric")

    cutoff = tol * max(_norm2_estimate(A), 1e-300)
    L = tree.depth
    U, V, Dleaf, B = {}, {}, {}, {}

    if L == 0:
        blk = A.toarray() if sparse_in else A.copy()
        return HssMatrix(tree=tree, U=U, V=V, D={tree.root: blk}, B=B,
                         symmetric=symmetric)

    M = A
    ranges = {node: tree.range(node) for node in tree.leaves()}
    for level in range(L, 0, -1):
        nodes = tree.nodes_at_depth(level)
        first = level == L
        for node in nodes:
            lo, hi = ranges[node]
            if first:
                Dleaf[node] = (M[lo:hi, lo:hi].toarray() if sparse_in
                               else M[lo:hi, lo:hi].copy())
            if first and sparse_in:
                rows = _sparse_offdiag_rows(M, lo, hi)
            else:
                rows = np.hstack([M[lo:hi, :lo], M[lo:hi, hi:]])
            U[node] = _trunc_basis(rows, cutoff)
            if symmetric:
                V[node] = U[node]
            else:
                if first and sparse_in:
                    cols = _sparse_offdiag_rows(M.T.tocsr(), lo, hi)
                else:
                    cols = np.hstack([M[:lo, lo:hi].T, M[hi:, lo:hi].T])
                V[node] = _trunc_basis(cols, cutoff)

        # reduce: M <- blkdiag(U)^T M blkdiag(V), tracked by fresh ranges
        new_ranges = {}
        off = 0
        for node in nodes:
            new_ranges[node] = (off, off + U[node].shape[1])
            off += U[node].shape[1]
        R = np.zeros((off, M.shape[1]))
        for node in nodes:
            lo, hi = ranges[node]
            nlo, nhi = new_ranges[node]
            if first and sparse_in:
                R[nlo:nhi] = (M[lo:hi].T @ U[node]).T
            else:
                R[nlo:nhi] = U[node].T @ M[lo:hi]
        Mred = np.zeros((off, off))
        for node in nodes:
            lo, hi = ranges[node]
            nlo, nhi = new_ranges[node]
            Mred[:, nlo:nhi] = R[:, lo:hi] @ V[node]
        M = Mred

        for parent in tree.nodes_at_depth(level - 1):
            a, b = tree.children(parent)
            alo, ahi = new_ranges[a]
            blo, bhi = new_ranges[b]
            Bab = M[alo:ahi, blo:bhi].copy()
            Bba = Bab.T.copy() if symmetric else M[blo:bhi, alo:ahi].copy()
            B[parent] = (Bab, Bba)
            new_ranges[parent] = (alo, bhi)
        ranges = new_ranges

    return HssMatrix(tree=tree, U=U, V=V, D=Dleaf, B=B, symmetric=symmetric)


def compress_dense(A, tree=None, tol=1e-12, symmetric=False, threshold=256):
    """HSS compression of a dense array (see ``compress``)."""
    return compress(np.asarray(A, dtype=float), tree=tree, tol=tol,
                    symmetric=symmetric, threshold=threshold)


def big_bases(H):
    """Expand the nested big bases for every node (test support; O(n^2))."""
    bigU, bigV = {}, {}
    tree = H.tree
    for level in range(tree.depth, 0, -1):
        for node in tree.nodes_at_depth(level):
            if tree.is_leaf(node):
                bigU[node] = H.U[node]
                bigV[node] = H.V[node]
            else:
                a, b = tree.children(node)
                ra = bigU[a].shape[1]
                bigU[node] = np.vstack([bigU[a] @ H.U[node][:ra],
                                        bigU[b] @ H.U[node][ra:]])
                rva = bigV[a].shape[1]
                bigV[node] = np.vstack([bigV[a] @ H.V[node][:rva],
                                        bigV[b] @ H.V[node][rva:]])
    return bigU, bigV


def hss_to_dense(H):
    """Reconstruct the dense matrix represented by an HSS form."""
    tree = H.tree
    n = tree.n
    if tree.depth == 0:
        return H.D[tree.root].copy()
    bigU, bigV = big_bases(H)
    M = np.zeros((n, n))
    for leaf in tree.leaves():
        lo, hi = tree.range(leaf)
        M[lo:hi, lo:hi] = H.D[leaf]
    for level in range(tree.depth - 1, -1, -1):
        for parent in tree.nodes_at_depth(level):
            a, b = tree.children(parent)
            alo, ahi = tree.range(a)
            blo, bhi = tree.range(b)
            Bab, Bba = H.B[parent]
            M[alo:ahi, blo:bhi] = bigU[a] @ Bab @ bigV[b].T
            M[blo:bhi, alo:ahi] = bigU[b] @ Bba @ bigV[a].T
    return M


def hss_matvec(H, X):
    """Product hss_to_dense(H) @ X computed in O(n r cols(X)) time."""
    tree = H.tree
    X = np.asarray(X, dtype=float)
    vec_in = X.ndim == 1
    if vec_in:
        X = X[:, None]
    if X.shape[0] != tree.n:
        raise ContractError(f"operand has {X.shape[0]} rows, expected {tree.n}")
    if tree.depth == 0:
        Y = H.D[tree.root] @ X
        return Y[:, 0] if vec_in else Y

    # upward: xhat[node] = V_big[node]^T X[range]
    xhat = {}
    for level in range(tree.depth, 0, -1):
        for node in tree.nodes_at_depth(level):
            if tree.is_leaf(node):
                lo, hi = tree.range(node)
                xhat[node] = H.V[node].T @ X[lo:hi]
            else:
                a, b = tree.children(node)
                xhat[node] = H.V[node].T @ np.vstack([xhat[a], xhat[b]])

    # downward: coefficient g[node] of U_big[node] in the output
    g = {}
    for level in range(0, tree.depth):
        for parent in tree.nodes_at_depth(level):
            a, b = tree.children(parent)
            Bab, Bba = H.B[parent]
            ga = Bab @ xhat[b]
            gb = Bba @ xhat[a]
            if parent in g:
                carried = H.U[parent] @ g[parent]
                ra = H.U[a].shape[1]
                ga = ga + carried[:ra]
                gb = gb + carried[ra:]
            g[a] = ga
            g[b] = gb

    Y = np.zeros_like(X)
    for leaf in tree.leaves():
        lo, hi = tree.range(leaf)
        Y[lo:hi] = H.D[leaf] @ X[lo:hi] + H.U[leaf] @ g[leaf]
    return Y[:, 0] if vec_in else Y


def hss_rank(H, tol=1e-12):
    """Maximum tol-truncated numerical rank over all sibling coupling blocks.

    The big bases are orthonormal, so the singular values of the represented
    off-diagonal blocks equal those of the stored couplings.
    """
    svals = []
    for Bab, Bba in H.B.values():
        for blk in (Bab, Bba):
            if blk.size:
                svals.append(np.linalg.svd(blk, compute_uv=False))
    if not svals:
        return 0
    scale = max(s[0] for s in svals if s.size)
    if scale == 0.0:
        return 0
    return int(max(np.sum(s >= tol * scale) for s in svals))

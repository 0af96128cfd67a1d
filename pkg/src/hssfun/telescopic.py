"""Telescopic decompositions and conversions to and from the HSS form.

A telescopic decomposition stores, per node, orthonormal factors U, V (absent
at the root) and diagonal blocks D; the represented matrix satisfies
A = blkdiag(D) + blkdiag(U) A' blkdiag(V)^T level by level, with A' one level
shallower. The ``standard`` flag asserts that every D equals the corresponding
diagonal block of the level matrix, which is the form in one-to-one
correspondence with the classical HSS representation.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .cluster_tree import ClusterTree
from .errors import ConsistencyError, ContractError
from .hss import HssMatrix, _check_orthonormal, _key, _unkey

log = logging.getLogger(__name__)

TO_HSS_RESIDUE_RTOL = 1e-10


@dataclass
class TelescopicDecomposition:
    tree: ClusterTree
    U: dict                  # non-root nodes
    V: dict                  # non-root nodes (same objects as U when symmetric)
    D: dict                  # all nodes
    symmetric: bool = False
    standard: bool = False

    @property
    def n(self):
        return self.tree.n

    def rank(self, node):
        return self.U[node].shape[1]

    def max_rank(self):
        return max((u.shape[1] for u in self.U.values()), default=0)

    def row_split(self, node):
        """Row sizes (left child, right child) of a non-leaf D block."""
        a, b = self.tree.children(node)
        return self.U[a].shape[1], self.U[b].shape[1]

    def col_split(self, node):
        a, b = self.tree.children(node)
        return self.V[a].shape[1], self.V[b].shape[1]

    def validate(self):
        for node, U in self.U.items():
            _check_orthonormal(U, f"U{node}")
            _check_orthonormal(self.V[node], f"V{node}")
        if self.symmetric:
            for node in self.U:
                if not np.array_equal(self.V[node], self.U[node]):
                    raise ContractError(f"symmetric flag requires V=U at node {node}")
            for node, Dblk in self.D.items():
                if Dblk.size and np.abs(Dblk - Dblk.T).max() > 1e-11 * max(np.linalg.norm(Dblk), 1e-300):
                    raise ContractError(f"symmetric flag requires symmetric D at node {node}")
        return self

    def to_json(self):
        data = {
            "kind": "telescopic",
            "tree": self.tree.to_dict(),
            "symmetric": self.symmetric,
            "standard": self.standard,
            "U": {_key(n): u.tolist() for n, u in self.U.items()},
            "V": {_key(n): v.tolist() for n, v in self.V.items()},
            "D": {_key(n): d.tolist() for n, d in self.D.items()},
        }
        return json.dumps(data)

    @staticmethod
    def from_json(text):
        data = json.loads(text)
        if data.get("kind") != "telescopic":
            raise ContractError(f"expected kind 'telescopic', got {data.get('kind')!r}")
        tree = ClusterTree.from_dict(data["tree"])
        U = {_unkey(k): np.array(v, dtype=float) for k, v in data["U"].items()}
        if data["symmetric"]:
            V = U
        else:
            V = {_unkey(k): np.array(v, dtype=float) for k, v in data["V"].items()}
        D = {_unkey(k): np.array(v, dtype=float) for k, v in data["D"].items()}
        return TelescopicDecomposition(tree=tree, U=U, V=V, D=D,
                                       symmetric=bool(data["symmetric"]),
                                       standard=bool(data["standard"]))


def from_hss(H):
    """Telescopic decomposition reusing the HSS generators unchanged.

    Leaf D blocks are the stored diagonal blocks; non-leaf D blocks are the
    zero-diagonal 2x2 coupling arrangements, so the result is standard and
    has the same rank.
    """
    tree = H.tree
    D = {leaf: H.D[leaf].copy() for leaf in tree.leaves()}
    for level in range(tree.depth - 1, -1, -1):
        for parent in tree.nodes_at_depth(level):
            a, b = tree.children(parent)
            Bab, Bba = H.B[parent]
            ra, rb = H.U[a].shape[1], H.U[b].shape[1]
            ca, cb = H.V[a].shape[1], H.V[b].shape[1]
            Dblk = np.zeros((ra + rb, ca + cb))
            Dblk[:ra, ca:] = Bab
            Dblk[ra:, :ca] = Bba
            D[parent] = Dblk
    U = dict(H.U)
    V = U if H.symmetric else dict(H.V)
    return TelescopicDecomposition(tree=tree, U=U, V=V, D=D,
                                   symmetric=H.symmetric, standard=True)


def _assemble_blkdiag(blocks):
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    M = np.zeros((rows, cols))
    r0, c0 = 0, 0
    for b in blocks:
        M[r0:r0 + b.shape[0], c0:c0 + b.shape[1]] = b
        r0 += b.shape[0]
        c0 += b.shape[1]
    return M


def to_dense(T):
    """Reconstruct the represented matrix: A <- D_root, then per level
    A <- blkdiag(D) + blkdiag(U) A blkdiag(V)^T from the root down."""
    tree = T.tree
    A = T.D[tree.root].copy()
    for level in range(1, tree.depth + 1):
        nodes = tree.nodes_at_depth(level)
        Ublk = _assemble_blkdiag([T.U[n] for n in nodes])
        Vblk = Ublk if T.symmetric else _assemble_blkdiag([T.V[n] for n in nodes])
        Dblk = _assemble_blkdiag([T.D[n] for n in nodes])
        A = Dblk + Ublk @ A @ Vblk.T
    return A


def matvec(T, X):
    """Product to_dense(T) @ X without materializing the dense matrix."""
    tree = T.tree
    X = np.asarray(X, dtype=float)
    vec_in = X.ndim == 1
    if vec_in:
        X = X[:, None]
    if X.shape[0] != tree.n:
        raise ContractError(f"operand has {X.shape[0]} rows, expected {tree.n}")
    ws = [X]
    for level in range(tree.depth, 0, -1):
        w = ws[-1]
        parts = []
        off = 0
        for node in tree.nodes_at_depth(level):
            V = T.V[node]
            parts.append(V.T @ w[off:off + V.shape[0]])
            off += V.shape[0]
        ws.append(np.vstack(parts) if parts else w[:0])
    y = T.D[tree.root] @ ws[-1]
    for level in range(1, tree.depth + 1):
        w = ws[tree.depth - level]
        parts = []
        off_d, off_y = 0, 0
        for node in tree.nodes_at_depth(level):
            U = T.U[node]
            Dblk = T.D[node]
            seg = Dblk @ w[off_d:off_d + Dblk.shape[1]]
            seg = seg + U @ y[off_y:off_y + U.shape[1]]
            parts.append(seg)
            off_d += Dblk.shape[1]
            off_y += U.shape[1]
        y = np.vstack(parts)
    return y[:, 0] if vec_in else y


def _topdown_blocks(T):
    """Diagonal blocks of every level matrix, computed top down.

    For node tau with parent sigma, the block is
    D_tau + U_tau (parent block restricted to tau's slot) V_tau^T;
    at the root it is D_root. Leaf entries are the principal submatrices
    A_{tau,tau} of the represented matrix.
    """
    tree = T.tree
    psi = {tree.root: T.D[tree.root]}
    for level in range(0, tree.depth):
        for parent in tree.nodes_at_depth(level):
            a, b = tree.children(parent)
            ra, rb = T.row_split(parent)
            ca, cb = T.col_split(parent)
            P = psi[parent]
            psi[a] = T.D[a] + T.U[a] @ P[:ra, :ca] @ T.V[a].T
            psi[b] = T.D[b] + T.U[b] @ P[ra:, ca:] @ T.V[b].T
    return psi


def principal_submatrices(T):
    """Diagonal blocks A_{tau,tau} of the represented matrix for every leaf."""
    psi = _topdown_blocks(T)
    return {leaf: psi[leaf] for leaf in T.tree.leaves()}


def to_standard(T):
    """Standard telescopic decomposition of the same matrix with the same bases.

    Implemented as a single memoized top-down sweep: the level-by-level
    correction of the non-standard D blocks telescopes into replacing each
    non-leaf block by its parent-adjusted value with the diagonal sub-blocks
    zeroed, while leaves receive the true principal submatrices.
    """
    tree = T.tree
    psi = _topdown_blocks(T)
    C = {}
    for node in tree.all_nodes():
        if tree.is_leaf(node):
            C[node] = psi[node].copy()
        else:
            ra, _ = T.row_split(node)
            ca, _ = T.col_split(node)
            blk = psi[node].copy()
            blk[:ra, :ca] = 0.0
            blk[ra:, ca:] = 0.0
            C[node] = blk
    if T.symmetric:
        C = {node: (blk + blk.T) / 2 for node, blk in C.items()}
    return TelescopicDecomposition(tree=tree, U=T.U, V=T.V, D=C,
                                   symmetric=T.symmetric, standard=True)


def to_hss(T):
    """Read the classical HSS generators off a standard telescopic decomposition.

    Couplings come from the zero-diagonal structure of non-leaf D blocks; a
    diagonal residue above 1e-10 of the block norm signals a non-standard
    decomposition and raises ConsistencyError. Non-standard inputs are
    standardized first (logged).
    """
    if not T.standard:
        log.info("to_hss: input not flagged standard; standardizing first")
        T = to_standard(T)
    tree = T.tree
    if tree.depth == 0:
        return HssMatrix(tree=tree, U={}, V={}, D={tree.root: T.D[tree.root].copy()},
                         B={}, symmetric=T.symmetric)
    D = {leaf: T.D[leaf].copy() for leaf in tree.leaves()}
    B = {}
    for level in range(tree.depth - 1, -1, -1):
        for parent in tree.nodes_at_depth(level):
            Dblk = T.D[parent]
            ra, _ = T.row_split(parent)
            ca, _ = T.col_split(parent)
            scale = np.linalg.norm(Dblk)
            residue = np.hypot(np.linalg.norm(Dblk[:ra, :ca]),
                               np.linalg.norm(Dblk[ra:, ca:]))
            if residue > TO_HSS_RESIDUE_RTOL * max(scale, 1e-300):
                raise ConsistencyError(
                    f"non-negligible diagonal blocks in D at node {parent} "
                    f"({residue:.2e} vs norm {scale:.2e}): decomposition is not standard")
            Bab = Dblk[:ra, ca:].copy()
            Bba = Bab.T.copy() if T.symmetric else Dblk[ra:, :ca].copy()
            B[parent] = (Bab, Bba)
    U = dict(T.U)
    V = U if T.symmetric else dict(T.V)
    return HssMatrix(tree=tree, U=U, V=V, D=D, B=B, symmetric=T.symmetric)


def telescopic_rank(T):
    return T.max_rank()

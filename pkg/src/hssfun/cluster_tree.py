"""Perfect binary cluster trees over contiguous index ranges."""

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ClusterTree:
    """Perfect binary tree of contiguous index ranges covering [0, n).

    Nodes are identified by (depth, position) pairs with position counted
    left to right at each depth. ``ranges[d][p]`` holds the half-open range
    (lo, hi) of node (d, p). Every non-leaf splits left-heavy: the left
    child gets ceil(size/2) indices.
    """

    n: int
    depth: int
    ranges: tuple = field(repr=False)

    def range(self, node):
        d, p = node
        return self.ranges[d][p]

    def size(self, node):
        lo, hi = self.range(node)
        return hi - lo

    def is_leaf(self, node):
        return node[0] == self.depth

    def children(self, node):
        d, p = node
        if d >= self.depth:
            raise ValueError(f"node {node} is a leaf")
        return (d + 1, 2 * p), (d + 1, 2 * p + 1)

    def parent(self, node):
        d, p = node
        if d == 0:
            raise ValueError("root has no parent")
        return (d - 1, p // 2)

    def sibling(self, node):
        d, p = node
        if d == 0:
            raise ValueError("root has no sibling")
        return (d, p ^ 1)

    @property
    def root(self):
        return (0, 0)

    def leaves(self):
        return self.nodes_at_depth(self.depth)

    def nodes_at_depth(self, level):
        """Nodes of one depth in left-to-right range order."""
        if not 0 <= level <= self.depth:
            raise ValueError(f"depth {level} out of range [0, {self.depth}]")
        return [(level, p) for p in range(2**level)]

    def all_nodes(self):
        return [node for d in range(self.depth + 1)
                for node in self.nodes_at_depth(d)]

    def num_nodes(self):
        return 2 ** (self.depth + 1) - 1

    def leaf_sizes(self):
        return [hi - lo for lo, hi in self.ranges[self.depth]]

    def to_dict(self):
        return {"n": self.n, "depth": self.depth,
                "leaf_sizes": self.leaf_sizes()}

    @staticmethod
    def from_dict(data):
        sizes = data["leaf_sizes"]
        tree = _tree_from_leaf_sizes(sizes)
        if tree.n != data["n"] or tree.depth != data["depth"]:
            raise ValueError("inconsistent cluster tree metadata")
        return tree


def build_tree(n, threshold):
    """Shallowest perfect tree over [0, n) with all leaves of size <= threshold.

    Ranges split left-heavy (left child gets ceil(size/2)), so depth is
    max(0, ceil(log2(n / threshold))).
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if threshold < 1:
        raise ValueError(f"threshold must be positive, got {threshold}")
    depth = 0 if n <= threshold else math.ceil(math.log2(n / threshold))
    return _build_with_depth(n, depth)


def build_balanced_tree(m, depth):
    """Depth-L tree over [0, m * 2**L) with every leaf of size exactly m."""
    if m < 1:
        raise ValueError(f"leaf size must be positive, got {m}")
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    return _build_with_depth(m * 2**depth, depth)


def nodes_at_depth(tree, level):
    return tree.nodes_at_depth(level)


def _build_with_depth(n, depth):
    levels = [((0, n),)]
    for _ in range(depth):
        nxt = []
        for lo, hi in levels[-1]:
            mid = lo + (hi - lo + 1) // 2
            nxt.append((lo, mid))
            nxt.append((mid, hi))
        levels.append(tuple(nxt))
    return ClusterTree(n=n, depth=depth, ranges=tuple(levels))


def _tree_from_leaf_sizes(sizes):
    # rebuild assuming the stored sizes came from the left-heavy rule
    n = sum(sizes)
    depth = int(math.log2(len(sizes)))
    if 2**depth != len(sizes):
        raise ValueError("leaf count must be a power of two")
    tree = _build_with_depth(n, depth)
    if tree.leaf_sizes() != list(sizes):
        raise ValueError("leaf sizes do not follow the left-heavy split rule")
    return tree

"""Cluster hierarchies inducing strong kernels, and assignment kernels on them.

A :class:`ClusterTree` has every dataset vertex at a leaf.  Each node carries a
cumulative weight ``omega``; the strong kernel between two vertices is the
``omega`` of the deepest common ancestor of their leaves, and the optimal
assignment under it equals a weighted histogram intersection.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, ParameterError


def omega_at_depth(depth: int) -> float:
    """(d-1)/d for a node at distance d >= 1 from the root; 0 at the root."""
    if depth <= 0:
        return 0.0
    return (depth - 1) / depth


class ClusterTree:
    """Rooted tree over dataset vertices.

    Nodes are integers, the root is 0.  ``leaf_of[v]`` is the node holding
    vertex ``v``.  ``omega`` is non-decreasing along root-to-leaf paths and
    ``weights[v] = omega[v] - omega[parent[v]]`` (``omega[root]`` at the root).
    """

    def __init__(self, parent: Sequence[int], leaf_of: Sequence[int], omega: Optional[Sequence[float]] = None):
        self.parent = np.asarray(parent, dtype=np.int64)
        n = self.parent.size
        if n == 0 or self.parent[0] != -1 or (self.parent[1:] < 0).any():
            raise ContractError("node 0 must be the only root")
        if (self.parent[1:] >= np.arange(1, n)).any():
            raise ContractError("parents must precede their children")
        self.depth = np.zeros(n, dtype=np.int64)
        for v in range(1, n):
            self.depth[v] = self.depth[self.parent[v]] + 1
        self.children: list[list[int]] = [[] for _ in range(n)]
        for v in range(1, n):
            self.children[self.parent[v]].append(v)
        self.leaf_of = np.asarray(leaf_of, dtype=np.int64)
        if self.leaf_of.size and (self.leaf_of.min() < 0 or self.leaf_of.max() >= n):
            raise ContractError("leaf_of refers to a nonexistent node")
        if omega is None:
            omega = [omega_at_depth(d) for d in self.depth]
        self.omega = np.asarray(omega, dtype=float)
        self.weights = self.omega.copy()
        self.weights[1:] -= self.omega[self.parent[1:]]
        if (self.weights < 0).any():
            bad = int(np.argmin(self.weights))
            raise ContractError(f"omega decreases from node {self.parent[bad]} to node {bad}")

    @property
    def n_nodes(self) -> int:
        return self.parent.size

    @property
    def root(self) -> int:
        return 0

    def path_to_root(self, node: int) -> list[int]:
        out = [int(node)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out

    def covers(self, n_vertices: int) -> bool:
        return self.leaf_of.size == n_vertices

    @property
    def ancestors(self) -> sp.csr_matrix:
        """nV x n_nodes indicator: entry (v, a) is 1 iff a lies on v's leaf-to-root path."""
        if not hasattr(self, "_ancestors"):
            # every node's ancestor set, built top-down
            rows, cols = [], []
            anc: list[list[int]] = [[0]] + [None] * (self.n_nodes - 1)
            for v in range(1, self.n_nodes):
                anc[v] = anc[self.parent[v]] + [v]
            for x, leaf in enumerate(self.leaf_of):
                path = anc[leaf]
                rows.extend([x] * len(path))
                cols.extend(path)
            self._ancestors = sp.csr_matrix(
                (np.ones(len(rows)), (rows, cols)), shape=(self.leaf_of.size, self.n_nodes)
            )
        return self._ancestors

    def strong_kernel(self, x: int, y: int) -> float:
        """omega of the deepest common ancestor of the leaves of x and y."""
        ax = set(self.path_to_root(self.leaf_of[x]))
        for node in self.path_to_root(self.leaf_of[y]):
            if node in ax:
                return float(self.omega[node])
        raise ContractError("leaves share no ancestor")

    def dump(self) -> str:
        """Indented text listing: node id, depth, omega, member count."""
        counts = np.bincount(self.leaf_of, minlength=self.n_nodes).astype(int)
        for v in range(self.n_nodes - 1, 0, -1):
            counts[self.parent[v]] += counts[v]
        lines = []
        stack = [0]
        while stack:
            v = stack.pop()
            lines.append(f"{'  ' * self.depth[v]}{v} depth={self.depth[v]} omega={self.omega[v]:.4g} members={counts[v]}")
            stack.extend(reversed(self.children[v]))
        return "\n".join(lines)


@dataclass
class Histogram:
    """Sparse node -> member count over one tree."""

    counts: dict
    tree: ClusterTree = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.counts.get(self.tree.root, 0))


def histogram(members, tree: ClusterTree) -> Histogram:
    """Count set members in every subtree of `tree`."""
    counts: dict[int, int] = {}
    n = tree.leaf_of.size
    for x in members:
        x = int(x)
        if not 0 <= x < n:
            raise ContractError(f"vertex {x} has no leaf in the tree")
        for node in tree.path_to_root(tree.leaf_of[x]):
            counts[node] = counts.get(node, 0) + 1
    return Histogram(counts, tree)


def assignment_value(hx: Histogram, hy: Histogram, tree: ClusterTree) -> float:
    """Optimal assignment value: sum over nodes of w(v) * min(H_X(v), H_Y(v))."""
    if hx.tree is not tree or hy.tree is not tree:
        raise ContractError("histograms were built on a different tree")
    if len(hy.counts) < len(hx.counts):
        hx, hy = hy, hx
    w = tree.weights
    total = 0.0
    for node in sorted(hx.counts):
        c = hy.counts.get(node)
        if c:
            total += w[node] * min(hx.counts[node], c)
    return float(total)


def histogram_matrix(sets: sp.spmatrix, tree: ClusterTree) -> sp.csr_matrix:
    """Histograms of many sets at once; `sets` is an (n_sets x nV) 0/1 membership matrix."""
    if sets.shape[1] != tree.leaf_of.size:
        raise ContractError("tree leaves do not cover all dataset vertices")
    H = (sp.csr_matrix(sets) @ tree.ancestors).tocsr()
    H.sort_indices()
    return H


def unary_features(H: sp.spmatrix, tree: ClusterTree) -> sp.csr_matrix:
    """Explicit feature map of the histogram intersection kernel.

    Node v with count c becomes c ones (scaled by sqrt(w(v))) in v's block of
    columns, so that ``F[i] . F[j] = sum_v w(v) min(H_i(v), H_j(v))``.  Nodes
    with zero weight are dropped.
    """
    H = sp.csr_matrix(H)
    H.sort_indices()
    coo = H.tocoo()
    w = tree.weights
    keep = (w[coo.col] > 0) & (coo.data > 0)
    rows, nodes, cnt = coo.row[keep], coo.col[keep], np.rint(coo.data[keep]).astype(np.int64)
    width = np.zeros(tree.n_nodes, dtype=np.int64)
    if nodes.size:
        np.maximum.at(width, nodes, cnt)
    offset = np.concatenate([[0], np.cumsum(width)])
    # expand each (row, node, count) into `count` unit columns
    rep_rows = np.repeat(rows, cnt)
    start = np.repeat(offset[nodes], cnt)
    within = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    vals = np.repeat(np.sqrt(w[nodes]), cnt)
    F = sp.csr_matrix((vals, (rep_rows, start + within)), shape=(H.shape[0], int(offset[-1])))
    F.sort_indices()
    return F


def pairwise_assignment(H: sp.spmatrix, tree: ClusterTree, cols=None) -> np.ndarray:
    """Matrix of assignment values between the rows of H (or vs rows `cols`)."""
    Hd = np.asarray(sp.csr_matrix(H).todense())
    w = tree.weights
    active = w > 0
    Hd, w = Hd[:, active], w[active]
    Hc = Hd if cols is None else Hd[np.asarray(cols, dtype=int)]
    out = np.empty((Hd.shape[0], Hc.shape[0]))
    for j in range(Hc.shape[0]):
        out[:, j] = np.minimum(Hd, Hc[j]) @ w
    return out


# -- kernel k-means ---------------------------------------------------------

SAME_POINT_RTOL = 1e-10


def _zero_small(d2, scale):
    """Clip squared distances at 0 and treat round-off level ones as exact zeros."""
    d2 = np.maximum(d2, 0.0)
    d2[d2 <= SAME_POINT_RTOL * np.abs(scale)] = 0.0
    return d2


class _GramSpace:
    def __init__(self, K):
        self.K = np.asarray(K, dtype=float)
        self.diag = np.diag(self.K).copy()
        self.n = self.K.shape[0]

    def point_sqdist(self, j, idx=slice(None)):
        scale = self.diag[idx] + self.diag[j]
        return _zero_small(self.diag[idx] + self.diag[j] - 2 * self.K[idx, j], scale)

    def cluster_sqdist(self, labels, k):
        Z = np.zeros((self.n, k))
        Z[np.arange(self.n), labels] = 1.0
        cnt = Z.sum(axis=0)
        KZ = self.K @ Z
        within = np.einsum("ik,ik->k", Z, KZ)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.diag[:, None] - 2 * KZ / cnt + within / cnt**2
        d[:, cnt == 0] = np.inf
        return np.maximum(d, 0.0)


class _FeatureSpace:
    def __init__(self, X):
        self.X = np.asarray(X, dtype=float)
        self.sq = np.einsum("ij,ij->i", self.X, self.X)
        self.n = self.X.shape[0]

    def point_sqdist(self, j, idx=slice(None)):
        scale = self.sq[idx] + self.sq[j]
        return _zero_small(self.sq[idx] + self.sq[j] - 2 * self.X[idx] @ self.X[j], scale)

    def cluster_sqdist(self, labels, k):
        cnt = np.bincount(labels, minlength=k).astype(float)
        sums = np.zeros((k, self.X.shape[1]))
        np.add.at(sums, labels, self.X)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = sums / cnt[:, None]
        d = self.sq[:, None] - 2 * self.X @ mu.T + np.einsum("kj,kj->k", mu, mu)
        d[:, cnt == 0] = np.inf
        return np.maximum(d, 0.0)


def _kmeans(space, n_clusters: int, rng: np.random.Generator, max_iter: int) -> np.ndarray:
    n = space.n
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if n_clusters < 1:
        raise ParameterError("n_clusters must be >= 1")
    if n_clusters == 1:
        return np.zeros(n, dtype=np.int64)

    # probabilistic farthest-point seeding; stops early once every point
    # coincides with a center, so identical points are never split
    centers = [int(rng.integers(n))]
    d2 = space.point_sqdist(centers[0])
    while len(centers) < n_clusters:
        total = d2.sum()
        if total <= 0:
            break
        c = int(rng.choice(n, p=d2 / total))
        centers.append(c)
        d2 = np.minimum(d2, space.point_sqdist(c))
    k = len(centers)
    dist = np.column_stack([space.point_sqdist(c) for c in centers])
    labels = np.argmin(dist, axis=1)

    for _ in range(max_iter):
        labels = _repair_empty(space, labels, k)
        dist = space.cluster_sqdist(labels, k)
        new = np.argmin(dist, axis=1)
        new = _repair_empty(space, new, k)
        if np.array_equal(new, labels):
            break
        labels = new
    # compact ids in order of cluster index
    used = np.unique(labels)
    return np.searchsorted(used, labels).astype(np.int64)


def _repair_empty(space, labels, k):
    """Move the point farthest from its centroid into each empty cluster."""
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        dist = space.cluster_sqdist(labels, k)
        own = dist[np.arange(space.n), labels]
        sizes = np.bincount(labels, minlength=k)
        own[sizes[labels] <= 1] = -1.0
        far = int(np.argmax(own))
        if own[far] <= 0:
            break
        labels[far] = c
    return labels


def kernel_kmeans(K, n_clusters: int, seed=None, max_iter: int = 50) -> np.ndarray:
    """Kernel k-means on a Gram matrix; returns cluster ids ``0..k'-1`` with k' <= n_clusters.

    `seed` may be an int or a ``numpy.random.Generator``.
    """
    return _kmeans(_GramSpace(K), n_clusters, np.random.default_rng(seed), max_iter)


def feature_kmeans(X, n_clusters: int, seed=None, max_iter: int = 50) -> np.ndarray:
    """Ordinary k-means on explicit feature rows (same seeding and repair as kernel_kmeans)."""
    return _kmeans(_FeatureSpace(X), n_clusters, np.random.default_rng(seed), max_iter)


def kmeans_objective(K, labels) -> float:
    """Sum of squared kernel-space distances of points to their cluster centroids."""
    K = np.asarray(K, dtype=float)
    labels = np.asarray(labels)
    total = 0.0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        block = K[np.ix_(idx, idx)]
        total += np.trace(block) - block.sum() / idx.size
    return float(total)


def build_hierarchy(state, depth: int = 4, branching: int = 4, seed=0, max_iter: int = 50) -> ClusterTree:
    """Recursive `branching`-way kernel k-means down to `depth` cluster levels.

    `state` is a vertex kernel state (anything with ``exact_matrix`` or
    ``features``) or a plain Gram matrix.  Nodes with fewer than `branching`
    members, and all nodes at depth `depth`, get one leaf per distinct
    member; members at zero kernel distance share a leaf.
    """
    if depth < 1:
        raise ParameterError("hierarchy depth must be >= 1")
    if branching < 2:
        raise ParameterError("hierarchy branching must be >= 2")
    rng = np.random.default_rng(seed)
    feats = getattr(state, "features", None)
    gram = getattr(state, "exact_matrix", None) if feats is None else None
    if feats is None and gram is None:
        gram = np.asarray(state, dtype=float)
    n = (feats if feats is not None else gram).shape[0]

    space = _FeatureSpace(feats) if feats is not None else _GramSpace(gram)

    def split(members):
        if feats is not None:
            return feature_kmeans(feats[members], branching, rng, max_iter)
        return kernel_kmeans(gram[np.ix_(members, members)], branching, rng, max_iter)

    def leaf_groups(members):
        # members at zero kernel distance share one leaf
        rest = members
        while rest.size:
            same = space.point_sqdist(rest[0], rest) == 0
            same[0] = True
            yield rest[same]
            rest = rest[~same]

    parent = [-1]
    leaf_of = np.full(n, -1, dtype=np.int64)
    queue = deque([(0, 0, np.arange(n))])
    while queue:
        node, d, members = queue.popleft()
        if d < depth and members.size >= branching:
            labels = split(members)
            for c in range(int(labels.max()) + 1 if members.size else 0):
                parent.append(node)
                queue.append((len(parent) - 1, d + 1, members[labels == c]))
        else:
            for group in leaf_groups(members):
                parent.append(node)
                leaf_of[group] = len(parent) - 1
    return ClusterTree(parent, leaf_of)

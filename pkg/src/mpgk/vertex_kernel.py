"""Vertex kernels updated by message passing.

Each iteration replaces the kernel between two vertices by ``alpha`` times
its old value plus ``beta`` times a kernel between their neighbourhoods,
either the sum over all neighbour pairs (R-convolution) or an optimal
assignment under a cluster hierarchy.

Exact mode keeps the full nN x nN matrix.  Nyström mode keeps features Φ
with ``Φ Φᵀ`` approximating it; each iteration evaluates only the columns
against the m landmark vertices (fixed at t=0) and refits.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractError, ParameterError
from .graph import GraphDataset, KernelParams
from .hierarchy import ClusterTree, build_hierarchy, histogram_matrix, unary_features
from .linalg import nystrom_from_columns

log = logging.getLogger(__name__)


@dataclass
class VertexKernelState:
    """The vertex kernel after `iteration` updates.

    ``neighbor_tree`` is the hierarchy that produced this state from the
    previous one (assignment updates only).
    """

    mode: str
    iteration: int
    exact_matrix: Optional[np.ndarray] = None
    features: Optional[np.ndarray] = None
    landmark_ids: Optional[np.ndarray] = None
    neighbor_tree: Optional[ClusterTree] = None

    def __post_init__(self):
        if self.mode == "exact":
            if self.exact_matrix is None or self.features is not None:
                raise ContractError("exact state needs exact_matrix and no features")
        elif self.mode == "nystrom":
            if self.features is None or self.landmark_ids is None or self.exact_matrix is not None:
                raise ContractError("nystrom state needs features and landmark_ids only")
        else:
            raise ContractError(f"unknown mode {self.mode!r}")

    @property
    def n_vertices(self) -> int:
        return (self.exact_matrix if self.mode == "exact" else self.features).shape[0]

    def matrix(self) -> np.ndarray:
        """Full vertex Gram (materialized from features in Nyström mode)."""
        if self.mode == "exact":
            return self.exact_matrix
        return self.features @ self.features.T

    def columns(self, cols) -> np.ndarray:
        cols = np.asarray(cols, dtype=int)
        if self.mode == "exact":
            return self.exact_matrix[:, cols]
        return self.features @ self.features[cols].T


class VertexData(NamedTuple):
    label: Optional[int] = None
    attributes: Optional[np.ndarray] = None
    degree: Optional[float] = None


def base_kernel(u: VertexData, v: VertexData, choice: str) -> float:
    """Kernel between the initial representations of two vertices."""
    def need(field):
        if getattr(u, field) is None or getattr(v, field) is None:
            raise ConfigurationError(f"base kernel {choice!r} needs vertex {field}")
    if choice == "delta":
        need("label")
        return float(u.label == v.label)
    if choice == "linear":
        need("attributes")
        return float(np.dot(u.attributes, v.attributes))
    if choice == "delta_plus_linear":
        need("label")
        need("attributes")
        return float(u.label == v.label) + float(np.dot(u.attributes, v.attributes))
    if choice == "degree":
        need("degree")
        return float(u.degree) * float(v.degree)
    raise ConfigurationError(f"unknown base kernel {choice!r}")


def vertex_data(ds: GraphDataset, gid: int) -> VertexData:
    return VertexData(
        None if ds.labels is None else int(ds.labels[gid]),
        None if ds.attributes is None else ds.attributes[gid],
        float(ds.degrees[gid]),
    )


def resolve_base_kernel(ds: GraphDataset, choice: Optional[str]) -> str:
    """Pick a default base kernel from the available data, or check `choice` against it."""
    if choice is None:
        if ds.has_labels and ds.has_attributes:
            return "delta_plus_linear"
        if ds.has_labels:
            return "delta"
        if ds.has_attributes:
            return "linear"
        return "degree"
    if choice in ("delta", "delta_plus_linear") and not ds.has_labels:
        raise ConfigurationError(f"base kernel {choice!r} needs discrete vertex labels")
    if choice in ("linear", "delta_plus_linear") and not ds.has_attributes:
        raise ConfigurationError(f"base kernel {choice!r} needs vertex attributes")
    if choice not in ("delta", "linear", "delta_plus_linear", "degree"):
        raise ConfigurationError(f"unknown base kernel {choice!r}")
    return choice


def base_kernel_block(ds: GraphDataset, choice: str, rows=None, cols=None) -> np.ndarray:
    """Base kernel between vertex sets `rows` and `cols` (default: all vertices)."""
    choice = resolve_base_kernel(ds, choice)
    all_ids = np.arange(ds.n_total)
    rows = all_ids if rows is None else np.asarray(rows, dtype=int)
    cols = all_ids if cols is None else np.asarray(cols, dtype=int)
    out = np.zeros((rows.size, cols.size))
    if choice in ("delta", "delta_plus_linear"):
        out += ds.labels[rows][:, None] == ds.labels[cols][None, :]
    if choice in ("linear", "delta_plus_linear"):
        X = ds.attributes
        out += X[rows] @ X[cols].T
    if choice == "degree":
        d = ds.degrees
        out += np.outer(d[rows], d[cols])
    return out


def _symmetrize(M: np.ndarray) -> np.ndarray:
    # a + b == b + a in IEEE arithmetic, so this is exactly symmetric
    return (M + M.T) / 2


def sample_landmarks(n_total: int, m: int, seed) -> np.ndarray:
    if m > n_total:
        raise ParameterError(f"{m} landmarks requested but the dataset has {n_total} vertices")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_total, size=m, replace=False))


def _seed(params: KernelParams, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence([params.seed, *key])


def init_state(ds: GraphDataset, params: KernelParams, landmarks=None) -> VertexKernelState:
    """The t=0 state: base kernel values, exact or as Nyström features.

    `landmarks` overrides the seeded landmark sample (Nyström mode only).
    """
    choice = resolve_base_kernel(ds, params.base_kernel)
    n = ds.n_total
    if landmarks is None and params.use_exact(n):
        return VertexKernelState("exact", 0, exact_matrix=_symmetrize(base_kernel_block(ds, choice)))
    if landmarks is None:
        landmarks = sample_landmarks(n, int(params.landmarks), _seed(params, 0))
    landmarks = np.asarray(landmarks, dtype=int)
    if landmarks.size > n:
        raise ParameterError(f"{landmarks.size} landmarks requested but the dataset has {n} vertices")
    C = base_kernel_block(ds, choice, cols=landmarks)
    feats = nystrom_from_columns(C, _symmetrize(C[landmarks]))
    return VertexKernelState("nystrom", 0, features=feats, landmark_ids=landmarks)


def _refit(state: VertexKernelState, C: np.ndarray, tree=None) -> VertexKernelState:
    L = state.landmark_ids
    feats = nystrom_from_columns(C, _symmetrize(C[L]))
    return VertexKernelState("nystrom", state.iteration + 1, features=feats, landmark_ids=L, neighbor_tree=tree)


def rr_update(state: VertexKernelState, ds: GraphDataset, alpha: float, beta: float) -> VertexKernelState:
    """One R-convolution step: alpha * k + beta * sum over neighbour pairs."""
    A = ds.adjacency
    if state.mode == "exact":
        K = state.exact_matrix
        AKA = (A @ (A @ K).T).T
        return VertexKernelState("exact", state.iteration + 1, exact_matrix=_symmetrize(alpha * K + beta * AKA))
    Phi = state.features
    L = state.landmark_ids
    APhi = A @ Phi
    C = alpha * (Phi @ Phi[L].T) + beta * (APhi @ APhi[L].T)
    return _refit(state, C)


def neighborhood_features(ds: GraphDataset, tree: ClusterTree) -> sp.csr_matrix:
    """Explicit features of the assignment kernel between vertex neighbourhoods."""
    if not tree.covers(ds.n_total):
        raise ContractError("tree leaves do not cover all dataset vertices")
    H = histogram_matrix(ds.adjacency, tree)
    return unary_features(H, tree)


def assign_update(state: VertexKernelState, ds: GraphDataset, alpha: float, beta: float,
                  tree: ClusterTree) -> VertexKernelState:
    """One assignment step: alpha * k + beta * optimal assignment of the neighbourhoods."""
    F = neighborhood_features(ds, tree)
    if state.mode == "exact":
        K = state.exact_matrix
        S = (F @ F.T).toarray()
        return VertexKernelState(
            "exact", state.iteration + 1, exact_matrix=_symmetrize(alpha * K + beta * S), neighbor_tree=tree
        )
    Phi = state.features
    L = state.landmark_ids
    C = alpha * (Phi @ Phi[L].T) + beta * (F @ F[L].T).toarray()
    return _refit(state, C, tree)


def neighbor_tree(state: VertexKernelState, params: KernelParams) -> ClusterTree:
    """Hierarchy over all vertices built from `state`, for the next neighbourhood update."""
    return build_hierarchy(
        state, params.hierarchy_depth, params.hierarchy_branching,
        seed=_seed(params, 1, state.iteration), max_iter=params.kmeans_iter,
    )


def run_message_passing(ds: GraphDataset, params: KernelParams, landmarks=None) -> list[VertexKernelState]:
    """Run `params.iterations` updates; return the states for t = 1..T."""
    t0 = time.perf_counter()
    state = init_state(ds, params, landmarks)
    log.info("init (%s, %d vertices): %.3fs", state.mode, ds.n_total, time.perf_counter() - t0)
    states = []
    for _ in range(params.iterations):
        t0 = time.perf_counter()
        if params.neighbor_aggregation == "R":
            state = rr_update(state, ds, params.alpha, params.beta)
        else:
            tree = neighbor_tree(state, params)
            log.info("hierarchy t=%d: %d nodes, %.3fs", state.iteration, tree.n_nodes, time.perf_counter() - t0)
            state = assign_update(state, ds, params.alpha, params.beta, tree)
        log.info("update t=%d: %.3fs", state.iteration, time.perf_counter() - t0)
        states.append(state)
    return states

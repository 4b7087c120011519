"""Graph-level kernels built from vertex kernel states."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateError, ParameterError
from .graph import GraphDataset, KernelParams
from .hierarchy import ClusterTree, build_hierarchy, histogram_matrix, pairwise_assignment
from .linalg import nystrom_from_columns
from .vertex_kernel import VertexKernelState, run_message_passing, sample_landmarks

log = logging.getLogger(__name__)


@dataclass
class GramMatrix:
    values: np.ndarray
    iteration: int
    variant: str
    normalized: bool = False
    mode: str = "exact"
    tree: Optional[ClusterTree] = None

    def symmetry_error(self) -> float:
        v = self.values
        return float(np.abs(v - v.T).max()) if v.size else 0.0

    def min_eigen_ratio(self) -> float:
        """Smallest eigenvalue divided by the largest (0 for an all-zero matrix)."""
        lam = np.linalg.eigvalsh((self.values + self.values.T) / 2)
        top = max(abs(lam[0]), abs(lam[-1]))
        return float(lam[0] / top) if top > 0 else 0.0


def gram_rconv(state: VertexKernelState, ds: GraphDataset) -> np.ndarray:
    """Sum of vertex kernel values over all vertex pairs of each graph pair."""
    S = ds.membership
    if state.mode == "exact":
        G = (S @ (S @ state.exact_matrix).T).T
        return (G + G.T) / 2
    s = S @ state.features
    return s @ s.T


def graph_histograms(ds: GraphDataset, tree: ClusterTree):
    return histogram_matrix(ds.membership, tree)


def gram_assign(state: VertexKernelState, ds: GraphDataset, tree: ClusterTree) -> np.ndarray:
    """Optimal assignment between the vertex sets of each graph pair under `tree`.

    `state` is not read directly; `tree` must have been built from it.
    """
    return pairwise_assignment(graph_histograms(ds, tree), tree)


def graph_tree(state: VertexKernelState, params: KernelParams) -> ClusterTree:
    return build_hierarchy(
        state, params.hierarchy_depth, params.hierarchy_branching,
        seed=np.random.SeedSequence([params.seed, 2, state.iteration]), max_iter=params.kmeans_iter,
    )


def normalize(K):
    """Cosine normalization K(i,j) / sqrt(K(i,i) K(j,j)).  Accepts a GramMatrix or an array."""
    values = K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    d = np.diag(values).copy()
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise DegenerateError(f"graph {bad[0]} has non-positive self-similarity {d[bad[0]]!r}")
    s = np.sqrt(d)
    out = values / s[:, None] / s[None, :]
    out = (out + out.T) / 2
    np.fill_diagonal(out, 1.0)
    if isinstance(K, GramMatrix):
        return GramMatrix(out, K.iteration, K.variant, True, K.mode, K.tree)
    return out


def compute_grams(ds: GraphDataset, params: KernelParams,
                  states: Optional[Sequence[VertexKernelState]] = None) -> list[GramMatrix]:
    """One graph Gram per iteration t = 1..T."""
    if states is None:
        states = run_message_passing(ds, params)
    grams = []
    for state in states:
        t0 = time.perf_counter()
        tree = None
        if params.graph_aggregation == "R":
            values = gram_rconv(state, ds)
        else:
            tree = graph_tree(state, params)
            values = gram_assign(state, ds, tree)
        g = GramMatrix(values, state.iteration, params.variant, False, state.mode, tree)
        if params.normalize:
            g = normalize(g)
        log.info("gram t=%d: %.3fs", state.iteration, time.perf_counter() - t0)
        grams.append(g)
    return grams


def _self_similarity(state, ds, params, H=None, tree=None) -> np.ndarray:
    if params.graph_aggregation == "A":
        return np.asarray(H @ tree.weights).ravel()
    S = ds.membership
    if state.mode == "exact":
        return np.asarray(S.multiply(S @ state.exact_matrix).sum(axis=1)).ravel()
    s = S @ state.features
    return np.einsum("ij,ij->i", s, s)


def graph_nystrom_features(ds: GraphDataset, states: Sequence[VertexKernelState], m_g: int,
                           params: KernelParams, seed=None) -> list[np.ndarray]:
    """Nyström features of the graph Gram, one N x m_g matrix per state.

    Only the columns against m_g sampled landmark graphs are evaluated.
    Components dropped by eigenvalue clipping are returned as zero columns
    so every block has exactly m_g columns.
    """
    N = len(ds)
    if m_g < 1 or m_g > N:
        raise ParameterError(f"graph landmarks must be in [1, {N}], got {m_g}")
    seed = params.seed if seed is None else seed
    S = ds.membership
    out = []
    for state in states:
        L = sample_landmarks(N, m_g, np.random.SeedSequence([seed, 3, state.iteration]))
        H = tree = None
        if params.graph_aggregation == "A":
            tree = graph_tree(state, params)
            H = graph_histograms(ds, tree)
            C = pairwise_assignment(H, tree, cols=L)
        elif state.mode == "exact":
            C = S @ (S[L] @ state.exact_matrix).T
        else:
            s = S @ state.features
            C = s @ s[L].T
        C = np.asarray(C, dtype=float)
        if params.normalize:
            d = np.sqrt(_self_similarity(state, ds, params, H, tree))
            if (d <= 0).any():
                raise DegenerateError(f"graph {int(np.argmin(d))} has zero self-similarity")
            C = C / d[:, None] / d[L][None, :]
        W = C[L]
        F = nystrom_from_columns(C, (W + W.T) / 2)
        if F.shape[1] < m_g:
            F = np.hstack([F, np.zeros((N, m_g - F.shape[1]))])
        out.append(F)
    return out

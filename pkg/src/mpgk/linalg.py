"""Symmetric eigendecomposition, Nyström features and kernel PCA."""
from __future__ import annotations

import logging
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ContractError, DegenerateError, ParameterError

log = logging.getLogger(__name__)

CLIP_RTOL = 1e-10


class EigenResult(NamedTuple):
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns


def _require_symmetric(A, rtol=1e-9) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {A.shape}")
    if A.size:
        scale = max(1.0, float(np.abs(A).max()))
        if np.abs(A - A.T).max() > rtol * scale:
            raise ContractError("matrix is not symmetric")
    return A


def sym_eig(A) -> EigenResult:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    A = _require_symmetric(A)
    w, U = np.linalg.eigh((A + A.T) / 2)
    return EigenResult(w[::-1].copy(), U[:, ::-1].copy())


def nystrom_from_columns(C, W) -> np.ndarray:
    """Features ``C U Λ^{-1/2}`` from the all-vs-landmark block C and landmark block W."""
    lam, U = sym_eig(W)
    if lam.size == 0 or lam[0] <= 0:
        raise DegenerateError("landmark kernel block has no positive eigenvalue")
    keep = lam > CLIP_RTOL * lam[0]
    return np.asarray(C, dtype=float) @ (U[:, keep] / np.sqrt(lam[keep]))


def nystrom_fit(column_eval: Callable[[np.ndarray], np.ndarray], all_ids: Sequence[int],
                landmark_ids: Sequence[int]) -> np.ndarray:
    """Nyström feature map.

    Parameters
    ----------
    column_eval : callable
        ``column_eval(landmark_ids)`` returns the ``len(all_ids) x m`` matrix of
        kernel values between every point in ``all_ids`` and each landmark.
    all_ids : sequence of int
        Points to embed; must contain every landmark.
    landmark_ids : sequence of int
        The m >= 1 landmark points.

    Returns
    -------
    ndarray, shape (len(all_ids), r)
        Features Φ with ``Φ Φᵀ`` approximating the kernel, r <= m after
        dropping eigenvalues below ``1e-10 λ_max`` of the landmark block.
    """
    landmark_ids = np.asarray(landmark_ids, dtype=int)
    if landmark_ids.size < 1:
        raise ParameterError("need at least one landmark")
    all_ids = np.asarray(all_ids, dtype=int)
    pos = {int(g): i for i, g in enumerate(all_ids)}
    try:
        rows = np.array([pos[int(g)] for g in landmark_ids])
    except KeyError as e:
        raise ContractError(f"landmark {e.args[0]} not among all_ids") from None
    C = np.asarray(column_eval(landmark_ids), dtype=float)
    if C.shape != (all_ids.size, landmark_ids.size):
        raise ContractError(f"column_eval returned shape {C.shape}")
    W = C[rows]
    return nystrom_from_columns(C, (W + W.T) / 2)


def center_kernel(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    return K - row - col + K.mean()


def kernel_pca(K, dims: int, center: bool = True) -> np.ndarray:
    """Project onto the top `dims` kernel principal components.

    Returns ``U_d Λ_d^{1/2}`` of the (double-centred) kernel matrix.  Negative
    eigenvalues among the top `dims` are clipped to zero with a warning.
    """
    K = _require_symmetric(K)
    if dims < 1 or dims > K.shape[0]:
        raise ParameterError(f"dims must be in [1, {K.shape[0]}], got {dims}")
    if center:
        K = center_kernel(K)
    lam, U = sym_eig(K)
    lam, U = lam[:dims], U[:, :dims]
    if (lam < 0).any():
        log.warning("kernel_pca: clipping %d negative eigenvalue(s) to zero", int((lam < 0).sum()))
        lam = np.clip(lam, 0, None)
    return U * np.sqrt(lam)

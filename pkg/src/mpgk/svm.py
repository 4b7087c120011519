"""C-SVM on precomputed kernels, trained with SMO.

The solver follows the libsvm scheme: maximal-violating-pair selection with
second order information for the second index, analytic two-variable
updates, and stopping once the KKT gap drops below `tol`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ContractError, DegenerateError, ParameterError

log = logging.getLogger(__name__)

TAU = 1e-12


@numba.njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    it = 0
    while it < max_iter:
        # i: maximal violator in I_up
        i = -1
        gmax = -np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        # j: second order choice in I_low
        j = -1
        gmin = np.inf
        obj_min = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0:
                        a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if a <= 0:
                            a = TAU
                        o = -(b * b) / a
                        if o < obj_min:
                            obj_min = o
                            j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            break
        it += 1

        Qij = y[i] * y[j] * K[i, j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ai -= delta
            aj += delta
            if s > C:
                if ai > C:
                    ai = C
                    aj = s - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = s
            if s > C:
                if aj > C:
                    aj = C
                    ai = s - C
            else:
                if ai < 0:
                    ai = 0.0
                    aj = s
        dai = ai - alpha[i]
        daj = aj - alpha[j]
        alpha[i] = ai
        alpha[j] = aj
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)

    # bias from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    total = 0.0
    n_free = 0
    for t in range(n):
        yG = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            n_free += 1
            total += yG
    rho = total / n_free if n_free > 0 else (ub + lb) / 2
    return alpha, -rho, it, gmax - gmin


@dataclass
class SvmModel:
    """Binary SVM: decision(x) = sum_i coef_i K(x, x_i) + bias over the support set.

    ``coef`` holds alpha_i * y_i.  ``classes`` is the (negative, positive) pair.
    """

    support: np.ndarray
    alpha: np.ndarray
    coef: np.ndarray
    bias: float
    C: float
    classes: tuple = (-1, 1)
    n_train: int = 0
    iterations: int = 0
    kkt_gap: float = 0.0

    def decision(self, K_rows) -> np.ndarray:
        """Decision values for rows of kernel values against all training points."""
        K_rows = np.atleast_2d(np.asarray(K_rows, dtype=float))
        if K_rows.shape[1] != self.n_train:
            raise ContractError(f"kernel rows have {K_rows.shape[1]} entries, expected {self.n_train}")
        return K_rows[:, self.support] @ self.coef + self.bias


def make_psd(K, rtol: float = 1e-8) -> np.ndarray:
    """Add a diagonal ridge if the smallest eigenvalue is below -rtol * lambda_max."""
    K = np.asarray(K, dtype=float)
    lam = np.linalg.eigvalsh((K + K.T) / 2)
    if lam.size and lam[0] < -rtol * max(lam[-1], 0.0):
        log.warning("kernel matrix not PSD (min eigenvalue %.3g); adding a ridge", lam[0])
        K = K + (-lam[0]) * np.eye(K.shape[0])
    return K


def svm_train(K, labels, C: float, tol: float = 1e-3, max_iter: int = 10_000_000) -> SvmModel:
    """Train a binary C-SVM on a precomputed training Gram and ±1 labels."""
    K = np.ascontiguousarray(K, dtype=float)
    y = np.asarray(labels, dtype=float)
    if K.shape != (y.size, y.size):
        raise ContractError(f"Gram shape {K.shape} does not match {y.size} labels")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ContractError("labels must be +1/-1")
    if np.unique(y).size < 2:
        raise DegenerateError("training set has a single class")
    if C <= 0:
        raise ParameterError("C must be positive")
    alpha, bias, it, gap = _smo(K, y, float(C), float(tol), int(max_iter))
    if gap >= tol:
        log.warning("SMO stopped after %d iterations with KKT gap %.3g", it, gap)
    sv = np.flatnonzero(alpha > 0)
    return SvmModel(sv, alpha, alpha[sv] * y[sv], float(bias), float(C), (-1, 1), y.size, int(it), float(gap))


class OneVsRestSVM:
    """Multiclass wrapper: one binary SVM per class (a single one for two classes)."""

    def __init__(self, C: float = 1.0, tol: float = 1e-3):
        self.C = C
        self.tol = tol

    def fit(self, K, y):
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise DegenerateError("need >= 2 classes")
        if self.classes_.size == 2:
            self.models_ = [svm_train(K, np.where(y == self.classes_[1], 1, -1), self.C, self.tol)]
        else:
            self.models_ = [svm_train(K, np.where(y == c, 1, -1), self.C, self.tol) for c in self.classes_]
        return self

    def decision_function(self, K_rows) -> np.ndarray:
        return np.column_stack([m.decision(K_rows) for m in self.models_])

    def predict(self, K_rows) -> np.ndarray:
        return svm_predict(self, K_rows)


def svm_predict(model, K_rows) -> np.ndarray:
    """Predicted class per row of test-vs-train kernel values.

    A binary :class:`SvmModel` predicts by sign (0 counts as positive); a
    :class:`OneVsRestSVM` predicts by argmax of decision values, ties going
    to the lowest class index.
    """
    if isinstance(model, SvmModel):
        return np.where(model.decision(K_rows) >= 0, model.classes[1], model.classes[0])
    d = model.decision_function(K_rows)
    if len(model.models_) == 1:
        return np.where(d[:, 0] >= 0, model.classes_[1], model.classes_[0])
    return model.classes_[np.argmax(d, axis=1)]

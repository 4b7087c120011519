"""Repeated stratified cross-validation with nested selection of C and T."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from .errors import DegenerateError, ParameterError
from .svm import OneVsRestSVM, make_psd

log = logging.getLogger(__name__)

DEFAULT_C_GRID = tuple(10.0 ** k for k in range(-3, 4))


@dataclass
class FoldResult:
    repeat: int
    fold: int
    C: float
    T: int
    accuracy: float


@dataclass
class CvReport:
    """Accuracy summary.  ``std`` is the population std over the repeat-level means."""

    mean_accuracy: float
    std_accuracy: float
    repeat_accuracies: list
    folds: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["repeat", "fold", "C", "T", "accuracy"])
            for f in self.folds:
                w.writerow([f.repeat, f.fold, repr(f.C), f.T, repr(f.accuracy)])
            w.writerow(["summary", "", "", "", repr(self.mean_accuracy)])
            w.writerow(["std", "", "", "", repr(self.std_accuracy)])

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _accuracy(grams, y, train, test, C, T, scaling="mean_diag") -> float:
    K = grams[T - 1]
    # C is relative to a training Gram with unit mean diagonal
    s = 1.0
    if scaling == "mean_diag":
        s = float(np.mean(np.diag(K)[train]))
        s = s if s > 0 else 1.0
    clf = OneVsRestSVM(C).fit(K[np.ix_(train, train)] / s, y[train])
    return float(np.mean(clf.predict(K[np.ix_(test, train)] / s) == y[test]))


def _check_folds(y, folds, what):
    smallest = np.bincount(np.unique(y, return_inverse=True)[1]).min()
    if folds > smallest:
        raise ParameterError(f"{what}: {folds} folds but the smallest class has {smallest} members")


def select_params(grams, y, train, C_grid, inner_folds, seed, scaling="mean_diag"):
    """(C, T) with the best mean accuracy over an inner stratified split of `train`.

    Ties go to the smallest T, then the smallest C.
    """
    _check_folds(y[train], inner_folds, "inner stratification")
    skf = StratifiedKFold(inner_folds, shuffle=True, random_state=seed)
    splits = [(train[a], train[b]) for a, b in skf.split(np.zeros(train.size), y[train])]
    best, best_acc = None, -1.0
    for T in range(1, len(grams) + 1):
        for C in C_grid:
            acc = np.mean([_accuracy(grams, y, a, b, C, T, scaling) for a, b in splits])
            if acc > best_acc:
                best, best_acc = (C, T), acc
    return best


def _run_fold(grams, y, r, f, train, test, C_grid, inner_folds, seed, scaling):
    C, T = select_params(grams, y, train, C_grid, inner_folds, seed, scaling)
    acc = _accuracy(grams, y, train, test, C, T, scaling)
    return FoldResult(r, f, float(C), int(T), acc)


def _seed_int(*key) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def cross_validate(grams: Sequence, labels, folds: int = 10, repeats: int = 10,
                   C_grid: Sequence[float] = DEFAULT_C_GRID, seed: int = 0,
                   inner_folds: Optional[int] = None, n_jobs: int = 1,
                   scaling: str = "mean_diag") -> CvReport:
    """Repeated stratified k-fold CV of a precomputed-kernel SVM.

    `grams` holds one N x N matrix (or GramMatrix) per iteration count T.  In
    every outer fold, C and T are chosen by an inner (folds-1)-fold split of
    the training part, then the SVM is retrained on all of it and scored on
    the held-out fold.

    With ``scaling="mean_diag"`` each training Gram (and its test rows) is
    divided by the mean of its diagonal before fitting, which makes the C
    grid independent of the kernel's overall magnitude; ``"none"`` uses the
    raw values.
    """
    if scaling not in ("mean_diag", "none"):
        raise ParameterError(f"unknown scaling {scaling!r}")
    y = np.asarray(labels)
    mats = [make_psd(getattr(g, "values", g)) for g in grams]
    if not mats:
        raise ParameterError("need at least one Gram matrix")
    N = y.size
    if any(m.shape != (N, N) for m in mats):
        raise ParameterError("every Gram must be N x N with N = number of labels")
    if np.unique(y).size < 2:
        raise DegenerateError("need >= 2 classes")
    inner_folds = folds - 1 if inner_folds is None else inner_folds
    _check_folds(y, folds, "stratification")

    tasks = []
    for r in range(repeats):
        skf = StratifiedKFold(folds, shuffle=True, random_state=_seed_int(seed, r))
        for f, (train, test) in enumerate(skf.split(np.zeros(N), y)):
            tasks.append((r, f, train, test, _seed_int(seed, r, f)))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_fold)(mats, y, r, f, train, test, C_grid, inner_folds, s, scaling)
        for r, f, train, test, s in tasks
    )
    per_repeat = [float(np.mean([x.accuracy for x in results if x.repeat == r])) for r in range(repeats)]
    report = CvReport(float(np.mean(per_repeat)), float(np.std(per_repeat)), per_repeat, list(results))
    log.info("cv: %.4f +- %.4f over %d repeats", report.mean_accuracy, report.std_accuracy, repeats)
    return report

"""Bond classification against ground truth, confusion counts and ROC curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class BondTruth:
    """Sign class (+1, -1, 0) of every candidate bond of the true network."""

    classes: np.ndarray
    candidates: np.ndarray

    @classmethod
    def from_params(cls, params, include_diagonal=False):
        classes = np.sign(params.couplings).astype(np.int8)
        candidates = np.ones(classes.shape, dtype=bool)
        if not include_diagonal:
            np.fill_diagonal(candidates, False)
        return cls(classes, candidates)

    @property
    def n_present(self) -> int:
        return int(np.count_nonzero(self.classes[self.candidates]))

    @property
    def n_absent(self) -> int:
        return int(self.candidates.sum()) - self.n_present


@dataclass(frozen=True)
class Confusion:
    fn_minus: int
    fn_plus: int
    fp_zero: int
    sign_swaps: int
    true_positives: int
    true_negatives: int

    @property
    def false_negatives(self) -> int:
        return self.fn_minus + self.fn_plus

    @property
    def total_error(self) -> int:
        """Every misclassified bond: FN + FP + sign swaps."""
        return self.fn_minus + self.fn_plus + self.fp_zero + self.sign_swaps


def classify(couplings, zero_tolerance=0.0):
    """``0`` where ``|J| <= zero_tolerance``, otherwise the sign of ``J``."""
    if zero_tolerance < 0:
        raise ParameterError("zero_tolerance must be non-negative")
    J = getattr(couplings, "couplings", couplings)
    J = np.asarray(J)
    return np.where(np.abs(J) <= zero_tolerance, 0, np.sign(J)).astype(np.int8)


def midgap_threshold(couplings, candidates=None):
    """Midpoint of the widest gap in the sorted ``|J|`` values.

    Meant for raw unregularised estimates with well separated clusters.
    """
    J = np.abs(np.asarray(couplings))
    vals = np.sort(J[candidates] if candidates is not None else J.ravel())
    if vals.size < 2:
        return float(vals[0]) if vals.size else 0.0
    gaps = np.diff(vals)
    k = int(np.argmax(gaps))
    return float(0.5 * (vals[k] + vals[k + 1]))


def confusion(truth, classes):
    classes = np.asarray(classes)
    if classes.shape != truth.classes.shape:
        raise ParameterError("class matrix shape does not match the truth")
    t = truth.classes[truth.candidates]
    c = classes[truth.candidates]
    present = t != 0
    return Confusion(
        fn_minus=int(np.sum((t == -1) & (c == 0))),
        fn_plus=int(np.sum((t == 1) & (c == 0))),
        fp_zero=int(np.sum(~present & (c != 0))),
        sign_swaps=int(np.sum(present & (c != 0) & (c != t))),
        true_positives=int(np.sum(present & (c == t))),
        true_negatives=int(np.sum(~present & (c == 0))),
    )


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC points sorted by ``(fpr, tpr)``, including both endpoints.

    ``labels`` holds the grid value of each point, ``+inf`` for ``(0, 0)``
    and ``-inf`` for ``(1, 1)``.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    labels: np.ndarray
    epsilon: float

    @property
    def auc(self) -> float:
        return 1.0 - self.epsilon

    def rows(self):
        return list(zip(self.labels.tolist(), self.fpr.tolist(), self.tpr.tolist()))


def rates(truth, classes):
    """``(FPR, TPR)``; a present bond detected with the wrong sign still counts as detected."""
    if truth.n_present == 0 or truth.n_absent == 0:
        raise ParameterError("ROC rates undefined: truth has no present or no absent bonds")
    cm = confusion(truth, classes)
    return cm.fp_zero / truth.n_absent, 1.0 - cm.false_negatives / truth.n_present


def roc_auc(fpr, tpr):
    """Trapezoid area of the points joined with ``(0, 0)`` and ``(1, 1)``.

    Points are deduplicated and ordered by ``(fpr, tpr)``, so runs of equal
    FPR become vertical segments and repeated points add no area.
    """
    pts = np.unique(np.column_stack([np.r_[0.0, fpr, 1.0], np.r_[0.0, tpr, 1.0]]), axis=0)
    return float(trapezoid(pts[:, 1], pts[:, 0]))


def roc_from_path(truth, path, zero_tolerance=0.0):
    if len(path) == 0:
        raise ParameterError("empty path")
    pts = [rates(truth, classify(path.trajectories[k], zero_tolerance)) for k in range(len(path))]
    fpr, tpr = map(np.asarray, zip(*pts))
    eps = 1.0 - roc_auc(fpr, tpr)
    # the endpoints stand for "everything absent" (+inf) and "everything present" (-inf)
    fpr = np.r_[0.0, fpr, 1.0]
    tpr = np.r_[0.0, tpr, 1.0]
    labels = np.r_[np.inf, np.asarray(path.lambda_grid, dtype=float), -np.inf]
    order = np.lexsort((tpr, fpr))
    return RocCurve(fpr[order], tpr[order], labels[order], float(min(max(eps, 0.0), 1.0)))


ERROR_COLUMNS = ("lambda", "fn_minus", "fn_plus", "fp_zero", "sign_swaps", "total_error")


def error_table(truth, path, zero_tolerance=0.0):
    """One row per grid point with the columns in :data:`ERROR_COLUMNS`."""
    rows = []
    for k, lam in enumerate(path.lambda_grid):
        cm = confusion(truth, classify(path.trajectories[k], zero_tolerance))
        rows.append((float(lam), cm.fn_minus, cm.fn_plus, cm.fp_zero, cm.sign_swaps, cm.total_error))
    return rows


def optimal_lambda(lambdas, total_errors):
    """Centre of the set of grid points attaining the minimum total error."""
    lambdas = np.asarray(lambdas, dtype=float)
    total_errors = np.asarray(total_errors, dtype=float)
    best = np.flatnonzero(total_errors == total_errors.min())
    return float(lambdas[best].mean())

"""K-fold cross-validation over a penalty path.

The grid is computed once on the full data; every training fold is
restandardized and refit on that same grid, and held-out rows are scored in
raw coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, PliableFit, predict
from .path import PathResult, fit_path
from .preprocess import StandardizationError
from .solver import SolverConfig

__all__ = ["CvResult", "evaluate", "k_fold_cv"]


def evaluate(fit: PliableFit, data: Dataset) -> float:
    """Mean squared prediction error of ``fit`` on ``data`` (same coordinates)."""
    resid = data.y - predict(fit, data.X, data.Z)
    return float(resid @ resid) / data.n_samples


@dataclass(frozen=True)
class CvResult:
    """Per-lambda CV curve plus the full-data path it was computed around.

    ``idx_min`` minimizes the CV mean; ``idx_1se`` is the largest penalty
    whose mean lies within one standard error of that minimum, so
    ``idx_1se <= idx_min`` on the decreasing grid.
    """

    lambdas: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    idx_min: int
    idx_1se: int
    path: PathResult

    @property
    def lam_min(self) -> float:
        return float(self.lambdas[self.idx_min])

    @property
    def lam_1se(self) -> float:
        return float(self.lambdas[self.idx_1se])


def _fold_ids(n: int, n_folds: int, seed: int) -> np.ndarray:
    ids = np.empty(n, dtype=int)
    perm = np.random.default_rng(seed).permutation(n)
    for f, chunk in enumerate(np.array_split(perm, n_folds)):
        ids[chunk] = f
    return ids


def k_fold_cv(data: Dataset, config: SolverConfig | None = None,
              n_folds: int = 10, seed: int = 0, n_lambda: int = 50,
              lambda_min_ratio: float | None = None,
              folds=None) -> CvResult:
    """Cross-validate the path.

    Parameters
    ----------
    folds : optional (N,) integer array assigning each row to a fold; when
        omitted, rows are shuffled into ``n_folds`` near-equal folds using
        ``seed``.  Fold statistics average the per-fold mean squared errors;
        the standard error is across folds.
    """
    cfg = config if config is not None else SolverConfig()
    path = fit_path(data, cfg, n_lambda=n_lambda,
                    lambda_min_ratio=lambda_min_ratio)
    grid = path.lambdas
    if folds is None:
        if not 2 <= n_folds <= data.n_samples:
            raise ValueError(f"n_folds must lie in [2, N], got {n_folds}")
        ids = _fold_ids(data.n_samples, n_folds, seed)
    else:
        ids = np.asarray(folds, dtype=int)
        if ids.shape != (data.n_samples,):
            raise ValueError("folds must assign one fold id per row")
    labels = np.unique(ids)
    if labels.size < 2:
        raise ValueError("need at least two folds")
    errs = np.empty((labels.size, grid.size))
    for fi, f in enumerate(labels):
        test = ids == f
        train = ~test
        sub = Dataset(data.y[train], data.X[train],
                      data.Z[train] if data.n_modifiers else None)
        try:
            fold_path = fit_path(sub, cfg, lambdas=grid)
        except StandardizationError as err:
            raise StandardizationError(f"fold {f}: {err}") from err
        preds = fold_path.predict(data.X[test],
                                  data.Z[test] if data.n_modifiers else None)
        errs[fi] = ((data.y[test, None] - preds) ** 2).mean(axis=0)
    cv_mean = errs.mean(axis=0)
    cv_se = errs.std(axis=0, ddof=1) / np.sqrt(labels.size)
    idx_min = int(np.argmin(cv_mean))
    within = np.nonzero(cv_mean <= cv_mean[idx_min] + cv_se[idx_min])[0]
    idx_1se = int(within[0])
    return CvResult(lambdas=grid, cv_mean=cv_mean, cv_se=cv_se,
                    idx_min=idx_min, idx_1se=idx_1se, path=path)

"""Regularization path: the smallest all-zero penalty level, a geometric
grid below it, and warm-started fits along the grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, PliableFit, predict
from .preprocess import StandardizationMap, destandardize_fit, standardize
from .solver import (ConvergenceError, SolverConfig, Workspace,
                     fit_single_lambda, soft_threshold)

__all__ = [
    "LambdaDiagnostics",
    "PathResult",
    "lambda_max",
    "default_lambda_min_ratio",
    "lambda_grid",
    "fit_path",
]


@dataclass(frozen=True)
class LambdaDiagnostics:
    n_passes: int
    n_active_groups: int
    n_active_theta_rows: int
    kkt_max: float


@dataclass(frozen=True)
class PathResult:
    """Fits along a decreasing penalty grid.

    ``fits`` live in standardized coordinates; ``fit_raw`` maps one back to
    the original scale and ``predict`` takes raw inputs directly.
    """

    lambdas: np.ndarray
    fits: tuple
    diagnostics: tuple
    smap: StandardizationMap
    alpha: float

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "fits", tuple(self.fits))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        if lam.size > 1 and not np.all(np.diff(lam) < 0):
            raise ValueError("lambdas must be strictly decreasing")

    @property
    def n_lambdas(self) -> int:
        return self.lambdas.shape[0]

    def fit_raw(self, index: int) -> PliableFit:
        return destandardize_fit(self.fits[index], self.smap)

    def predict(self, X, Z=None, index=None) -> np.ndarray:
        """Predictions for raw (unstandardized) inputs.

        Returns shape (N,) for a single ``index``, else (N, n_lambdas).
        """
        X = np.asarray(X, dtype=float)
        Xs = self.smap.transform(X=X)
        Zs = self.smap.transform(Z=Z) if Z is not None else None
        if index is not None:
            return predict(self.fits[index], Xs, Zs) + self.smap.y_mean
        out = np.empty((X.shape[0], self.n_lambdas))
        for i, fit in enumerate(self.fits):
            out[:, i] = predict(fit, Xs, Zs)
        return out + self.smap.y_mean


def _group_zero_threshold(a: float, q: np.ndarray, alpha: float,
                          rel_tol: float = 1e-10) -> float:
    """Smallest lam at which block (a, q) certifies zero:

        |a| <= rho   and   ||S(q, alpha lam)||_2 <= rho + sqrt(rho^2 - a^2)

    with rho = (1-alpha) lam.  Both sides are monotone in lam, so bisection;
    the upper end of the bracket is returned.
    """
    a = abs(float(a))
    lo = a / (1.0 - alpha)
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        return lo
    hi = max(lo, qn / (1.0 - alpha))

    def holds(lam):
        rho = (1.0 - alpha) * lam
        budget = rho + np.sqrt(max(rho * rho - a * a, 0.0))
        return rho >= a and \
            float(np.linalg.norm(soft_threshold(q, alpha * lam))) <= budget

    if holds(lo):
        return lo
    for _ in range(200):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


def lambda_max(data: Dataset, alpha: float) -> float:
    """Smallest penalty at which every block's zero certificate holds, with
    the residual taken after the intercept-only least squares on (1, Z).

    Per block the certificate couples lam on both sides through the
    soft threshold, so the theta part is solved by monotone bisection; the
    upper end of the final bracket is returned so a fit at the result is
    exactly all-zero.
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    n = data.n_samples
    A = np.column_stack([np.ones(n), data.Z])
    coef = np.linalg.pinv(A) @ data.y
    r = data.y - A @ coef
    a_all = data.X.T @ r / n
    best = float(np.abs(a_all).max()) / (1.0 - alpha)
    if data.n_modifiers:
        q_all = data.X.T @ (data.Z * r[:, None]) / n
        for j in range(data.n_predictors):
            best = max(best, _group_zero_threshold(a_all[j], q_all[j], alpha))
    # a hair of slack so the certificate still holds when the solver
    # accumulates the pulls in a different order than the sums above
    return best * (1.0 + 1e-12)


def default_lambda_min_ratio(n: int, p: int, k: int) -> float:
    """0.01 when N exceeds the parameter count p (K+1), else 0.05."""
    return 0.01 if n > p * (k + 1) else 0.05


def lambda_grid(lam_max: float, n_lambda: int, min_ratio: float) -> np.ndarray:
    if n_lambda < 1:
        raise ValueError("n_lambda must be >= 1")
    if lam_max <= 0:
        return np.zeros(1)
    if n_lambda == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambda)


def fit_path(data: Dataset, config: SolverConfig | None = None,
             n_lambda: int = 50, lambda_min_ratio: float | None = None,
             lambdas=None) -> PathResult:
    """Standardize, build (or accept) a decreasing penalty grid, and fit it
    with warm starts.  Solver failures propagate with the grid index attached.
    """
    cfg = config if config is not None else SolverConfig()
    std, smap = standardize(data, cfg.standardize_x, cfg.standardize_z,
                            cfg.center_y)
    if lambdas is None:
        ratio = (default_lambda_min_ratio(data.n_samples, data.n_predictors,
                                          data.n_modifiers)
                 if lambda_min_ratio is None else float(lambda_min_ratio))
        grid = lambda_grid(lambda_max(std, cfg.alpha), n_lambda, ratio)
    else:
        grid = np.asarray(lambdas, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise ValueError("lambdas must be a nonempty 1-d sequence")
        if grid.size > 1 and not np.all(np.diff(grid) < 0):
            raise ValueError("lambdas must be strictly decreasing")
    ws = Workspace(std)
    fits = []
    diags = []
    warm = None
    for i, lam in enumerate(grid):
        try:
            fit, d = fit_single_lambda(std, lam, cfg, warm=warm, workspace=ws,
                                       return_diagnostics=True)
        except ConvergenceError as err:
            raise ConvergenceError(
                f"lambda[{i}]={lam:.6g}: {err}", fit=err.fit, kkt=err.kkt
            ) from err
        fits.append(fit)
        diags.append(LambdaDiagnostics(
            n_passes=d.n_passes,
            n_active_groups=len(fit.active_groups),
            n_active_theta_rows=len(fit.theta_rows),
            kkt_max=d.kkt.max_violation))
        warm = fit
    return PathResult(lambdas=grid, fits=tuple(fits), diagnostics=tuple(diags),
                      smap=smap, alpha=cfg.alpha)

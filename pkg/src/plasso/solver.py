"""Blockwise coordinate descent at a single penalty level.

Each predictor j owns a block (beta_j, theta_j) penalized by

    (1-alpha) lam (||(beta_j, theta_j)||_2 + ||theta_j||_2)
    + alpha lam ||theta_j||_1 .

A block visit tries, in order: a cheap certificate that the whole block is
zero, a soft-threshold update for beta_j with theta_j pinned at zero, and a
proximal gradient loop on the joint block.  Intercepts (beta0, theta0) are
unpenalized and refreshed by least squares on (1, Z) at the start of every
pass.  Data is assumed standardized (see preprocess); nothing here rescales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, PliableFit, interaction_block, predict

__all__ = [
    "SolverConfig",
    "GroupState",
    "KktReport",
    "FitDiagnostics",
    "ConvergenceError",
    "ProxSolveError",
    "Workspace",
    "soft_threshold",
    "solve_norm_system",
    "prox_group",
    "screen_group",
    "beta_only_update",
    "screen_theta",
    "prox_joint_update",
    "update_intercepts",
    "fit_single_lambda",
    "check_kkt",
]


class ConvergenceError(RuntimeError):
    """Solver hit its pass cap; carries the best iterate and its KKT report."""

    def __init__(self, message, fit=None, kkt=None):
        super().__init__(message)
        self.fit = fit
        self.kkt = kkt


class ProxSolveError(RuntimeError):
    """Proximal map produced a non-finite value; carries the inputs."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``tol_obj`` bounds the relative objective change over a full pass and
    ``tol_kkt`` the largest subgradient violation; both must hold to declare
    convergence.  ``step_init`` scales the per-group step 1/L estimated from
    the block Gram matrix.  ``screen``/``nesterov`` toggle the zero-block
    certificate and momentum in the joint block loop.  The standardization
    flags are consumed by the path/CV drivers, not by fit_single_lambda.
    """

    alpha: float = 0.5
    tol_obj: float = 1e-7
    tol_kkt: float = 1e-4
    max_outer_iters: int = 1000
    max_prox_iters: int = 500
    step_init: float = 1.0
    backtrack_shrink: float = 0.8
    nesterov: bool = True
    screen: bool = True
    standardize_x: bool = True
    standardize_z: bool = True
    center_y: bool = True

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.tol_obj <= 0 or self.tol_kkt <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer_iters < 1 or self.max_prox_iters < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.step_init <= 0:
            raise ValueError("step_init must be positive")
        if not 0 < self.backtrack_shrink < 1:
            raise ValueError("backtrack_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class GroupState:
    """One predictor's block: coefficients plus its cached interaction block."""

    j: int
    beta_j: float
    theta_j: np.ndarray
    w_j: np.ndarray | None = None


@dataclass(frozen=True)
class KktReport:
    """Largest subgradient violations of a fit at (lam, alpha).

    For zero blocks the entry is the slack in the zero certificate; for
    active blocks it is the max-norm residual of the stationarity equations
    with optimal subgradient choices on zero theta entries.  ``intercept``
    measures residual orthogonality to (1, Z).
    """

    per_group: np.ndarray
    intercept: float
    max_violation: float
    worst_group: int


@dataclass(frozen=True)
class FitDiagnostics:
    n_passes: int
    kkt: KktReport
    objective_per_pass: tuple = ()


def soft_threshold(x, t):
    """S(x, t) = sign(x) max(|x| - t, 0), elementwise.  Requires t >= 0."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    if np.isscalar(x) or np.ndim(x) == 0:
        x = float(x)
        return np.sign(x) * max(abs(x) - t, 0.0)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _zero_budget(a, rho):
    """Theta-side bound of the joint zero certificate at beta pull ``a``:
    the group-norm ball can spend only sqrt(rho^2 - a^2) on theta once it
    absorbs the beta pull, plus rho from the theta-only norm."""
    return rho + np.sqrt(np.maximum(rho * rho - np.square(a), 0.0))


def solve_norm_system(g1: float, g2: float, c: float):
    """Solve for the block magnitudes a = |beta|, b = ||theta|| satisfying

        (1 + c / s) a = g1,      (1 + c (1/b + 1/s)) b = g2,

    with s = sqrt(a^2 + b^2).  Eliminating a and b through the shared factor
    s/(s + c) gives s = sqrt(g1^2 + (g2 - c)^2) - c in the interior; the
    boundary branches are b = 0 when g2 <= c and a = b = 0 when the joint
    magnitude falls below c.  Inputs must be nonnegative.
    """
    if min(g1, g2, c) < 0:
        raise ValueError("solve_norm_system inputs must be nonnegative")
    bb = g2 - c if g2 > c else 0.0
    root = float(np.hypot(g1, bb))
    if root <= c:
        return 0.0, 0.0
    scale = (root - c) / root
    return g1 * scale, bb * scale


def prox_group(zeta_beta: float, zeta_theta: np.ndarray, c: float, l1: float):
    """Proximal map of c (||(b, t)||_2 + ||t||_2) + l1 ||t||_1 at (zeta_beta, zeta_theta).

    The three penalty pieces nest (entries of theta, theta, the whole block),
    so the map composes: soft-threshold theta entries, group-shrink theta,
    group-shrink the joint block.  The magnitudes solve the norm system above.
    """
    zt = np.asarray(zeta_theta, dtype=float)
    t1 = soft_threshold(zt, l1)
    g2 = float(np.linalg.norm(t1))
    a, b = solve_norm_system(abs(zeta_beta), g2, c)
    if a == 0.0 and b == 0.0:
        return 0.0, np.zeros_like(zt)
    beta = float(np.sign(zeta_beta)) * a
    theta = t1 * (b / g2) if b > 0.0 else np.zeros_like(zt)
    if not (np.isfinite(beta) and np.all(np.isfinite(theta))):
        raise ProxSolveError(
            "proximal map produced non-finite values",
            diagnostics={"zeta_beta": zeta_beta, "g2": g2, "c": c, "l1": l1})
    return beta, theta


# ---------------------------------------------------------------------------
# public single-block operations


def screen_group(j: int, r_minus_j, lam: float, alpha: float, data: Dataset) -> bool:
    """True when the zero certificate holds for block j at its partial residual:

        |X_j' r / N| <= (1-alpha) lam   and
        || S(W_j' r / N, alpha lam) ||_2
            <= (1-alpha) lam + sqrt(((1-alpha) lam)^2 - (X_j' r / N)^2),

    the two bounds coupled because the joint group norm must absorb the
    beta pull before it can spend anything on theta.
    """
    r = np.asarray(r_minus_j, dtype=float)
    n = data.n_samples
    rho = (1.0 - alpha) * lam
    a = float(data.X[:, j] @ r) / n
    if abs(a) > rho:
        return False
    q = data.Z.T @ (data.X[:, j] * r) / n
    return float(np.linalg.norm(soft_threshold(q, alpha * lam))) \
        <= float(_zero_budget(a, rho))


def beta_only_update(j: int, r_minus_j, lam: float, alpha: float, data: Dataset) -> float:
    """Exact minimizer over beta_j with theta_j pinned at zero:

        (N / ||X_j||^2) S(X_j' r / N, (1-alpha) lam).
    """
    x_j = data.X[:, j]
    xn2 = float(x_j @ x_j)
    if xn2 == 0.0:
        raise ValueError(f"X column {j} is identically zero")
    a = float(x_j @ np.asarray(r_minus_j, dtype=float)) / data.n_samples
    return soft_threshold(a, (1.0 - alpha) * lam) * data.n_samples / xn2


def screen_theta(j: int, r_minus_j, beta_j_hat: float, lam: float,
                 alpha: float, data: Dataset) -> bool:
    """True when theta_j = 0 is optimal given beta_j = beta_j_hat:

        || S(W_j' (r - X_j beta_j_hat) / N, alpha lam) ||_2 <= (1-alpha) lam .
    """
    x_j = data.X[:, j]
    r = np.asarray(r_minus_j, dtype=float) - x_j * beta_j_hat
    q = data.Z.T @ (x_j * r) / data.n_samples
    return float(np.linalg.norm(soft_threshold(q, alpha * lam))) <= (1.0 - alpha) * lam


def prox_joint_update(j: int, state: GroupState, r_minus_j, lam: float,
                      alpha: float, t: float, data: Dataset) -> GroupState:
    """One proximal gradient step of length t on block j from ``state``."""
    if t <= 0:
        raise ValueError(f"step must be positive, got {t}")
    x_j = data.X[:, j]
    w = state.w_j if state.w_j is not None else interaction_block(data.X, data.Z, j)
    n = data.n_samples
    resid = np.asarray(r_minus_j, dtype=float) - x_j * state.beta_j
    if state.theta_j.shape[0]:
        resid = resid - w @ state.theta_j
    gb = -float(x_j @ resid) / n
    gt = -(w.T @ resid) / n
    beta_new, theta_new = prox_group(state.beta_j - t * gb,
                                     state.theta_j - t * gt,
                                     t * (1.0 - alpha) * lam,
                                     t * alpha * lam)
    return GroupState(j, beta_new, theta_new, w)


def update_intercepts(data: Dataset, fit: PliableFit,
                      allow_rank_deficient: bool = False):
    """Refit (beta0, theta0) by least squares of the fit's residual on (1, Z).

    Returns the new ``(beta0, theta0)``.  Raises on a rank-deficient design
    unless ``allow_rank_deficient`` picks the minimum-norm solution.
    """
    target = (data.y - predict(fit, data.X, data.Z)
              + fit.beta0 + (data.Z @ fit.theta0 if data.n_modifiers else 0.0))
    A = np.column_stack([np.ones(data.n_samples), data.Z])
    coef, _, rank, _ = np.linalg.lstsq(A, target, rcond=None)
    if rank < A.shape[1] and not allow_rank_deficient:
        raise np.linalg.LinAlgError(
            f"intercept design (1, Z) has rank {rank} < {A.shape[1]}")
    return float(coef[0]), coef[1:]


# ---------------------------------------------------------------------------
# workspace shared across penalty levels


class Workspace:
    """Per-dataset caches reused across a path: interaction blocks and step
    sizes for active groups, column norms, and the intercept projector."""

    def __init__(self, data: Dataset):
        self.data = data
        X = data.X
        self.xnorm2 = np.einsum("ij,ij->j", X, X)
        A = np.column_stack([np.ones(data.n_samples), data.Z])
        # pseudoinverse handles a rank-deficient Z (e.g. Z identically zero)
        # with the minimum-norm intercepts instead of failing mid-fit
        self._a_pinv = np.linalg.pinv(A)
        self._w: dict[int, np.ndarray] = {}
        self._step: dict[int, float] = {}

    def w(self, j: int) -> np.ndarray:
        got = self._w.get(j)
        if got is None:
            got = interaction_block(self.data.X, self.data.Z, j)
            self._w[j] = got
        return got

    def step(self, j: int) -> float:
        """1 / L_j with L_j the largest eigenvalue of [X_j W_j]'[X_j W_j] / N."""
        got = self._step.get(j)
        if got is None:
            d = np.column_stack([self.data.X[:, j], self.w(j)])
            lip = float(np.linalg.eigvalsh(d.T @ d)[-1]) / self.data.n_samples
            got = 1.0 / lip if lip > 0 else 1.0
            self._step[j] = got
        return got

    def solve_intercepts(self, target):
        return self._a_pinv @ target


# ---------------------------------------------------------------------------
# joint block minimization (inner loop)


def _block_minimize(D, r_mj, g0, lam, alpha, cfg: SolverConfig, t0, n):
    """Minimize the block objective from g0 by proximal gradient with
    backtracking and restarted momentum.  Monotone in the block objective."""
    rho = (1.0 - alpha) * lam
    mu = alpha * lam
    inv2n = 0.5 / n

    def smooth(g):
        e = r_mj - D @ g
        return float(e @ e) * inv2n

    def total(g, sm):
        tn = float(np.linalg.norm(g[1:]))
        return (sm + rho * (float(np.hypot(g[0], tn)) + tn)
                + mu * float(np.abs(g[1:]).sum()))

    g = np.array(g0, dtype=float)
    f = total(g, smooth(g))
    g_prev = g
    t = t0
    k = 1
    tol = 0.05 * cfg.tol_kkt
    for _ in range(cfg.max_prox_iters):
        if cfg.nesterov and k > 1:
            y = g + ((k - 1.0) / (k + 2.0)) * (g - g_prev)
        else:
            y = g
        e_y = r_mj - D @ y
        l_y = float(e_y @ e_y) * inv2n
        grad = -(D.T @ e_y) / n
        while True:
            beta_new, theta_new = prox_group(y[0] - t * grad[0],
                                             y[1:] - t * grad[1:],
                                             t * rho, t * mu)
            g_new = np.empty_like(g)
            g_new[0] = beta_new
            g_new[1:] = theta_new
            d = g_new - y
            l_new = smooth(g_new)
            bound = l_y + float(grad @ d) + float(d @ d) / (2.0 * t)
            if l_new <= bound + 1e-12 * max(1.0, abs(bound)):
                break
            t *= cfg.backtrack_shrink
            if t <= 1e-3 * t0:
                break
        f_new = total(g_new, l_new)
        if f_new > f + 1e-12 * max(1.0, abs(f)):
            if cfg.nesterov and k > 1:
                # momentum overshot; restart the sequence from the incumbent
                k = 1
                g_prev = g
                continue
            break
        moved = float(np.max(np.abs(g_new - g)))
        g_prev = g
        g = g_new
        f = f_new
        k += 1
        if moved <= tol * t:
            break
    return g, f


# ---------------------------------------------------------------------------
# KKT / subgradient residuals


def _kkt_arrays(data: Dataset, r, beta, theta_map, lam, alpha) -> KktReport:
    n, p = data.n_samples, data.n_predictors
    rho = (1.0 - alpha) * lam
    mu = alpha * lam
    a_all = data.X.T @ r / n
    q_all = data.X.T @ (data.Z * r[:, None]) / n if data.n_modifiers \
        else np.zeros((p, 0))
    sq = soft_threshold(q_all, mu) if data.n_modifiers else q_all
    sq_norm = np.sqrt((sq ** 2).sum(axis=1))
    per = np.maximum(np.abs(a_all) - rho, sq_norm - _zero_budget(a_all, rho))
    np.maximum(per, 0.0, out=per)
    for j in range(p):
        b = beta[j]
        row = theta_map.get(j)
        if b == 0.0 and row is None:
            continue
        tn = float(np.linalg.norm(row)) if row is not None else 0.0
        gn = float(np.hypot(b, tn))
        res_b = abs(rho * b / gn - a_all[j])
        if row is None or tn == 0.0:
            res_t = max(0.0, sq_norm[j] - rho)
        else:
            inner = rho * row * (1.0 / gn + 1.0 / tn) - q_all[j]
            nz = row != 0.0
            res_vec = np.where(nz, np.abs(inner + mu * np.sign(row)),
                               np.maximum(np.abs(q_all[j]) - mu, 0.0))
            res_t = float(res_vec.max()) if res_vec.size else 0.0
        per[j] = max(res_b, res_t)
    intercept = abs(float(r.mean()))
    if data.n_modifiers:
        intercept = max(intercept, float(np.abs(data.Z.T @ r).max()) / n)
    worst = int(np.argmax(per)) if p else 0
    return KktReport(per_group=per, intercept=intercept,
                     max_violation=max(float(per.max()) if p else 0.0, intercept),
                     worst_group=worst)


def check_kkt(fit: PliableFit, data: Dataset, lam=None, alpha=None) -> KktReport:
    """Subgradient residuals of ``fit`` on ``data`` at (lam, alpha)."""
    lam = fit.lam if lam is None else float(lam)
    alpha = fit.alpha if alpha is None else float(alpha)
    r = data.y - predict(fit, data.X, data.Z)
    return _kkt_arrays(data, r, fit.beta, dict(fit.theta_rows), lam, alpha)


# ---------------------------------------------------------------------------
# the fitter


class _Fitter:
    def __init__(self, data, lam, cfg, warm, ws):
        self.data = data
        self.lam = lam
        self.cfg = cfg
        self.ws = ws
        self.rho = (1.0 - cfg.alpha) * lam
        self.mu = cfg.alpha * lam
        n, p, k = data.n_samples, data.n_predictors, data.n_modifiers
        if warm is not None:
            if warm.n_predictors != p or warm.n_modifiers != k:
                raise ValueError("warm start has wrong dimensions")
            self.beta = warm.beta.copy()
            self.theta = {j: row.copy() for j, row in warm.theta_rows.items()}
            self.beta0 = warm.beta0
            self.theta0 = warm.theta0.copy()
        else:
            self.beta = np.zeros(p)
            self.theta = {}
            self.beta0 = 0.0
            self.theta0 = np.zeros(k)
        self.r = data.y - self._state_prediction()
        self.n_passes = 0

    def _state_prediction(self):
        data = self.data
        yhat = np.full(data.n_samples, self.beta0)
        if data.n_modifiers:
            yhat += data.Z @ self.theta0
        yhat += data.X @ self.beta
        for j, row in self.theta.items():
            yhat += data.X[:, j] * (data.Z @ row)
        return yhat

    def _objective(self):
        loss = float(self.r @ self.r) / (2.0 * self.data.n_samples)
        group = 0.0
        l1 = 0.0
        nonzero = np.nonzero(self.beta)[0]
        covered = set(self.theta)
        for j, row in self.theta.items():
            tn = float(np.linalg.norm(row))
            group += float(np.hypot(self.beta[j], tn)) + tn
            l1 += float(np.abs(row).sum())
        for j in nonzero:
            if j not in covered:
                group += abs(self.beta[j])
        return loss + self.rho * group + self.mu * l1

    def _refresh_intercepts(self):
        target = self.r + self.beta0
        if self.data.n_modifiers:
            target = target + self.data.Z @ self.theta0
        coef = self.ws.solve_intercepts(target)
        self.beta0 = float(coef[0])
        self.theta0 = coef[1:]
        self.r = target - self.beta0
        if self.data.n_modifiers:
            self.r -= self.data.Z @ self.theta0

    def _active(self):
        return set(np.nonzero(self.beta)[0].tolist()) | set(self.theta)

    def _full_visit(self):
        active = self._active()
        if not self.cfg.screen:
            return range(self.data.n_predictors)
        n = self.data.n_samples
        a_all = self.data.X.T @ self.r / n
        fail = np.abs(a_all) > self.rho
        if self.data.n_modifiers:
            q_all = self.data.X.T @ (self.data.Z * self.r[:, None]) / n
            sq = soft_threshold(q_all, self.mu)
            fail |= np.sqrt((sq ** 2).sum(axis=1)) > _zero_budget(a_all, self.rho)
        return sorted(active | set(np.nonzero(fail)[0].tolist()))

    def _update_group(self, j):
        data = self.data
        n = data.n_samples
        x_j = data.X[:, j]
        b_old = self.beta[j]
        row_old = self.theta.get(j)
        was_active = b_old != 0.0 or row_old is not None
        if was_active:
            r_mj = self.r + x_j * b_old
            if row_old is not None:
                r_mj += self.ws.w(j) @ row_old
        else:
            r_mj = self.r
        if self.cfg.screen:
            a = float(x_j @ r_mj) / n
            if not was_active and abs(a) <= self.rho:
                q = data.Z.T @ (x_j * r_mj) / n
                if float(np.linalg.norm(soft_threshold(q, self.mu))) \
                        <= float(_zero_budget(a, self.rho)):
                    return False
            if self.ws.xnorm2[j] == 0.0:
                raise ValueError(f"X column {j} is identically zero")
            bhat = soft_threshold(a, self.rho) * n / self.ws.xnorm2[j]
            resid_b = r_mj - x_j * bhat
            q2 = data.Z.T @ (x_j * resid_b) / n
            if float(np.linalg.norm(soft_threshold(q2, self.mu))) <= self.rho:
                changed = ((bhat != 0.0) != (b_old != 0.0)) or row_old is not None
                self.beta[j] = bhat
                self.theta.pop(j, None)
                self.r = resid_b
                return changed
        w = self.ws.w(j)
        d_mat = np.empty((n, data.n_modifiers + 1))
        d_mat[:, 0] = x_j
        d_mat[:, 1:] = w
        g0 = np.zeros(data.n_modifiers + 1)
        g0[0] = b_old
        if row_old is not None:
            g0[1:] = row_old
        t0 = self.cfg.step_init * self.ws.step(j)
        g, _ = _block_minimize(d_mat, r_mj, g0, self.lam, self.cfg.alpha,
                               self.cfg, t0, n)
        b_new = g[0]
        row_new = g[1:]
        has_row = bool(np.any(row_new != 0.0))
        changed = ((b_new != 0.0) != (b_old != 0.0)) or (has_row != (row_old is not None))
        self.beta[j] = b_new
        if has_row:
            self.theta[j] = row_new
        else:
            self.theta.pop(j, None)
        self.r = r_mj - d_mat @ g
        return changed

    def _kkt(self):
        return _kkt_arrays(self.data, self.r, self.beta, self.theta,
                           self.lam, self.cfg.alpha)

    def _build_fit(self):
        return PliableFit(self.beta0, self.theta0, self.beta, self.theta,
                          self.lam, self.cfg.alpha)

    def run(self):
        cfg = self.cfg
        j_prev = np.inf
        full_pass = True
        obj_trace = []
        while self.n_passes < cfg.max_outer_iters:
            self.n_passes += 1
            self._refresh_intercepts()
            visit = self._full_visit() if full_pass else sorted(self._active())
            for j in visit:
                self._update_group(j)
            j_now = self._objective()
            obj_trace.append(j_now)
            rel = (j_prev - j_now) / max(1.0, abs(j_now))
            if full_pass:
                # the KKT report is the certificate; don't gate it on a
                # quiet support, which can flip by one ulp forever when a
                # group's pull ties its threshold exactly
                if rel < cfg.tol_obj:
                    report = self._kkt()
                    if report.max_violation <= cfg.tol_kkt:
                        return self._build_fit(), FitDiagnostics(
                            self.n_passes, report, tuple(obj_trace))
                full_pass = not self._active()
            elif rel < cfg.tol_obj:
                full_pass = True
            j_prev = j_now
        raise ConvergenceError(
            f"no convergence in {cfg.max_outer_iters} passes "
            f"(lam={self.lam:.6g}, alpha={cfg.alpha})",
            fit=self._build_fit(), kkt=self._kkt())


def fit_single_lambda(data: Dataset, lam: float, config: SolverConfig | None = None,
                      warm: PliableFit | None = None,
                      workspace: Workspace | None = None,
                      return_diagnostics: bool = False):
    """Fit the model at one penalty level on (already standardized) data.

    Parameters
    ----------
    data : standardized Dataset (see preprocess.standardize).
    lam : penalty level, >= 0.
    config : SolverConfig; defaults used when omitted.
    warm : optional warm-start fit with matching dimensions.
    workspace : optional Workspace built on ``data``, reused across levels.
    return_diagnostics : also return pass counts and the final KKT report.
    """
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"lam must be >= 0 and finite, got {lam}")
    cfg = config if config is not None else SolverConfig()
    ws = workspace if workspace is not None else Workspace(data)
    if ws.data.X.shape != data.X.shape:
        raise ValueError("workspace was built for a different dataset")
    fit, diag = _Fitter(data, lam, cfg, warm, ws).run()
    return (fit, diag) if return_diagnostics else fit

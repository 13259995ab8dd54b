"""Block sub-solvers: weighted lasso, the alpha linear system, and SPG for delta >= 0."""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, lapack

from .errors import NotConverged, SingularAfterJitter

ALPHA_JITTER = 1e-5
RCOND_MIN = 1e-12
# active-set passes allowed per full sweep of the budget
ACTIVE_PASS_FACTOR = 100


def soft_threshold(z, t):
    return np.sign(z) * max(abs(z) - t, 0.0)


def lasso_wls_objective(beta, Y, W, offset, X, lambda1):
    r = Y - offset - X @ beta
    return 0.5 * np.dot(W, r * r) / Y.size + lambda1 * np.abs(beta).sum()


def lasso_wls(Y, W, offset, X, lambda1, beta_init=None, tol=1e-8, max_sweeps=1000,
              method="auto", callback=None):
    """Weighted least squares with an L1 penalty by cyclic coordinate descent.

    Minimizes ``(1/2n) sum_i W_i (Y_i - o_i - X_i beta)**2 + lambda1 |beta|_1``.
    Full sweeps over all coordinates alternate with passes over the current
    active set until that set settles; the solver stops after a full sweep
    whose largest coordinate change is below ``tol``. ``max_sweeps`` bounds
    the full sweeps, and active-set passes are capped at
    ``ACTIVE_PASS_FACTOR * max_sweeps``.

    Parameters
    ----------
    method : {"auto", "naive", "covariance"}
        ``naive`` keeps a running residual (O(n) per update); ``covariance``
        caches weighted inner products ``X_p' W X_k`` (O(P) per update). ``auto``
        picks covariance updates when n > P.
    callback : callable, optional
        Called as ``callback(beta)`` after every pass.

    Returns
    -------
    beta : ndarray of shape (P,)
        Emits :class:`NotConverged` if ``max_sweeps`` is exhausted.
    """
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    n, P = X.shape
    beta = np.zeros(P) if beta_init is None else np.array(beta_init, dtype=float)
    if P == 0:
        return beta
    if np.any(W <= 0):
        raise ValueError("weights must be strictly positive")
    r = Y - np.asarray(offset, dtype=float)
    v = (W @ (X * X)) / n
    if method == "auto":
        method = "covariance" if n > P else "naive"

    if method == "naive":
        res = r - X @ beta
        WX = X * W[:, None]

        def update(p):
            old = beta[p]
            if v[p] <= 0:
                new = 0.0
            else:
                z = WX[:, p] @ res / n + v[p] * old
                new = soft_threshold(z, lambda1) / v[p]
            if new != old:
                res[:] -= X[:, p] * (new - old)
                beta[p] = new
            return abs(new - old)
    elif method == "covariance":
        c = X.T @ (W * r) / n
        G = {}
        Gb = np.zeros(P)
        for k in np.flatnonzero(beta):
            G[k] = X.T @ (W * X[:, k]) / n
            Gb += G[k] * beta[k]

        def update(p):
            old = beta[p]
            if v[p] <= 0:
                new = 0.0
            else:
                z = c[p] - Gb[p] + v[p] * old
                new = soft_threshold(z, lambda1) / v[p]
            if new != old:
                if p not in G:
                    G[p] = X.T @ (W * X[:, p]) / n
                Gb[:] += G[p] * (new - old)
                beta[p] = new
            return abs(new - old)
    else:
        raise ValueError(f"unknown method {method!r}")

    sweeps = passes = 0
    full = True
    while sweeps < max_sweeps and passes < max_sweeps * ACTIVE_PASS_FACTOR:
        coords = range(P) if full else np.flatnonzero(beta)
        change = 0.0
        for p in coords:
            change = max(change, update(p))
        sweeps += full
        passes += 1
        if callback is not None:
            callback(beta.copy())
        if change < tol:
            if full:
                return beta
            full = True
        else:
            full = False
    warnings.warn(f"lasso_wls stopped after {sweeps} full sweeps and {passes} passes",
                  NotConverged, stacklevel=2)
    return beta


def _factor(A, check_rcond=True):
    """Cholesky factor of a symmetric matrix, or None when it is numerically singular."""
    c, info = lapack.dpotrf(A, lower=False, clean=True)
    if info != 0:
        return None
    if check_rcond:
        rcond, info = lapack.dpocon(c, np.linalg.norm(A, 1))
        if info != 0 or not rcond >= RCOND_MIN:
            return None
    return c


def alpha_solve(K, W, Y, xb, lambda3, jitter=ALPHA_JITTER):
    """Solve ``[(1/n) K W K + lambda3 K] alpha = (1/n) K W (Y - xb)``.

    The system is factored by Cholesky. When that fails, or the reciprocal
    condition estimate is below ``RCOND_MIN``, ``jitter * I`` is added to the
    left-hand side and the factorization retried once. The jittered solve is
    accepted if Cholesky succeeds and the relative residual is below 1e-8.
    """
    K = np.asarray(K, dtype=float)
    W = np.asarray(W, dtype=float)
    n = K.shape[0]
    rhs = K @ (W * (np.asarray(Y) - np.asarray(xb))) / n
    if not np.any(rhs):
        return np.zeros(n)
    A = (K * W) @ K / n + lambda3 * K
    A = 0.5 * (A + A.T)
    for jit in (0.0, jitter):
        M = A + jit * np.eye(n) if jit else A
        try:
            c = _factor(M, check_rcond=not jit)
        except LinAlgError:
            c = None
        if c is None:
            continue
        alpha = cho_solve((c, False), rhs)
        if np.linalg.norm(M @ alpha - rhs) <= 1e-8 * np.linalg.norm(rhs):
            return alpha
    raise SingularAfterJitter(
        f"alpha system remains singular after adding {jitter:g} * I")


@dataclass
class SpgConfig:
    max_iter: int = 300
    memory: int = 10
    step_min: float = 1e-10
    step_max: float = 1e10
    gamma: float = 1e-4
    sigma_min: float = 0.1
    sigma_max: float = 0.9
    tol: float = 1e-6
    max_backtracks: int = 60

    def __post_init__(self):
        if self.memory < 1 or self.max_iter < 1:
            raise ValueError("memory and max_iter must be >= 1")
        if not 0 < self.sigma_min < self.sigma_max < 1:
            raise ValueError("need 0 < sigma_min < sigma_max < 1")
        if min(self.step_min, self.gamma, self.tol) <= 0 or self.step_max <= self.step_min:
            raise ValueError("SPG constants must be positive with step_min < step_max")


@dataclass
class SpgResult:
    x: np.ndarray
    value: float
    pg_norm: float
    n_iter: int
    n_eval: int
    converged: bool


def project(x):
    return np.maximum(x, 0.0)


def spg_maximize(fun, x0, cfg=None, warn=True):
    """Maximize ``fun`` over the nonnegative orthant by spectral projected gradient.

    ``fun(x)`` returns ``(value, gradient)``. Steps use the Barzilai-Borwein
    length ``s's / s'y`` clamped to ``[step_min, step_max]``, and a step is
    accepted once the (minimization-side) value beats the worst of the last
    ``memory`` values by the Armijo margin. Backtracking uses a safeguarded
    quadratic interpolation. The best iterate seen is returned.
    """
    cfg = cfg or SpgConfig()
    n_eval = 0

    def F(x):
        nonlocal n_eval
        n_eval += 1
        val, grad = fun(x)
        return -float(val), -np.asarray(grad, dtype=float)

    x = project(np.asarray(x0, dtype=float))
    f, g = F(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise FloatingPointError("objective is not finite at the starting point")
    hist = [f]
    best_x, best_f = x.copy(), f
    pg = np.abs(project(x - g) - x).max() if x.size else 0.0
    best_pg = pg
    step = min(cfg.step_max, max(cfg.step_min, 1.0 / pg)) if pg > 0 else 1.0
    it = 0
    while pg > cfg.tol and it < cfg.max_iter:
        it += 1
        d = project(x - step * g) - x
        gtd = g @ d
        fref = max(hist[-cfg.memory:])
        a = 1.0
        for _ in range(cfg.max_backtracks):
            xn = project(x + a * d)
            fn, gn = F(xn)
            if np.isfinite(fn) and fn <= fref + cfg.gamma * a * gtd:
                break
            denom = fn - f - a * gtd
            atmp = -0.5 * a * a * gtd / denom if np.isfinite(denom) and denom > 0 else 0.5 * a
            a = min(max(atmp, cfg.sigma_min * a), cfg.sigma_max * a)
        else:
            break  # line search exhausted; keep the best iterate
        s, y = xn - x, gn - g
        sty = s @ y
        step = cfg.step_max if sty <= 0 else min(cfg.step_max, max(cfg.step_min, (s @ s) / sty))
        x, f, g = xn, fn, gn
        hist.append(f)
        pg = np.abs(project(x - g) - x).max()
        if f < best_f or (f == best_f and pg < best_pg):
            best_x, best_f, best_pg = x.copy(), f, pg
    converged = pg <= cfg.tol
    if not converged and warn:
        warnings.warn(f"SPG stopped after {it} iterations with projected-gradient "
                      f"norm {pg:.3g}", NotConverged, stacklevel=2)
    return SpgResult(x=best_x, value=-best_f, pg_norm=best_pg, n_iter=it,
                     n_eval=n_eval, converged=converged)

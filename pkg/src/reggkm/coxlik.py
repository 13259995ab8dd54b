"""Cox partial log-likelihood, its derivatives, and the penalized objective.

All quantities are for the normalized log-partial likelihood

    l_n(eta) = (1/n) sum_j tau_j [eta_j - log sum_{l in R_j} exp(eta_l)]

with Breslow handling of tied times. Risk-set sums are computed by cumulative
sums over the ascending time order held in a :class:`~reggkm.data.RiskIndex`,
so every function here is O(n) apart from the kernel terms.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFinite
from . import kernel as kern

W_FLOOR = 1e-8


@dataclass(frozen=True)
class LambdaTriple:
    """Penalty weights: L1 on beta, L1 on delta, RKHS norm of h."""

    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if not self.lambda3 > 0:
            raise ValueError("lambda3 must be strictly positive")

    def as_tuple(self):
        return (float(self.lambda1), float(self.lambda2), float(self.lambda3))


@dataclass(frozen=True, eq=False)
class FitState:
    """Parameters (alpha, beta, delta) with cached ``K(delta)`` and ``eta``."""

    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    gram: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, alpha, beta, delta, x, K):
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        eta = x @ beta + K @ alpha
        return cls(alpha=alpha, beta=beta, delta=np.asarray(delta, dtype=float),
                   gram=K, eta=eta)

    def updated(self, x, **changes):
        """New state with some parameters (and optionally ``gram``) replaced."""
        new = replace(self, **changes)
        eta = x @ new.beta + new.gram @ new.alpha
        return replace(new, eta=eta)


def _check(eta):
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise NonFinite("linear predictor contains NaN or infinite entries")
    return eta


def _risk_sums(eta, risk):
    """Shifted exponentials and risk-set totals, both in sorted order.

    Returns ``(w, S, shift)`` where ``w = exp(eta - shift)`` and ``S[k]`` is the
    sum of ``w`` over the risk set of the subject at sorted position ``k``.
    """
    es = eta[risk.order]
    shift = es.max()
    w = np.exp(es - shift)
    tail = np.cumsum(w[::-1])[::-1]
    return w, tail[risk.start], shift


def log_partial_likelihood(eta, risk, status, normalize=True):
    """``l_n(eta)``; with ``normalize=False`` the 1/n factor is dropped."""
    eta = _check(eta)
    tau = status[risk.order]
    if not tau.any():
        return 0.0
    w, S, shift = _risk_sums(eta, risk)
    es = eta[risk.order]
    ev = tau == 1
    total = np.sum(es[ev] - shift - np.log(S[ev]))
    return total / eta.size if normalize else total


def _event_shares(eta, risk, status):
    """Per-subject ``(a_i, b_i)`` in sorted order with

    ``a_i = w_i sum_{m in E_i} tau_m / S_m`` and
    ``b_i = w_i**2 sum_{m in E_i} tau_m / S_m**2``.
    """
    tau = status[risk.order]
    w, S, _ = _risk_sums(eta, risk)
    inv = np.divide(1.0, S, out=np.zeros_like(S), where=tau == 1)
    c1 = np.cumsum(inv)
    c2 = np.cumsum(inv * inv)
    last = risk.stop - 1
    return w * c1[last], w * w * c2[last]


def _unsort(v, risk):
    out = np.empty_like(v)
    out[risk.order] = v
    return out


def eta_gradient(eta, risk, status):
    eta = _check(eta)
    a, _ = _event_shares(eta, risk, status)
    return (status - _unsort(a, risk)) / eta.size


def eta_hessian_diag(eta, risk, status):
    """Diagonal of the Hessian of ``l_n`` in ``eta``; entries are <= 0."""
    eta = _check(eta)
    a, b = _event_shares(eta, risk, status)
    return _unsort(b - a, risk) / eta.size


def eta_derivatives(eta, risk, status):
    """Gradient and Hessian diagonal from a single pass."""
    eta = _check(eta)
    a, b = _event_shares(eta, risk, status)
    n = eta.size
    return (status - _unsort(a, risk)) / n, _unsort(b - a, risk) / n


def risk_share(eta, risk, status):
    """``g_i = exp(eta_i) sum_{m in E_i} tau_m / sum_{l in R_m} exp(eta_l)``."""
    eta = _check(eta)
    a, _ = _event_shares(eta, risk, status)
    return _unsort(a, risk)


def working_response(eta, grad, hess_diag, w_floor=W_FLOOR):
    """IRLS working response and weights from a diagonal Hessian.

    ``W = max(-hess_diag, w_floor)`` and ``Y = eta + grad / W``.
    """
    W = np.maximum(-np.asarray(hess_diag, dtype=float), w_floor)
    return np.asarray(eta) + np.asarray(grad) / W, W


def penalty(state, lam):
    return (lam.lambda1 * np.abs(state.beta).sum() + lam.lambda2 * state.delta.sum()
            + 0.5 * lam.lambda3 * state.alpha @ (state.gram @ state.alpha))


def objective(state, lam, risk, status):
    """Penalized objective ``l_n(eta) - l1|beta|_1 - l2 sum(delta) - (l3/2) a'Ka``."""
    return log_partial_likelihood(state.eta, risk, status) - penalty(state, lam)


def delta_gradient(state, lam, risk, status, sq, spec):
    """Analytic gradient of :func:`objective` in ``delta``.

    Assembled from three kernel contractions:
    ``(1/n) [c(tau alpha') - c(g alpha')] - lambda2 - (lambda3/2) c(alpha alpha')``
    where ``c(M) = sum_ij M_ij dK_ij/d delta``. The first two terms share one
    contraction with weights ``(tau - g) alpha'``.
    """
    n = state.alpha.size
    g = risk_share(state.eta, risk, status)
    left = (status - g) / n - 0.5 * lam.lambda3 * state.alpha
    return (kern.delta_contraction_outer(spec, sq, state.gram, left, state.alpha,
                                         delta=state.delta) - lam.lambda2)

"""Block coordinate ascent for the garrotized kernel Cox model, plus a lasso-Cox baseline."""
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import coxlik
from . import kernel as kern
from .coxlik import FitState, LambdaTriple
from .data import Standardizer, build_risk_index
from .errors import DimensionMismatch, NotConverged
from .solvers import SpgConfig, alpha_solve, lasso_wls, spg_maximize

MODEL_VERSION = 1


@dataclass
class FitConfig:
    """Outer-loop controls.

    ``tol`` bounds the change of the penalized objective over one full cycle,
    relative to ``max(1, |objective|)``. With ``safeguard`` on, a block update
    that lowers the objective is pulled back toward the previous value by step
    halving (up to ``max_halvings`` times) and dropped if it never improves.
    """

    max_outer_cycles: int = 50
    tol: float = 1e-5
    kernel: str = kern.GAUSSIAN
    degree: int = 2
    offset: float = 1.0
    spg: SpgConfig = field(default_factory=SpgConfig)
    safeguard: bool = True
    max_halvings: int = 20
    seed: int = None

    def __post_init__(self):
        if self.max_outer_cycles < 1:
            raise ValueError("max_outer_cycles must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def kernel_spec(self, Q):
        return kern.GarroteKernelSpec(delta=np.full(Q, 1.0 / Q), family=self.kernel,
                                      degree=self.degree, offset=self.offset)


def _identity_standardizer(P, Q):
    return Standardizer(np.zeros(P), np.ones(P), np.zeros(Q), np.ones(Q))


def _require_standardized(ds):
    if not ds.standardized:
        raise ValueError("fit on a standardized dataset (see data.standardize)")
    return ds.standardizer or _identity_standardizer(ds.P, ds.Q)


# ----------------------------------------------------------- linear lasso-Cox

def linear_objective(beta, x, risk, status, lambda1):
    return coxlik.log_partial_likelihood(x @ beta, risk, status) - lambda1 * np.abs(beta).sum()


def fit_linear_cox(x, risk, status, lambda1, beta_init=None, offset=None,
                   tol=1e-10, max_iter=200):
    """L1-penalized linear Cox fit by repeated IRLS + weighted lasso.

    Maximizes ``l_n(offset + x beta) - lambda1 |beta|_1``. Each IRLS step is
    safeguarded by step halving so the objective never decreases.

    Returns
    -------
    beta : ndarray
    converged : bool
    """
    n, P = x.shape
    beta = np.zeros(P) if beta_init is None else np.array(beta_init, dtype=float)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    if P == 0:
        return beta, True

    def obj(b):
        return (coxlik.log_partial_likelihood(off + x @ b, risk, status)
                - lambda1 * np.abs(b).sum())

    f = obj(beta)
    for _ in range(max_iter):
        eta = off + x @ beta
        grad, hess = coxlik.eta_derivatives(eta, risk, status)
        Y, W = coxlik.working_response(eta, grad, hess)
        cand = lasso_wls(Y, n * W, off, x, lambda1, beta_init=beta)
        t, fc = 1.0, obj(cand)
        step = cand - beta
        while fc < f and t > 1e-6:
            t *= 0.5
            fc = obj(beta + t * step)
        if fc < f:
            return beta, True
        new = beta + t * step
        change = np.abs(new - beta).max()
        beta, f_old, f = new, f, fc
        if change < tol or abs(f - f_old) <= 1e-15 * max(1.0, abs(f)):
            return beta, True
    return beta, False


@dataclass(eq=False)
class LassoCoxModel:
    """Linear Cox model with L1 penalty on the joint design ``[x | z]``."""

    coef: np.ndarray
    lambda1: float
    standardizer: Standardizer
    P: int
    converged: bool = True

    @property
    def beta(self):
        return self.coef[:self.P]

    @property
    def gamma(self):
        return self.coef[self.P:]

    def predict_risk(self, x_new, z_new, standardized=False):
        x_new, z_new, single = _rows(x_new, z_new)
        if not standardized:
            x_new, z_new = self.standardizer.transform(x_new, z_new)
        out = np.hstack([x_new, z_new]) @ self.coef
        return out[0] if single else out


def fit_lasso_cox(ds, lambda1, risk=None, tol=1e-10, max_iter=200):
    """Lasso-Cox baseline on the concatenated standardized design ``[x | z]``."""
    st = _require_standardized(ds)
    risk = risk or build_risk_index(ds)
    design = np.hstack([ds.x, ds.z])
    coef, ok = fit_linear_cox(design, risk, ds.status, lambda1, tol=tol, max_iter=max_iter)
    if not ok:
        warnings.warn("lasso-Cox IRLS did not converge", NotConverged, stacklevel=2)
    return LassoCoxModel(coef=coef, lambda1=float(lambda1), standardizer=st,
                         P=ds.P, converged=ok)


# ------------------------------------------------------------------- RegGKM

@dataclass(eq=False)
class FittedModel:
    """A fitted garrotized kernel Cox model, ready for out-of-sample prediction."""

    state: FitState
    lam: LambdaTriple
    kernel: kern.GarroteKernelSpec
    standardizer: Standardizer
    z_train: np.ndarray
    x_names: tuple = ()
    z_names: tuple = ()
    converged: bool = False
    n_cycles: int = 0
    objective: float = np.nan
    trace: list = field(default_factory=list)
    flagged_cycles: list = field(default_factory=list)

    @property
    def alpha(self):
        return self.state.alpha

    @property
    def beta(self):
        return self.state.beta

    @property
    def delta(self):
        return self.state.delta

    def predict_risk(self, x_new, z_new, standardized=False):
        """Risk score ``x'beta + sum_j alpha_j K(z, z_j; delta)`` for new rows.

        Raw covariates are standardized with the training statistics unless
        ``standardized`` is true. A single row returns a float.
        """
        x_new, z_new, single = _rows(x_new, z_new)
        if not standardized:
            x_new, z_new = self.standardizer.transform(x_new, z_new)
        elif x_new.shape[1] != self.beta.size or z_new.shape[1] != self.z_train.shape[1]:
            raise DimensionMismatch("new rows do not match the training dimensions")
        K = kern.cross_gram(self.kernel, z_new, self.z_train)
        out = x_new @ self.beta + K @ self.alpha
        return out[0] if single else out

    def to_dict(self):
        return {
            "version": MODEL_VERSION,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "delta": self.delta.tolist(),
            "lambda": list(self.lam.as_tuple()),
            "kernel": self.kernel.to_dict(),
            "standardization": self.standardizer.to_dict(),
            "z_train": self.z_train.tolist(),
            "eta_train": self.state.eta.tolist(),
            "x_names": list(self.x_names),
            "z_names": list(self.z_names),
            "diagnostics": {"converged": self.converged, "cycles": self.n_cycles,
                            "objective": self.objective,
                            "flagged_cycles": list(self.flagged_cycles),
                            "trace": list(self.trace)},
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        kd = d["kernel"]
        spec = kern.GarroteKernelSpec(delta=np.asarray(d["delta"], dtype=float),
                                      family=kd["family"], degree=kd.get("degree", 2),
                                      offset=kd.get("offset", 1.0))
        z_train = np.asarray(d["z_train"], dtype=float).reshape(len(d["alpha"]), spec.Q)
        K = kern.gram(spec, z_train)
        beta = np.asarray(d["beta"], dtype=float)
        st = Standardizer.from_dict(d["standardization"])
        state = FitState(alpha=np.asarray(d["alpha"], dtype=float), beta=beta,
                         delta=spec.delta, gram=K,
                         eta=np.asarray(d["eta_train"], dtype=float))
        diag = d.get("diagnostics", {})
        return cls(state=state, lam=LambdaTriple(*d["lambda"]), kernel=spec,
                   standardizer=st, z_train=z_train, x_names=tuple(d.get("x_names", ())),
                   z_names=tuple(d.get("z_names", ())),
                   converged=diag.get("converged", False), n_cycles=diag.get("cycles", 0),
                   objective=diag.get("objective", np.nan), trace=diag.get("trace", []),
                   flagged_cycles=diag.get("flagged_cycles", []))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _rows(x_new, z_new):
    x_new = np.asarray(x_new, dtype=float)
    z_new = np.asarray(z_new, dtype=float)
    single = x_new.ndim == 1 and z_new.ndim == 1
    return np.atleast_2d(x_new), np.atleast_2d(z_new), single


def init_state(ds, lam, cfg=None, risk=None, sq=None):
    """Starting point: delta = 1/Q, alpha = 1/n, beta = lasso-Cox estimate on x alone."""
    cfg = cfg or FitConfig()
    _require_standardized(ds)
    n, Q = ds.n, ds.Q
    if Q == 0:
        raise DimensionMismatch("the kernel part needs at least one z column")
    risk = risk or build_risk_index(ds)
    spec = cfg.kernel_spec(Q)
    K = kern.gram(spec, sq if sq is not None else ds.z)
    beta0, _ = fit_linear_cox(ds.x, risk, ds.status, lam.lambda1)
    return FitState.build(np.full(n, 1.0 / n), beta0, spec.delta, ds.x, K)


class _Problem:
    """Everything one fit needs, bound together: data, risk index, pair table."""

    def __init__(self, ds, lam, cfg):
        self.ds, self.lam, self.cfg = ds, lam, cfg
        self.x, self.status, self.n = ds.x, ds.status, ds.n
        self.risk = build_risk_index(ds)
        self.sq = kern.PairwiseSqDiff(ds.z)
        self.spec = cfg.kernel_spec(ds.Q)

    def objective(self, st):
        return coxlik.objective(st, self.lam, self.risk, self.status)

    def linearize(self, st):
        grad, hess = coxlik.eta_derivatives(st.eta, self.risk, self.status)
        Y, W = coxlik.working_response(st.eta, grad, hess)
        # W is the curvature of the normalized likelihood; the block quadratics
        # carry a 1/n factor of their own, so scale back to per-subject weights
        return Y, self.n * W

    def update_beta(self, st):
        Y, W = self.linearize(st)
        beta = lasso_wls(Y, W, st.gram @ st.alpha, self.x, self.lam.lambda1,
                         beta_init=st.beta)
        return st.updated(self.x, beta=beta)

    def update_alpha(self, st):
        Y, W = self.linearize(st)
        alpha = alpha_solve(st.gram, W, Y, self.x @ st.beta, self.lam.lambda3)
        return st.updated(self.x, alpha=alpha)

    def update_delta(self, st):
        xb = self.x @ st.beta
        cache = {}

        def oracle(d):
            K = kern.gram(self.spec, self.sq, delta=d)
            s = FitState(alpha=st.alpha, beta=st.beta, delta=d, gram=K, eta=xb + K @ st.alpha)
            cache["last"] = s
            val = self.objective(s)
            grad = coxlik.delta_gradient(s, self.lam, self.risk, self.status, self.sq, self.spec)
            return val, grad

        res = spg_maximize(oracle, st.delta, self.cfg.spg, warn=False)
        last = cache.get("last")
        if last is not None and np.array_equal(last.delta, res.x):
            return last
        K = kern.gram(self.spec.with_delta(res.x), self.sq)
        return FitState(alpha=st.alpha, beta=st.beta, delta=res.x, gram=K, eta=xb + K @ st.alpha)

    def guarded(self, old, f_old, new, names):
        """Accept ``new`` if it does not lower the objective, else halve the step."""
        f_new = self.objective(new)
        if not self.cfg.safeguard or f_new >= f_old:
            return new, f_new
        t = 1.0
        for _ in range(self.cfg.max_halvings):
            t *= 0.5
            changes = {k: getattr(old, k) + t * (getattr(new, k) - getattr(old, k))
                       for k in names}
            if "delta" in names:
                changes["gram"] = kern.gram(self.spec.with_delta(changes["delta"]), self.sq)
            cand = old.updated(self.x, **changes)
            f_c = self.objective(cand)
            if f_c >= f_old:
                return cand, f_c
        return old, f_old


def fit(ds, lam, cfg=None, state=None):
    """Fit the garrotized kernel Cox model at fixed penalties.

    One cycle updates beta (weighted lasso on the IRLS working response with
    offset ``K alpha``), then alpha (regularized linear system on a fresh
    linearization), then delta (SPG on the exact objective). Iteration stops
    when the objective changes by less than ``cfg.tol`` (relative) over a cycle.

    Parameters
    ----------
    ds : SurvivalDataset
        Standardized training data.
    lam : LambdaTriple
    cfg : FitConfig, optional
    state : FitState, optional
        Warm start; defaults to :func:`init_state`.
    """
    cfg = cfg or FitConfig()
    st_ = _require_standardized(ds)
    prob = _Problem(ds, lam, cfg)
    if state is None:
        state = init_state(ds, lam, cfg, risk=prob.risk, sq=prob.sq)
    f = prob.objective(state)
    trace = [f]
    flagged = []
    converged = False
    cycles = 0
    for cycles in range(1, cfg.max_outer_cycles + 1):
        f_start = f
        state, f = prob.guarded(state, f, prob.update_beta(state), ("beta",))
        trace.append(f)
        state, f = prob.guarded(state, f, prob.update_alpha(state), ("alpha",))
        trace.append(f)
        state, f = prob.guarded(state, f, prob.update_delta(state), ("delta",))
        trace.append(f)
        if f < f_start - 1e-6:
            flagged.append(cycles)
        if abs(f - f_start) <= cfg.tol * max(1.0, abs(f_start)):
            converged = True
            break
    if not converged:
        warnings.warn(f"fit stopped after {cycles} cycles without meeting tol={cfg.tol:g}",
                      NotConverged, stacklevel=2)
    return FittedModel(state=state, lam=lam, kernel=prob.spec.with_delta(state.delta),
                       standardizer=st_, z_train=ds.z.copy(), x_names=ds.x_names,
                       z_names=ds.z_names, converged=converged, n_cycles=cycles,
                       objective=f, trace=[float(v) for v in trace], flagged_cycles=flagged)

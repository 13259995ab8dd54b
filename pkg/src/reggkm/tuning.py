"""Cross-validated partial log-likelihood and penalty selection by grid search.

For folds ``k = 1..K`` with parameters ``theta_k`` fitted without fold ``k``,

    CVPL = (1/n) sum_k [ L(theta_k; all subjects) - L(theta_k; training folds) ]

where ``L`` is the unnormalized log-partial likelihood. Each summand is the
held-out fold's contribution to the full-sample likelihood. Dividing by ``n``
puts CVPL on a per-subject scale; larger is better.

The full sample is standardized once and every fold receives rows of that
standardized data, so the linear predictors of all folds are on one scale.
"""
import csv
import itertools
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError

from . import coxlik, fitter
from . import kernel as kern
from .coxlik import LambdaTriple
from .data import build_risk_index
from .errors import AllFitsFailed, FoldFitFailed, InvalidPlan, NotConverged, ReggkmError

_FIT_ERRORS = (ReggkmError, LinAlgError, FloatingPointError, ValueError)


@dataclass
class CvPlan:
    """Fold layout and penalty grid.

    The base grid is either ``grid`` (explicit triples) or the Cartesian
    product of ``n_points`` log-spaced values on each ``*_range``. Each
    refinement round re-centres on the incumbent and shrinks every axis's log
    range by ``shrink``, placing ``refine_points`` values per axis.
    """

    n_folds: int = 5
    seed: int = 0
    grid: list = None
    lambda1_range: tuple = (1e-3, 1.0)
    lambda2_range: tuple = (1e-3, 1.0)
    lambda3_range: tuple = (1e-3, 1.0)
    n_points: int = 4
    refine_rounds: int = 2
    shrink: float = 4.0
    refine_points: int = 3

    def __post_init__(self):
        if self.n_folds < 2:
            raise InvalidPlan("cross-validation needs at least 2 folds")
        if self.grid is not None and len(self.grid) == 0:
            raise InvalidPlan("grid is empty")
        if self.n_points < 1 or self.refine_points < 1 or self.refine_rounds < 0:
            raise InvalidPlan("grid sizes must be positive")
        if not self.shrink > 1:
            raise InvalidPlan("shrink must exceed 1")

    def base_grid(self):
        if self.grid is not None:
            return [g if isinstance(g, LambdaTriple) else LambdaTriple(*g) for g in self.grid]
        axes = [np.geomspace(lo, hi, self.n_points) for lo, hi in
                (self.lambda1_range, self.lambda2_range, self.lambda3_range)]
        return [LambdaTriple(*p) for p in itertools.product(*axes)]


def fold_assignment(status, n_folds, seed=0):
    """Random fold labels, stratified so events spread evenly across folds."""
    status = np.asarray(status)
    n_events = int(status.sum())
    if n_events < n_folds:
        raise InvalidPlan(f"{n_events} events cannot cover {n_folds} folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(status.size, dtype=np.int64)
    offset = 0
    for group in (np.flatnonzero(status == 1), np.flatnonzero(status == 0)):
        perm = rng.permutation(group)
        folds[perm] = (offset + np.arange(perm.size)) % n_folds
        offset += perm.size
    return folds


@dataclass
class CvResult:
    cvpl: float
    fold_terms: list
    converged: bool
    failed_folds: list = field(default_factory=list)

    @property
    def partial(self):
        return bool(self.failed_folds)


def _reggkm_fit(lam, cfg):
    def fit_train(train):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            model = fitter.fit(train, lam, cfg)

        def eta(x, z):
            return x @ model.beta + kern.cross_gram(model.kernel, z, model.z_train) @ model.alpha
        return eta, model.converged
    return fit_train


def _lasso_fit(lambda1):
    def fit_train(train):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            model = fitter.fit_lasso_cox(train, lambda1)

        def eta(x, z):
            return np.hstack([x, z]) @ model.coef
        return eta, model.converged
    return fit_train


def fold_term(ds, folds, k, fit_train, risk_full=None):
    """One CVPL summand; only rows outside fold ``k`` are passed to the fit."""
    train_idx = np.flatnonzero(folds != k)
    train = ds.subset(train_idx)
    try:
        eta_fn, ok = fit_train(train)
    except _FIT_ERRORS as exc:
        raise FoldFitFailed(k, exc) from exc
    # held-out rows are only scored, after the fit is complete
    eta = eta_fn(ds.x, ds.z)
    risk_full = risk_full or build_risk_index(ds)
    full = coxlik.log_partial_likelihood(eta, risk_full, ds.status, normalize=False)
    part = coxlik.log_partial_likelihood(eta[train_idx], build_risk_index(train),
                                         train.status, normalize=False)
    return full - part, ok


def _cross_validate(ds, plan, fit_train, folds=None):
    folds = fold_assignment(ds.status, plan.n_folds, plan.seed) if folds is None else folds
    risk = build_risk_index(ds)
    terms, failed, all_ok = [], [], True
    for k in range(plan.n_folds):
        try:
            term, ok = fold_term(ds, folds, k, fit_train, risk)
        except FoldFitFailed:
            failed.append(k)
            continue
        terms.append(float(term))
        all_ok &= bool(ok)
    if not terms:
        return CvResult(cvpl=np.nan, fold_terms=[], converged=False, failed_folds=failed)
    return CvResult(cvpl=sum(terms) / ds.n, fold_terms=terms, converged=all_ok,
                    failed_folds=failed)


def cvpl(ds, lam, plan=None, cfg=None, folds=None, details=False):
    """Cross-validated partial log-likelihood of the kernel model at ``lam``.

    ``ds`` must already be standardized on the full sample. With
    ``details=True`` a :class:`CvResult` is returned (per-fold terms, failed
    folds, convergence flag) instead of the float.
    """
    plan = plan or CvPlan()
    if not isinstance(lam, LambdaTriple):
        lam = LambdaTriple(*lam)
    res = _cross_validate(ds, plan, _reggkm_fit(lam, cfg), folds)
    return res if details else res.cvpl


def cvpl_lasso_cox(ds, lambda1, plan=None, folds=None, details=False):
    plan = plan or CvPlan()
    res = _cross_validate(ds, plan, _lasso_fit(lambda1), folds)
    return res if details else res.cvpl


@dataclass
class GridResult:
    best: LambdaTriple
    best_cvpl: float
    surface: list
    model: object = None

    def write_surface(self, path):
        write_surface(path, self.surface)


def write_surface(path, surface):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda1", "lambda2", "lambda3", "cvpl", "converged"])
        for row in surface:
            w.writerow([repr(row["lambda1"]), repr(row["lambda2"]), repr(row["lambda3"]),
                        repr(row["cvpl"]), int(row["converged"])])


def _eval_point(args):
    ds, lam, plan, cfg, folds = args
    res = cvpl(ds, lam, plan, cfg, folds=folds, details=True)
    return res


def _key(lam):
    return tuple(float(f"{v:.12g}") for v in lam.as_tuple())


def _better(a, b):
    """Is grid row ``a`` preferred over ``b``? Ties go to heavier penalties."""
    if b is None:
        return True
    ka = (a["cvpl"], a["lambda1"], a["lambda2"], a["lambda3"])
    kb = (b["cvpl"], b["lambda1"], b["lambda2"], b["lambda3"])
    return ka > kb


def _refined_axes(incumbent, base, plan, round_):
    axes = []
    for c in range(3):
        vals = np.array(sorted({lam.as_tuple()[c] for lam in base}))
        width = np.log10(vals.max() / vals.min()) / plan.shrink ** round_
        centre = np.log10(incumbent.as_tuple()[c])
        if width == 0 or plan.refine_points == 1:
            axes.append(np.array([incumbent.as_tuple()[c]]))
        else:
            axes.append(10 ** np.linspace(centre - width / 2, centre + width / 2,
                                          plan.refine_points))
    return axes


def grid_search(ds, plan=None, cfg=None, n_jobs=1, refit=True):
    """Pick the penalty triple that maximizes CVPL, then refit on all data.

    Every grid point uses the same fold assignment. Points are evaluated in
    grid order (in worker processes when ``n_jobs > 1``) and reduced in that
    order, so the outcome does not depend on ``n_jobs``.
    """
    plan = plan or CvPlan()
    folds = fold_assignment(ds.status, plan.n_folds, plan.seed)
    seen = {}
    surface = []
    best = None

    def run(points):
        nonlocal best
        todo = []
        for lam in points:
            if _key(lam) not in seen:
                seen[_key(lam)] = None
                todo.append(lam)
        args = [(ds, lam, plan, cfg, folds) for lam in todo]
        if n_jobs > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                results = list(pool.map(_eval_point, args))
        else:
            results = [_eval_point(a) for a in args]
        for lam, res in zip(todo, results):
            row = {"lambda1": lam.lambda1, "lambda2": lam.lambda2, "lambda3": lam.lambda3,
                   "cvpl": float(res.cvpl), "converged": res.converged and not res.partial}
            surface.append(row)
            if np.isfinite(row["cvpl"]) and _better(row, best):
                best = row

    base = plan.base_grid()
    run(base)
    for r in range(1, plan.refine_rounds + 1):
        if best is None:
            break
        inc = LambdaTriple(best["lambda1"], best["lambda2"], best["lambda3"])
        run([LambdaTriple(*p) for p in itertools.product(*_refined_axes(inc, base, plan, r))])
    if best is None:
        raise AllFitsFailed("no grid point produced a finite CVPL")
    lam = LambdaTriple(best["lambda1"], best["lambda2"], best["lambda3"])
    model = None
    if refit:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            model = fitter.fit(ds, lam, cfg)
    return GridResult(best=lam, best_cvpl=best["cvpl"], surface=surface, model=model)


def tune_lasso_cox(ds, lambda1_grid, plan=None, refit=True):
    """Lasso-Cox baseline tuned by the same CVPL criterion; ties go to larger lambda1."""
    plan = plan or CvPlan()
    folds = fold_assignment(ds.status, plan.n_folds, plan.seed)
    best, best_val, surface = None, -np.inf, []
    for l1 in lambda1_grid:
        res = cvpl_lasso_cox(ds, l1, plan, folds=folds, details=True)
        surface.append({"lambda1": float(l1), "cvpl": float(res.cvpl),
                        "converged": res.converged and not res.partial})
        if np.isfinite(res.cvpl) and (res.cvpl > best_val or
                                      (res.cvpl == best_val and l1 > best)):
            best, best_val = float(l1), float(res.cvpl)
    if best is None:
        raise AllFitsFailed("no lambda1 produced a finite CVPL")
    model = fitter.fit_lasso_cox(ds, best) if refit else None
    return best, best_val, surface, model

"""Simulated survival data from a Cox partially linear model.

Seven settings are provided. Clinical covariates are drawn from
U(-0.01, 0.01) and genomic covariates from U(0, 3); the true hazard is
``exp(x'beta + h(z))`` with unit baseline, so event times are exponential.
Censoring times are exponential with mean ``U * exp(x'beta + h(z))`` where
``U ~ Uniform(c, 3c)`` and ``c`` is calibrated to a target censor rate.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .data import SurvivalDataset
from .errors import CalibrationFailed, DimensionMismatch

# setting id -> (P, Q, number of active betas, h id)
SETTINGS = {
    1: (1, 5, 1, "A"),
    2: (2, 15, 1, "A"),
    3: (200, 15, 5, "B"),
    4: (15, 200, 5, "B"),
    5: (200, 200, 5, "B"),
    6: (1, 1000, 1, "B"),
    7: (1000, 1000, 5, "B"),
}
H_MIN_Q = {"A": 5, "B": 3}
PILOT_DRAWS = 20_000


def h_eval(h_id, z):
    """Nonlinear log-hazard contribution; ``z`` is a Q-vector or an n x Q array."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] < H_MIN_Q[h_id]:
        raise DimensionMismatch(f"h_{h_id} needs at least {H_MIN_Q[h_id]} coordinates")
    cos, sin, exp = np.cos, np.sin, np.exp
    if h_id == "A":
        z1, z2, z3, z4, z5 = (z[..., k] for k in range(5))
        return (0.6 * cos(z1) * z2 + 0.36 * z1 ** 2 - 0.3 * exp(z1) * z2
                - 0.36 * sin(z2) * cos(z3) + 0.6 * exp(z3) * sin(z4)
                - 0.48 * z2 * sin(z4) - 0.12 * cos(z3) * z4 ** 2
                - 0.12 * exp(z4) * cos(z5) - 0.48 * sin(z4) * z5 ** 2)
    if h_id == "B":
        z1, z2, z3 = (z[..., k] for k in range(3))
        return (0.72 * cos(z1) * z2 - 0.24 * exp(z1) * z2 + 0.72 * exp(z2) * sin(z3)
                - 0.12 * cos(z1) * z3 ** 2 - 0.12 * exp(z2) * cos(z3))
    raise ValueError(f"unknown h function {h_id!r}")


@dataclass(frozen=True)
class SettingSpec:
    setting: int
    n: int = 100
    censor_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {sorted(SETTINGS)}")
        if not 0 <= self.censor_rate < 1:
            raise ValueError("censor_rate must lie in [0, 1)")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def P(self):
        return SETTINGS[self.setting][0]

    @property
    def Q(self):
        return SETTINGS[self.setting][1]

    @property
    def h_id(self):
        return SETTINGS[self.setting][3]

    @property
    def beta(self):
        b = np.zeros(self.P)
        b[:SETTINGS[self.setting][2]] = 1.0
        return b


def _covariates(rng, spec, n):
    x = rng.uniform(-0.01, 0.01, size=(n, spec.P))
    z = rng.uniform(0.0, 3.0, size=(n, spec.Q))
    lp = x @ spec.beta + h_eval(spec.h_id, z)
    return x, z, lp


def generate(spec, censoring=None):
    """Draw one raw (unstandardized) dataset.

    Parameters
    ----------
    spec : SettingSpec
    censoring : tuple (a, b), optional
        Range of ``U``. Defaults to the calibrated range for ``spec.censor_rate``;
        ``None`` with a zero rate means no censoring.
    """
    rng = np.random.default_rng(spec.seed)
    x, z, lp = _covariates(rng, spec, spec.n)
    hazard = np.exp(lp)
    death = rng.standard_exponential(spec.n) / hazard
    if censoring is None and spec.censor_rate > 0:
        censoring = calibrate_censoring(spec, spec.censor_rate)[0]
    if censoring is None:
        time, status = death, np.ones(spec.n, dtype=np.int64)
    else:
        a, b = censoring
        u = rng.uniform(a, b, size=spec.n)
        cens = rng.standard_exponential(spec.n) * u * hazard
        status = (death <= cens).astype(np.int64)
        time = np.minimum(death, cens)
    return SurvivalDataset(time=time, status=status, x=x, z=z)


def _pilot(spec, draws, seed):
    rng = np.random.default_rng(seed)
    _, _, lp = _covariates(rng, spec, draws)
    hazard = np.exp(lp)
    death = rng.standard_exponential(draws) / hazard
    u = rng.uniform(1.0, 3.0, size=draws)  # U = c * u gives Uniform(c, 3c)
    base = rng.standard_exponential(draws) * u * hazard
    return death, base


def censor_rate_at(c, death, base):
    return float(np.mean(death > c * base))


@lru_cache(maxsize=64)
def _calibrate(setting, target, draws, seed, tol):
    spec = SettingSpec(setting=setting)
    death, base = _pilot(spec, draws, seed)
    lo, hi = 1.0, 1.0
    # censor rate falls as c grows; widen the bracket geometrically
    for _ in range(200):
        if censor_rate_at(lo, death, base) >= target:
            break
        lo /= 2.0
    else:
        raise CalibrationFailed(f"no c gives censor rate >= {target}")
    for _ in range(200):
        if censor_rate_at(hi, death, base) <= target:
            break
        hi *= 2.0
    else:
        raise CalibrationFailed(f"no c gives censor rate <= {target}")
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        rate = censor_rate_at(mid, death, base)
        if abs(rate - target) <= tol:
            return mid, rate
        if rate > target:
            lo = mid
        else:
            hi = mid
    rate = censor_rate_at(mid, death, base)
    if abs(rate - target) > 0.01:
        raise CalibrationFailed(f"bisection ended at censor rate {rate:.4f}")
    return mid, rate


def calibrate_censoring(spec, target_cr, draws=PILOT_DRAWS, seed=None, tol=0.002):
    """Find ``(a, b) = (c, 3c)`` so that the expected censor rate is ``target_cr``.

    A pilot sample of ``draws`` subjects is simulated once, and ``c`` is found
    by geometric bisection on the empirical censor rate, which is monotone in
    ``c`` because the same pilot draws are reused. Returns ``((a, b), achieved)``,
    or ``(None, 0.0)`` for a zero target.
    """
    if target_cr == 0:
        return None, 0.0
    if not 0 < target_cr < 1:
        raise ValueError("target censor rate must lie in [0, 1)")
    seed = 9_000 + spec.setting if seed is None else seed
    c, rate = _calibrate(spec.setting, float(target_cr), int(draws), int(seed), float(tol))
    return (c, 3.0 * c), rate


# ------------------------------------------------------------ benchmark harness

METHODS = ("RegGKM", "LASSO-COX")
MEASURES = ("cvpl", "cstat", "auc")
MEASURE_LABELS = {"cvpl": "CVPL", "cstat": "C-statistics", "auc": "AUC"}
REP_FIELDS = ("setting", "censor_target", "rep", "method", "cvpl", "cstat", "auc",
              "censor_rate", "converged")
DEFAULT_LASSO_GRID = (1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1)


def default_bench_plan(seed=0):
    from .tuning import CvPlan
    grid = [(l1, l2, l3) for l1 in (3e-3, 3e-2) for l2 in (1e-3, 1e-2) for l3 in (1e-3, 1e-2)]
    return CvPlan(n_folds=5, seed=seed, grid=grid, refine_rounds=0)


def replication_seed(seed, setting, censor_rate, rep):
    ss = np.random.SeedSequence([int(seed), int(setting), int(round(censor_rate * 1000)), int(rep)])
    return int(ss.generate_state(1)[0])


def run_replication(setting, censor_rate, rep, seed=0, n=100, n_test=None, methods=METHODS,
                    plan=None, cfg=None, lasso_grid=DEFAULT_LASSO_GRID, split="holdout"):
    """Generate, tune, fit and score one replication; returns one row per method.

    ``split="holdout"`` scores on an independent test sample of ``n_test``
    subjects (default ``n``) standardized with the training statistics;
    ``split="train"`` scores on the training sample itself.
    """
    import warnings
    from . import data, metrics, tuning
    from .errors import NotConverged

    n_test = n if n_test is None else n_test
    extra = n_test if split == "holdout" else 0
    if split not in ("holdout", "train"):
        raise ValueError("split must be 'holdout' or 'train'")
    spec = SettingSpec(setting, n=n + extra, censor_rate=censor_rate,
                       seed=replication_seed(seed, setting, censor_rate, rep))
    raw = generate(spec)
    train = data.standardize(raw.subset(np.arange(n)))
    test = (data.apply_standardization(raw.subset(np.arange(n, n + extra)), train.standardizer)
            if extra else train)
    plan = plan or default_bench_plan(seed=rep)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        for method in methods:
            if method == "RegGKM":
                res = tuning.grid_search(train, plan, cfg)
                model, cv, ok = res.model, res.best_cvpl, res.model.converged
            elif method == "LASSO-COX":
                _, cv, surface, model = tuning.tune_lasso_cox(train, lasso_grid, plan)
                ok = model.converged
            else:
                raise ValueError(f"unknown method {method!r}")
            scores = model.predict_risk(test.x, test.z, standardized=True)
            rows.append({"setting": setting, "censor_target": censor_rate, "rep": rep,
                         "method": method, "cvpl": float(cv),
                         "cstat": metrics.c_statistic(scores, test),
                         "auc": metrics.auc_integrated(scores, test),
                         "censor_rate": float(train.censor_rate), "converged": bool(ok)})
    return rows


def _run_task(kwargs):
    try:
        return kwargs, run_replication(**kwargs), None
    except Exception as exc:  # recorded and excluded from the summary
        return kwargs, None, f"{type(exc).__name__}: {exc}"


@dataclass
class BenchmarkResult:
    rows: list
    summary: list
    failures: list

    def write_replications(self, path):
        import csv
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REP_FIELDS)
            for r in self.rows:
                w.writerow([_fmt(r[k]) for k in REP_FIELDS])

    def write_summary(self, path):
        import csv
        fields = ("censor_target", "setting", "n", "P", "Q", "measure", "method",
                  "mean", "sd", "reps", "failed")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            for r in self.summary:
                w.writerow([_fmt(r[k]) for k in fields])

    def table(self):
        return format_table(self.summary)


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def summarize(rows, failures=(), n=100):
    """Mean and sample SD (ddof=1) of each measure per setting, censor target and method."""
    keys = []
    for r in rows:
        k = (r["censor_target"], r["setting"])
        if k not in keys:
            keys.append(k)
    out = []
    for cr, setting in keys:
        failed = sum(1 for f in failures if f["setting"] == setting and f["censor_rate"] == cr)
        P, Q = SETTINGS[setting][:2]
        for measure in MEASURES:
            for method in METHODS:
                vals = np.array([r[measure] for r in rows if r["setting"] == setting
                                 and r["censor_target"] == cr and r["method"] == method])
                if vals.size == 0:
                    continue
                sd = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
                out.append({"censor_target": cr, "setting": setting, "n": n, "P": P, "Q": Q,
                            "measure": measure, "method": method, "mean": float(vals.mean()),
                            "sd": sd, "reps": int(vals.size), "failed": failed})
    return out


def format_table(summary):
    """Text table with one line per measure and a ``mean (sd)`` column per method."""
    head = f"{'CR':>4} {'Setting':>7} {'n':>4} {'P':>5} {'Q':>5}  {'Measure':<13}" + "".join(
        f"{m:>20}" for m in METHODS)
    lines = [head, "-" * len(head)]
    cells = {}
    order = []
    for r in summary:
        k = (r["censor_target"], r["setting"], r["measure"])
        if k not in cells:
            cells[k] = {"n": r["n"], "P": r["P"], "Q": r["Q"]}
            order.append(k)
        cells[k][r["method"]] = f"{r['mean']:.4f} ({r['sd']:.4f})"
    for k in order:
        c = cells[k]
        cr, setting, measure = k
        lines.append(f"{cr * 100:>3.0f}% {setting:>7} {c['n']:>4} {c['P']:>5} {c['Q']:>5}  "
                     f"{MEASURE_LABELS[measure]:<13}"
                     + "".join(f"{c.get(m, '-'):>20}" for m in METHODS))
    return "\n".join(lines)


def run_benchmark(settings, reps, censor_rates=(0.0,), seed=0, methods=METHODS, n=100,
                  n_jobs=1, progress=None, **kwargs):
    """Monte-Carlo comparison of the kernel model against the lasso-Cox baseline.

    Each (setting, censor rate, replication) task draws its data from a seed
    derived from ``seed`` and its own coordinates, so results do not depend on
    task scheduling. Rows come back in task order. Failed replications are
    listed in ``failures`` and left out of the summary.
    """
    tasks = [dict(setting=s, censor_rate=cr, rep=r, seed=seed, methods=tuple(methods),
                  n=n, **kwargs)
             for s in settings for cr in censor_rates for r in range(reps)]
    if n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_run_task(t))
            if progress is not None:
                progress(len(results), len(tasks))
    rows, failures = [], []
    for kw, out, err in results:
        if err is None:
            rows.extend(out)
        else:
            failures.append({"setting": kw["setting"], "censor_rate": kw["censor_rate"],
                             "rep": kw["rep"], "error": err})
    return BenchmarkResult(rows=rows, summary=summarize(rows, failures, n=n), failures=failures)

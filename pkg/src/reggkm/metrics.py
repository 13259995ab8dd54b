"""Prediction accuracy for right-censored outcomes.

* :func:`c_statistic` - censoring-adjusted concordance over ``(0, xi)`` with
  inverse-probability-of-censoring weights ``1 / G(T_i-)**2``.
* :func:`auc_integrated` - incident/dynamic AUC(t) at each event time up to
  ``xi``, averaged with weights ``2 f(t) S(t)`` from the Kaplan-Meier curve.
"""
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientEvents, NoComparablePairs

C_QUANTILE = 0.7
AUC_FRACTION = 0.9


@dataclass(frozen=True, eq=False)
class KmCurve:
    """Right-continuous product-limit step function.

    ``times`` are the distinct jump times and ``surv[k]`` the value on
    ``[times[k], times[k+1])``; the curve equals 1 before ``times[0]``.
    """

    times: np.ndarray
    surv: np.ndarray
    estimand: str = "event"

    def __call__(self, t, left=False):
        """Evaluate at ``t``; ``left=True`` gives the left limit ``S(t-)``."""
        t = np.asarray(t, dtype=float)
        side = "left" if left else "right"
        k = np.searchsorted(self.times, t, side=side)
        vals = np.concatenate([[1.0], self.surv])
        return vals[k]


def kaplan_meier(time, status, estimand="event"):
    """Product-limit estimate treating ``status == 1`` as the event of interest."""
    time = np.asarray(time, dtype=float)
    status = np.asarray(status)
    ut, inv = np.unique(time, return_inverse=True)
    d = np.bincount(inv, weights=status == 1, minlength=ut.size)
    counts = np.bincount(inv, minlength=ut.size)
    at_risk = np.cumsum(counts[::-1])[::-1]
    jump = d > 0
    factors = 1.0 - d[jump] / at_risk[jump]
    return KmCurve(times=ut[jump], surv=np.cumprod(factors), estimand=estimand)


def km_censoring(time, status):
    """Kaplan-Meier estimate of the censoring survival ``G(t) = P(C > t)``."""
    return kaplan_meier(time, 1 - np.asarray(status), estimand="censoring")


def _unpack(ds_or_time, status):
    if status is None:
        return np.asarray(ds_or_time.time, dtype=float), np.asarray(ds_or_time.status)
    return np.asarray(ds_or_time, dtype=float), np.asarray(status)


def default_c_horizon(time):
    return float(np.quantile(time, C_QUANTILE))


def default_auc_horizon(time):
    return AUC_FRACTION * float(np.max(time))


def c_statistic(scores, ds, xi=None, status=None, return_pairs=False):
    """Uno's IPCW C-statistic truncated at ``xi``.

    ``ds`` is a :class:`~reggkm.data.SurvivalDataset`, or an array of times
    with ``status`` passed separately. Higher scores mean higher risk; tied
    scores earn no credit. ``xi`` defaults to the 70th percentile of observed
    time.
    """
    time, status = _unpack(ds, status)
    scores = np.asarray(scores, dtype=float)
    xi = default_c_horizon(time) if xi is None else float(xi)
    if not xi > 0:
        raise ValueError("xi must be positive")
    G = km_censoring(time, status)(time, left=True)
    use = (status == 1) & (time < xi) & (G > 0)
    idx = np.flatnonzero(use)
    w = np.zeros(time.size)
    w[idx] = 1.0 / G[idx] ** 2
    comparable = time[idx, None] < time[None, :]
    concordant = comparable & (scores[idx, None] > scores[None, :])
    den = w[idx] @ comparable.sum(axis=1)
    n_pairs = int(comparable.sum())
    if n_pairs == 0:
        raise NoComparablePairs(f"no usable pairs with an event before xi={xi:g}")
    c = float(min(w[idx] @ concordant.sum(axis=1) / den, 1.0))
    return (c, n_pairs) if return_pairs else c


def auc_curve(scores, ds, xi=None, status=None):
    """Incident/dynamic AUC(t) and its integration weights at event times ``t <= xi``.

    Returns ``(t, auc, weight)`` for the event times that have at least one
    control (a subject with ``T > t``). Case/control score ties count 1/2.
    """
    time, status = _unpack(ds, status)
    scores = np.asarray(scores, dtype=float)
    xi = default_auc_horizon(time) if xi is None else float(xi)
    ev_times = np.unique(time[(status == 1) & (time <= xi)])
    if np.sum((status == 1) & (time <= xi)) < 2:
        raise InsufficientEvents(f"need at least 2 events before xi={xi:g}")
    km = kaplan_meier(time, status)
    ts, aucs, ws = [], [], []
    for t in ev_times:
        cases = scores[(time == t) & (status == 1)]
        controls = scores[time > t]
        if controls.size == 0:
            continue
        diff = cases[:, None] - controls[None, :]
        auc = (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size
        s_t = km(t)
        f_t = km(t, left=True) - s_t
        ts.append(t)
        aucs.append(auc)
        ws.append(2.0 * f_t * s_t)
    return np.array(ts), np.array(aucs), np.array(ws)


def auc_integrated(scores, ds, xi=None, status=None):
    """Concordance-weighted average of AUC(t) over ``(0, xi]``.

    ``xi`` defaults to 90% of the largest observed time.
    """
    ts, aucs, ws = auc_curve(scores, ds, xi=xi, status=status)
    if ws.sum() <= 0:
        raise InsufficientEvents("no event time with positive weight and a control")
    # a convex combination of values in [0, 1]; clip away rounding spill
    return float(np.clip(ws @ aucs / ws.sum(), 0.0, 1.0))


@dataclass
class EvalReport:
    c_statistic: float
    xi_c: float
    auc: float
    xi_auc: float
    cvpl: float = None
    n: int = 0
    n_events: int = 0
    usable_pairs: int = 0

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    def table(self):
        rows = [("n", self.n), ("events", self.n_events), ("usable pairs", self.usable_pairs),
                ("xi (C)", self.xi_c), ("C-statistic", self.c_statistic),
                ("xi (AUC)", self.xi_auc), ("AUC", self.auc),
                ("CVPL", "" if self.cvpl is None else self.cvpl)]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:.6g}" if isinstance(v, float)
                         else f"{k:<{width}}  {v}" for k, v in rows)


def evaluate(scores, ds, cvpl=None, xi_c=None, xi_auc=None):
    time, status = _unpack(ds, None)
    xi_c = default_c_horizon(time) if xi_c is None else xi_c
    xi_auc = default_auc_horizon(time) if xi_auc is None else xi_auc
    c, pairs = c_statistic(scores, ds, xi=xi_c, return_pairs=True)
    return EvalReport(c_statistic=c, xi_c=float(xi_c),
                      auc=auc_integrated(scores, ds, xi=xi_auc), xi_auc=float(xi_auc),
                      cvpl=cvpl, n=int(time.size), n_events=int(status.sum()),
                      usable_pairs=pairs)

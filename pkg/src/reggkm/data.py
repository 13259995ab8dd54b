"""Survival datasets: standardization, risk-set indexing and CSV I/O."""
import csv
import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import (ConstantColumn, DimensionMismatch, MissingValue,
                     NonFinite, ParseError, SchemaMismatch)

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class Standardizer:
    """Column means and standard deviations of a training sample."""

    x_mean: np.ndarray
    x_sd: np.ndarray
    z_mean: np.ndarray
    z_sd: np.ndarray

    def transform(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if x.shape[-1] != self.x_mean.size or z.shape[-1] != self.z_mean.size:
            raise DimensionMismatch(
                f"expected {self.x_mean.size} x-columns and {self.z_mean.size} "
                f"z-columns, got {x.shape[-1]} and {z.shape[-1]}")
        return (x - self.x_mean) / self.x_sd, (z - self.z_mean) / self.z_sd

    def inverse(self, x, z):
        return (np.asarray(x) * self.x_sd + self.x_mean,
                np.asarray(z) * self.z_sd + self.z_mean)

    def to_dict(self):
        return {k: getattr(self, k).tolist()
                for k in ("x_mean", "x_sd", "z_mean", "z_sd")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: np.asarray(d[k], dtype=float).reshape(-1)
                      for k in ("x_mean", "x_sd", "z_mean", "z_sd")})


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Right-censored survival data with a clinical (x) and genomic (z) block.

    Rows are kept in input order; ``order`` gives the permutation that sorts
    observed times ascending, with events placed before censorings at equal
    times.
    """

    time: np.ndarray
    status: np.ndarray
    x: np.ndarray
    z: np.ndarray
    standardized: bool = False
    x_names: tuple = None
    z_names: tuple = None
    standardizer: Standardizer = field(default=None, repr=False)

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).reshape(-1)
        n = time.size
        status = np.asarray(self.status)
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if x.ndim == 1 and x.size == 0:
            x = np.zeros((n, 0))
        if z.ndim == 1 and z.size == 0:
            z = np.zeros((n, 0))
        if x.ndim != 2 or z.ndim != 2:
            raise DimensionMismatch("x and z must be two-dimensional")
        if status.shape != (n,) or x.shape[0] != n or z.shape[0] != n:
            raise DimensionMismatch(
                f"row counts disagree: time {n}, status {status.shape}, "
                f"x {x.shape}, z {z.shape}")
        for name, arr in (("time", time), ("x", x), ("z", z)):
            if not np.all(np.isfinite(arr)):
                raise NonFinite(f"{name} contains NaN or infinite entries")
        if np.any(time < 0):
            raise ValueError("observed times must be nonnegative")
        if not np.all((status == 0) | (status == 1)):
            raise SchemaMismatch("status must contain only 0 and 1")
        x_names = tuple(self.x_names) if self.x_names is not None else tuple(
            f"x{j + 1}" for j in range(x.shape[1]))
        z_names = tuple(self.z_names) if self.z_names is not None else tuple(
            f"z{j + 1}" for j in range(z.shape[1]))
        if len(x_names) != x.shape[1] or len(z_names) != z.shape[1]:
            raise DimensionMismatch("column names do not match column counts")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status.astype(np.int64))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x_names", x_names)
        object.__setattr__(self, "z_names", z_names)

    @property
    def n(self):
        return self.time.size

    @property
    def P(self):
        return self.x.shape[1]

    @property
    def Q(self):
        return self.z.shape[1]

    @property
    def censor_rate(self):
        return 1.0 - self.status.mean()

    @cached_property
    def order(self):
        # lexsort is stable: primary key time, then events (status 1) first
        return np.lexsort((1 - self.status, self.time))

    def subset(self, idx):
        """Rows ``idx`` as a new dataset; standardization flags carry over."""
        idx = np.asarray(idx)
        return replace(self, time=self.time[idx], status=self.status[idx],
                       x=self.x[idx], z=self.z[idx])


def _check_finite(ds):
    for name, arr in (("x", ds.x), ("z", ds.z)):
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"{name} contains NaN or infinite entries")


def standardize(ds):
    """Center and scale every covariate column to mean 0 and SD 1.

    The SD uses the n - 1 denominator. The fitted statistics are kept on the
    returned dataset (``ds.standardizer``) so the same transform can be applied
    to new rows with :func:`apply_standardization`.
    """
    if ds.standardized:
        raise ValueError("dataset is already standardized")
    _check_finite(ds)
    stats = []
    for block, names in ((ds.x, ds.x_names), (ds.z, ds.z_names)):
        mean = block.mean(axis=0)
        sd = block.std(axis=0, ddof=1) if ds.n > 1 else np.zeros(block.shape[1])
        for j in range(block.shape[1]):
            if not sd[j] > 0 or not np.isfinite(sd[j]):
                raise ConstantColumn(names[j])
            # relative floor catches columns that are constant up to rounding
            if sd[j] <= 1e-12 * max(1.0, abs(mean[j])):
                raise ConstantColumn(names[j])
        stats += [mean, sd]
    st = Standardizer(*stats)
    x, z = st.transform(ds.x, ds.z)
    return replace(ds, x=x, z=z, standardized=True, standardizer=st)


def apply_standardization(ds, standardizer):
    """Standardize ``ds`` with statistics estimated on another (training) sample."""
    if ds.standardized:
        raise ValueError("dataset is already standardized")
    x, z = standardizer.transform(ds.x, ds.z)
    return replace(ds, x=x, z=z, standardized=True, standardizer=standardizer)


def unstandardize(ds):
    if not ds.standardized or ds.standardizer is None:
        raise ValueError("dataset carries no standardization statistics")
    x, z = ds.standardizer.inverse(ds.x, ds.z)
    return replace(ds, x=x, z=z, standardized=False, standardizer=None)


@dataclass(frozen=True, eq=False)
class RiskIndex:
    """Risk-set structure over the ascending time order.

    With subjects sorted by time (events first among ties), the risk set of the
    subject at sorted position ``k`` is the suffix ``[start[k], n)`` and the
    risk sets containing it are those of positions ``[0, stop[k])``. Subjects
    sharing an observed time share one risk set (Breslow convention).
    """

    order: np.ndarray
    rank: np.ndarray
    start: np.ndarray
    stop: np.ndarray

    @property
    def n(self):
        return self.order.size

    def risk_set(self, i):
        """Original indices of R_i = {l : T_l >= T_i}."""
        return np.sort(self.order[self.start[self.rank[i]]:])

    def containing(self, i):
        """Original indices m whose risk set R_m contains subject ``i``."""
        return np.sort(self.order[:self.stop[self.rank[i]]])


def build_risk_index(ds):
    if ds.n == 0:
        raise ValueError("empty dataset")
    order = ds.order
    t = ds.time[order]
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    start = np.searchsorted(t, t, side="left")
    stop = np.searchsorted(t, t, side="right")
    return RiskIndex(order=order, rank=rank, start=start, stop=stop)


# ---------------------------------------------------------------- CSV I/O

def load_schema(schema):
    """Schema as a dict, or a path to a JSON file ``{"time", "status", "x", "z"}``."""
    if not isinstance(schema, dict):
        with open(schema, encoding="utf-8") as fh:
            schema = json.load(fh)
    missing = {"time", "status", "x", "z"} - set(schema)
    if missing:
        raise SchemaMismatch(f"schema lacks keys: {sorted(missing)}")
    if not isinstance(schema["x"], list) or not isinstance(schema["z"], list):
        raise SchemaMismatch("schema 'x' and 'z' must be lists of column names")
    return schema


def _parse(value, row, col):
    if value.strip().lower() in _MISSING_TOKENS:
        raise MissingValue(row, col)
    try:
        return float(value)
    except ValueError:
        raise ParseError(row, col, value) from None


def read_csv(path, schema):
    """Read a UTF-8 CSV with a header row into a raw :class:`SurvivalDataset`.

    Row numbers in errors count data rows from 1 (the header is row 0).
    """
    schema = load_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaMismatch("file is empty; a header row is required") from None
        wanted = [schema["time"], schema["status"], *schema["x"], *schema["z"]]
        absent = [c for c in wanted if c not in header]
        if absent:
            raise SchemaMismatch(f"columns not found in header: {absent}")
        pos = {c: header.index(c) for c in wanted}
        rows = []
        for r, rec in enumerate(reader, start=1):
            if not rec or all(not v.strip() for v in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(r, None, f"{len(rec)} fields, expected {len(header)}")
            rows.append([_parse(rec[pos[c]], r, c) for c in wanted])
    data = np.array(rows, dtype=float).reshape(len(rows), len(wanted))
    status = data[:, 1]
    bad = np.flatnonzero((status != 0) & (status != 1))
    if bad.size:
        raise SchemaMismatch(
            f"status column {schema['status']!r} must be 0/1; row {bad[0] + 1} "
            f"has {status[bad[0]]:g}")
    P = len(schema["x"])
    return SurvivalDataset(time=data[:, 0], status=status.astype(np.int64),
                           x=data[:, 2:2 + P], z=data[:, 2 + P:],
                           x_names=schema["x"], z_names=schema["z"])


def schema_for(ds, time="time", status="status"):
    return {"time": time, "status": status, "x": list(ds.x_names),
            "z": list(ds.z_names)}


def write_csv(path, ds, time="time", status="status"):
    """Write ``ds`` so that :func:`read_csv` with :func:`schema_for` restores it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([time, status, *ds.x_names, *ds.z_names])
        for i in range(ds.n):
            w.writerow([repr(float(ds.time[i])), int(ds.status[i]),
                        *map(repr, ds.x[i].tolist()), *map(repr, ds.z[i].tolist())])

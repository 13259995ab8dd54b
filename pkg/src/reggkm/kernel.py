"""Garrotized kernels, Gram matrices and their derivatives in the garrote weights.

The garrotized kernel rescales coordinate ``q`` of both arguments by
``sqrt(delta_q)`` before applying a base kernel, so ``delta_q = 0`` removes
coordinate ``q`` entirely. Two base families are supported:

* Gaussian:   ``K_ij = exp(-sum_q delta_q (z_iq - z_jq)**2)``
* Polynomial: ``K_ij = (sum_q delta_q z_iq z_jq + offset)**degree``

Derivatives with respect to ``delta`` are never materialized as ``Q x n*n``
arrays. Everything the optimizer needs is a contraction
``v_q = sum_ij M_ij dK_ij/d delta_q`` for some weight matrix ``M``, which costs
one pass over the pairwise table.
"""
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch

GAUSSIAN = "gaussian"
POLYNOMIAL = "polynomial"


@dataclass(frozen=True, eq=False)
class GarroteKernelSpec:
    """Base-kernel family, its fixed hyperparameters, and the garrote weights."""

    delta: np.ndarray
    family: str = GAUSSIAN
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float).reshape(-1)
        if np.any(delta < 0) or not np.all(np.isfinite(delta)):
            raise ValueError("garrote weights must be finite and nonnegative")
        if self.family not in (GAUSSIAN, POLYNOMIAL):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == POLYNOMIAL:
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be an integer >= 1")
            if self.offset < 0:
                raise ValueError("polynomial offset must be nonnegative")
        object.__setattr__(self, "delta", delta)

    @property
    def Q(self):
        return self.delta.size

    def with_delta(self, delta):
        return replace(self, delta=delta)

    def to_dict(self):
        d = {"family": self.family}
        if self.family == POLYNOMIAL:
            d.update(degree=int(self.degree), offset=float(self.offset))
        return d


class PairwiseSqDiff:
    """Per-coordinate squared differences over the pairs ``i < j``.

    ``table[p, q] = (z[i_p, q] - z[j_p, q])**2`` with pairs enumerated in
    row-major upper-triangle order (``np.triu_indices(n, 1)``). The diagonal is
    identically zero and the lower triangle is its mirror image, so neither is
    stored. Built once per dataset and reused for every ``delta``.
    """

    def __init__(self, z):
        z = np.asarray(z, dtype=float)
        if z.ndim != 2:
            raise DimensionMismatch("z must be an n x Q matrix")
        self.z = z
        self.n, self.Q = z.shape
        self.iu, self.ju = np.triu_indices(self.n, 1)

    @cached_property
    def table(self):
        n, z = self.n, self.z
        table = np.empty((self.iu.size, self.Q))
        lo = 0
        # one row block at a time keeps the temporary small when Q is large
        for i in range(n - 1):
            hi = lo + n - 1 - i
            np.subtract(z[i + 1:], z[i], out=table[lo:hi])
            lo = hi
        np.square(table, out=table)
        return table

    def full(self, q):
        """Dense n x n matrix of ``(z_iq - z_jq)**2`` for one coordinate."""
        out = np.zeros((self.n, self.n))
        out[self.iu, self.ju] = self.table[:, q]
        return out + out.T


def _check_delta(spec, Q):
    if spec.Q != Q:
        raise DimensionMismatch(f"kernel has {spec.Q} garrote weights, data has {Q} coordinates")


def gram(spec, sq, delta=None):
    """Gram matrix K(delta) over the rows of ``sq`` (a :class:`PairwiseSqDiff` or z).

    ``delta`` overrides ``spec.delta`` without re-validating it; the optimizer
    uses this for iterates it has already projected onto delta >= 0.
    """
    if not isinstance(sq, PairwiseSqDiff):
        sq = PairwiseSqDiff(sq)
    delta = spec.delta if delta is None else delta
    if delta.size != sq.Q:
        raise DimensionMismatch(f"kernel has {delta.size} garrote weights, data has {sq.Q} coordinates")
    n = sq.n
    if spec.family == GAUSSIAN:
        K = np.ones((n, n))
        if n > 1:
            vals = np.exp(-(sq.table @ delta))
            K[sq.iu, sq.ju] = vals
            K[sq.ju, sq.iu] = vals
        return K
    zs = sq.z * delta
    base = zs @ sq.z.T + spec.offset
    base = 0.5 * (base + base.T)
    return base ** spec.degree


def cross_gram(spec, z_new, z_train):
    """Kernel values between each row of ``z_new`` and each row of ``z_train``."""
    z_new = np.atleast_2d(np.asarray(z_new, dtype=float))
    z_train = np.asarray(z_train, dtype=float)
    if z_new.shape[1] != z_train.shape[1]:
        raise DimensionMismatch(
            f"new rows have {z_new.shape[1]} coordinates, training rows {z_train.shape[1]}")
    _check_delta(spec, z_train.shape[1])
    if spec.family == GAUSSIAN:
        w = np.sqrt(spec.delta)
        a, b = z_new * w, z_train * w
        # direct differences, not the |a|^2 - 2ab + |b|^2 expansion, so that a
        # copy of a training row gives exactly 1
        d2 = np.empty((a.shape[0], b.shape[0]))
        for r in range(a.shape[0]):
            d2[r] = np.square(b - a[r]).sum(axis=1)
        return np.exp(-d2)
    return ((z_new * spec.delta) @ z_train.T + spec.offset) ** spec.degree


def kernel_row(spec, z_new, z_train):
    """Vector ``k_j = K(z_new, z_train[j]; delta)`` for a single new point."""
    z_new = np.asarray(z_new, dtype=float)
    if z_new.ndim != 1:
        raise DimensionMismatch("kernel_row takes one point; use cross_gram for several")
    return cross_gram(spec, z_new, z_train)[0]


def delta_contraction(spec, sq, K, M, delta=None):
    """Return ``v_q = sum_{i,j} M_ij * dK_ij / d delta_q``.

    For the Gaussian family ``dK_ij/d delta_q = -K_ij (z_iq - z_jq)**2``. The
    double sum is reduced as one matrix-vector product over the stored
    upper-triangle pairs (``M_ij + M_ji`` folded onto each pair), so the
    summation order is fixed by the pair enumeration and the result is
    reproducible for a fixed BLAS configuration.
    """
    M = np.asarray(M, dtype=float)
    n = sq.n
    if K.shape != (n, n) or M.shape != (n, n):
        raise DimensionMismatch(f"K and M must be {n} x {n}")
    delta = spec.delta if delta is None else delta
    if delta.size != sq.Q:
        raise DimensionMismatch(f"kernel has {delta.size} garrote weights, data has {sq.Q} coordinates")
    if spec.family == GAUSSIAN:
        if n < 2:
            return np.zeros(sq.Q)
        w = (M[sq.iu, sq.ju] + M[sq.ju, sq.iu]) * K[sq.iu, sq.ju]
        return -(w @ sq.table)
    d = spec.degree
    base = ((sq.z * delta) @ sq.z.T + spec.offset) ** (d - 1)
    R = d * M * base
    return np.einsum("ij,iq,jq->q", R, sq.z, sq.z)


def delta_contraction_outer(spec, sq, K, u, v, delta=None):
    """:func:`delta_contraction` for the rank-one weight matrix ``M = u v'``.

    Avoids forming ``M``; same pair order and therefore the same reduction.
    """
    if spec.family != GAUSSIAN:
        return delta_contraction(spec, sq, K, np.outer(u, v), delta)
    if sq.n < 2:
        return np.zeros(sq.Q)
    iu, ju = sq.iu, sq.ju
    w = (u[iu] * v[ju] + u[ju] * v[iu]) * K[iu, ju]
    return -(w @ sq.table)

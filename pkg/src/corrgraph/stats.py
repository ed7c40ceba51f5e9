"""Correlation test statistics, asymptotic p-values and pair covariances.

Four statistics are supported for testing rho_ij = 0 on each variable pair,
all asymptotically standard normal under the null:

- ``empirical``:    sqrt(n) * r
- ``student``:      sqrt(n-2) * r / sqrt(1 - r^2)
- ``fisher``:       sqrt(n-3)/2 * log((1+r)/(1-r))
- ``secondorder``:  sqrt(n) * mean(Z) / sd(Z), with Z the per-observation
  products of the (internally standardized) centered columns

where r is the empirical Pearson correlation of the pair.

The joint asymptotic covariance of each statistic vector is available both
in Gaussian closed form (:func:`omega_gaussian`, a function of the
correlation matrix alone) and as a fourth-moment plug-in valid for
non-Gaussian data (:func:`fourth_moments` + :func:`omega_general`).

The normal CDF/quantile are scipy's ``ndtr``/``ndtri`` (relative accuracy
well below 1e-12 over the ranges used here).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import CorrelationMatrix, SampleMatrix, empirical_correlation, pair_indices, standardize
from .errors import DegenerateInputError, SingularityError

__all__ = [
    "StatKind",
    "StatVector",
    "PValueVector",
    "PairCovariance",
    "FourthMoments",
    "statistic",
    "p_values",
    "omega_gaussian",
    "fourth_moments",
    "omega_general",
]

# Correlations at magnitude >= 1 - SATURATION_EPS are clipped before the
# Student/Fisher transforms, so duplicated columns yield a huge finite
# statistic (p-value underflows to 0) instead of an infinity.
SATURATION_EPS = 1e-12


class StatKind(str, enum.Enum):
    EMPIRICAL = "empirical"
    STUDENT = "student"
    FISHER = "fisher"
    SECOND_ORDER = "secondorder"


@dataclass(frozen=True)
class StatVector:
    """Length-m vector of test statistics in flat pair order."""

    kind: StatKind
    values: np.ndarray
    n: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("statistic vector contains non-finite entries")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PValueVector:
    """Two-sided asymptotic p-values, p_i = 2 (1 - Phi(|T_i|))."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if np.any((values < 0.0) | (values > 1.0)):
            raise ValueError("p-values outside [0, 1]")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PairCovariance:
    """m x m asymptotic covariance of a statistic vector, in pair order."""

    values: np.ndarray
    kind: StatKind
    source: str  # "gaussian-closed-form" | "fourth-moment-plugin" | "oracle"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("pair covariance must be square")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FourthMoments:
    """Standardized fourth cross-moments rho_{ijkl} plus the correlations.

    ``tensor[i, j, k, l]`` is the expectation of the product of the four
    standardized (mean 0, variance 1) variables; symmetric under any
    permutation of the indexes.
    """

    tensor: np.ndarray
    corr: np.ndarray

    def __post_init__(self):
        tensor = np.asarray(self.tensor, dtype=float)
        corr = np.asarray(self.corr, dtype=float)
        p = corr.shape[0]
        if tensor.shape != (p, p, p, p):
            raise ValueError("fourth-moment tensor shape does not match corr")
        object.__setattr__(self, "tensor", tensor)
        object.__setattr__(self, "corr", corr)

    @property
    def p(self) -> int:
        return self.corr.shape[0]


def _saturate(rho: np.ndarray) -> np.ndarray:
    return np.clip(rho, -(1.0 - SATURATION_EPS), 1.0 - SATURATION_EPS)


def statistic(samples: SampleMatrix, kind: StatKind) -> StatVector:
    """Compute the length-m statistic vector of the given kind."""
    kind = StatKind(kind)
    n = samples.n
    if n < 4:
        raise ValueError(f"need n >= 4 observations for statistics, got n={n}")
    if kind is StatKind.SECOND_ORDER:
        return _second_order_statistic(samples)
    rho = empirical_correlation(samples).pair_values()
    if kind is StatKind.EMPIRICAL:
        values = np.sqrt(n) * rho
    elif kind is StatKind.STUDENT:
        r = _saturate(rho)
        values = np.sqrt(n - 2) * r / np.sqrt(1.0 - r * r)
    else:  # Fisher
        r = _saturate(rho)
        values = np.sqrt(n - 3) * np.arctanh(r)
    return StatVector(kind=kind, values=values, n=n)


def _second_order_statistic(samples: SampleMatrix) -> StatVector:
    n = samples.n
    x = standardize(samples).data
    i, j = pair_indices(samples.p)
    z = x[:, i] * x[:, j]
    zbar = z.mean(axis=0)
    theta = z.var(axis=0)
    bad = np.flatnonzero(theta <= 0.0)
    if bad.size:
        a, b = int(i[bad[0]]) + 1, int(j[bad[0]]) + 1
        raise DegenerateInputError(
            f"second-order variance estimate is zero for pair ({a}, {b})"
        )
    values = np.sqrt(n) * zbar / np.sqrt(theta)
    return StatVector(kind=StatKind.SECOND_ORDER, values=values, n=n)


def p_values(stats: StatVector) -> PValueVector:
    """Two-sided asymptotic p-values 2 (1 - Phi(|T|))."""
    return PValueVector(2.0 * ndtr(-np.abs(stats.values)))


# ---------------------------------------------------------------------------
# Gaussian closed-form covariances
# ---------------------------------------------------------------------------

def _omega_empirical_gaussian(gamma: np.ndarray) -> np.ndarray:
    """Closed-form Omega for the empirical-correlation vector, Gaussian data.

    Entries dispatch on how many variables the two pairs share: the same
    pair, exactly one shared variable, or none.  The one-shared-variable
    rule is applied after mapping the pair-of-pairs onto the representative
    pattern (shared, b), (shared, c), which is valid because the covariance
    is symmetric in within-pair order.
    """
    p = gamma.shape[0]
    i, j = pair_indices(p)
    r = gamma[i, j]
    m = r.size

    i1, j1 = i[:, None], j[:, None]
    i2, j2 = i[None, :], j[None, :]
    r1 = r[:, None] * np.ones((1, m))
    r2 = r[None, :] * np.ones((m, 1))

    omega = np.empty((m, m))

    # No shared variable: general four-index formula with (i,j,k,l).
    ii, jj = np.broadcast_to(i1, (m, m)), np.broadcast_to(j1, (m, m))
    kk, ll = np.broadcast_to(i2, (m, m)), np.broadcast_to(j2, (m, m))
    r_ik = gamma[ii, kk]
    r_il = gamma[ii, ll]
    r_jk = gamma[jj, kk]
    r_jl = gamma[jj, ll]
    omega[:] = (
        0.5 * r1 * r2 * (r_ik**2 + r_il**2 + r_jk**2 + r_jl**2)
        + r_ik * r_jl
        + r_il * r_jk
        - r_ik * r_jk * r2
        - r1 * r_ik * r_il
        - r1 * r_jk * r_jl
        - r_il * r_jl * r2
    )

    # Exactly one shared variable: map onto (shared, b), (shared, c) and use
    # the representative formula, which needs only rho(pair1), rho(pair2) and
    # the correlation between the two non-shared variables b, c.
    for mask, b, c in (
        ((ii == kk) & (jj != ll), jj, ll),
        ((jj == ll) & (ii != kk), ii, kk),
        (jj == kk, ii, ll),
        (ii == ll, jj, kk),
    ):
        if not mask.any():
            continue
        rbc = gamma[b[mask], c[mask]]
        ra, rb = r1[mask], r2[mask]
        omega[mask] = (
            -0.5 * ra * rb * (1.0 - ra * ra - rb * rb - rbc * rbc)
            + rbc * (1.0 - ra * ra - rb * rb)
        )

    # Same pair.
    diag_idx = np.arange(m)
    omega[diag_idx, diag_idx] = (1.0 - r * r) ** 2
    return omega


def _omega_second_order_gaussian(gamma: np.ndarray) -> np.ndarray:
    """Closed-form Omega for the second-order statistic, Gaussian data.

    Numerator is the centered cross-moment rho_ik rho_jl + rho_il rho_jk,
    so the diagonal is exactly 1 for every pair (the statistic is
    self-normalized).
    """
    p = gamma.shape[0]
    i, j = pair_indices(p)
    r = gamma[i, j]
    m = r.size
    ii = np.broadcast_to(i[:, None], (m, m))
    jj = np.broadcast_to(j[:, None], (m, m))
    kk = np.broadcast_to(i[None, :], (m, m))
    ll = np.broadcast_to(j[None, :], (m, m))
    num = gamma[ii, kk] * gamma[jj, ll] + gamma[ii, ll] * gamma[jj, kk]
    scale = np.sqrt(1.0 + r * r)
    return num / np.outer(scale, scale)


def omega_gaussian(gamma: CorrelationMatrix, kind: StatKind) -> PairCovariance:
    """Asymptotic m x m covariance of a statistic vector for Gaussian data.

    Student/Fisher kinds require all |rho_ij| < 1 strictly (the Delta-method
    rescaling is singular at unit correlation).
    """
    kind = StatKind(kind)
    g = gamma.values
    r = gamma.pair_values()
    if kind is StatKind.SECOND_ORDER:
        return PairCovariance(
            _omega_second_order_gaussian(g), kind=kind, source="gaussian-closed-form"
        )
    if kind in (StatKind.STUDENT, StatKind.FISHER) and np.any(np.abs(r) >= 1.0):
        raise SingularityError(
            "unit correlation: Student/Fisher covariance is singular"
        )
    omega = _omega_empirical_gaussian(g)
    omega = _rescale(omega, r, r, kind)
    return PairCovariance(omega, kind=kind, source="gaussian-closed-form")


def _rescale(omega: np.ndarray, r1: np.ndarray, r2: np.ndarray, kind: StatKind) -> np.ndarray:
    if kind is StatKind.EMPIRICAL:
        return omega
    d1 = 1.0 - r1 * r1
    d2 = 1.0 - r2 * r2
    if kind is StatKind.STUDENT:
        return omega / np.outer(d1, d2) ** 1.5
    if kind is StatKind.FISHER:
        return omega / np.outer(d1, d2)
    raise ValueError(f"no rescaling for kind {kind}")


# ---------------------------------------------------------------------------
# Fourth-moment plug-in covariances (non-Gaussian data)
# ---------------------------------------------------------------------------

def fourth_moments(samples: SampleMatrix) -> FourthMoments:
    """Plug-in standardized fourth cross-moments of the sample columns.

    Averages products of four centered columns (divisor n), normalized by
    the product of the four standard deviations; equivalently, averages of
    products of four standardized columns.
    """
    x = standardize(samples).data
    tensor = np.einsum("ni,nj,nk,nl->ijkl", x, x, x, x) / samples.n
    corr = empirical_correlation(samples).values
    return FourthMoments(tensor=tensor, corr=corr)


def isserlis_fourth_moments(gamma: CorrelationMatrix) -> FourthMoments:
    """Exact Gaussian fourth moments from a correlation matrix.

    rho_{ijkl} = rho_ij rho_kl + rho_ik rho_jl + rho_il rho_jk.  Used as an
    analytic oracle linking :func:`omega_general` to :func:`omega_gaussian`.
    """
    g = gamma.values
    tensor = (
        np.einsum("ij,kl->ijkl", g, g)
        + np.einsum("ik,jl->ijkl", g, g)
        + np.einsum("il,jk->ijkl", g, g)
    )
    return FourthMoments(tensor=tensor, corr=g.copy())


def omega_general(moments: FourthMoments, kind: StatKind) -> PairCovariance:
    """Asymptotic covariance from fourth moments (general distributions)."""
    kind = StatKind(kind)
    p = moments.p
    t = moments.tensor
    g = moments.corr
    i, j = pair_indices(p)
    r = g[i, j]
    m = r.size
    ii = np.broadcast_to(i[:, None], (m, m))
    jj = np.broadcast_to(j[:, None], (m, m))
    kk = np.broadcast_to(i[None, :], (m, m))
    ll = np.broadcast_to(j[None, :], (m, m))

    if kind is StatKind.SECOND_ORDER:
        var2 = t[i, j, i, j] - r * r
        if np.any(var2 <= 0.0):
            raise SingularityError(
                "nonpositive second-order variance term rho_ijij - rho_ij^2"
            )
        num = t[ii, jj, kk, ll] - np.outer(r, r)
        return PairCovariance(
            num / np.sqrt(np.outer(var2, var2)),
            kind=kind,
            source="fourth-moment-plugin",
        )

    r1 = r[:, None]
    r2 = r[None, :]
    omega = (
        t[ii, jj, kk, ll]
        + 0.25 * r1 * r2 * (
            t[ii, ii, kk, kk] + t[ii, ii, ll, ll] + t[jj, jj, kk, kk] + t[jj, jj, ll, ll]
        )
        - 0.5 * r1 * (t[ii, ii, kk, ll] + t[jj, jj, kk, ll])
        - 0.5 * r2 * (t[ii, jj, kk, kk] + t[ii, jj, ll, ll])
    )
    if kind in (StatKind.STUDENT, StatKind.FISHER):
        if np.any(np.abs(r) >= 1.0):
            raise SingularityError(
                "unit correlation: Student/Fisher covariance is singular"
            )
        omega = _rescale(omega, r, r, kind)
    return PairCovariance(omega, kind=kind, source="fourth-moment-plugin")

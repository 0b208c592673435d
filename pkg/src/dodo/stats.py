"""Statistical kernel: Welch's t-test, partial correlation, Fisher z.

Tail probabilities are computed in-house (regularized incomplete beta
for the Student t distribution, erfc for the normal) so the package has
no runtime dependency on a stats library and the test suite can compare
against an independent reference implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Floor on the squared Cholesky pivot before a correlation matrix is
# treated as numerically singular. Exactly collinear columns leave a
# squared pivot at a few machine epsilons (measured <= ~1e-15, sample
# size independent), while the smallest genuinely testable conditional
# variance fractions in supported worlds (noise four orders below the
# signal) measure >= ~5e-13. Below this floor the double-precision
# correlation matrix carries no information about the partial
# correlation, so the test is declared untestable rather than returning
# roundoff noise.
PD_TOLERANCE = 1e-14

_BETA_MAX_ITER = 300
_BETA_EPS = 3e-16
_BETA_FPMIN = 1e-300


class UntestableError(ValueError):
    """A conditional independence test cannot be evaluated on this data
    (constant column or numerically singular correlation matrix)."""


class InsufficientSamplesError(ValueError):
    """Too few samples for the requested conditioning set size."""


@dataclass(frozen=True)
class PValue:
    """Two-sided test result: p-value, test statistic, degrees of freedom."""

    value: float
    statistic: float
    dof: float


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz scheme."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_FPMIN:
        d = _BETA_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # The continued fraction converges fast only on one side of the mean.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def student_t_two_sided(t: float, dof: float) -> float:
    """P(|T| >= |t|) for a Student t variable with ``dof`` degrees of freedom."""
    if dof <= 0.0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    if math.isinf(t):
        return 0.0
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def normal_sf(z: float) -> float:
    """Upper tail P(Z >= z) of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def sample_mean(values: Sequence[float] | np.ndarray) -> float:
    """Arithmetic mean; rejects empty input."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("mean of empty sample is undefined")
    return float(arr.mean())


def welch_t_test(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> PValue:
    """Two-sided Welch t-test for a difference in means.

    Uses unbiased variances and the Welch-Satterthwaite degrees of
    freedom. Degenerate inputs where both samples have zero variance are
    decided exactly: equal means give p = 1, unequal means give p = 0
    with an infinite statistic.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size < 2 or xb.size < 2:
        raise InsufficientSamplesError(
            f"welch test needs at least 2 samples per side, got {xa.size} and {xb.size}"
        )
    mean_a = float(xa.mean())
    mean_b = float(xb.mean())
    var_a = float(xa.var(ddof=1))
    var_b = float(xb.var(ddof=1))
    if var_a == 0.0 and var_b == 0.0:
        if mean_a == mean_b:
            return PValue(value=1.0, statistic=0.0, dof=0.0)
        return PValue(value=0.0, statistic=math.copysign(math.inf, mean_a - mean_b), dof=0.0)
    sa = var_a / xa.size
    sb = var_b / xb.size
    se2 = sa + sb
    t = (mean_a - mean_b) / math.sqrt(se2)
    denom = sa * sa / (xa.size - 1) + sb * sb / (xb.size - 1)
    if denom == 0.0:
        # Subnormal variance ratios square to zero and leave the
        # Welch-Satterthwaite formula 0/0; fall back to its upper bound.
        dof = float(xa.size + xb.size - 2)
    else:
        dof = se2 * se2 / denom
    return PValue(value=student_t_two_sided(abs(t), dof), statistic=t, dof=dof)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Pearson correlation matrix plus the set of degenerate columns.

    Degenerate (constant) columns get zero correlation with everything
    and a unit diagonal, and are reported so downstream tests can refuse
    to condition on them.
    """

    values: np.ndarray
    degenerate: frozenset[int]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _data_values(data) -> np.ndarray:
    values = getattr(data, "values", data)
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a (k, n) sample matrix, got shape {arr.shape}")
    return arr


def pearson_correlation_matrix(data) -> CorrelationMatrix:
    """Pearson correlations between all column pairs of a sample matrix.

    Accepts a SampleMatrix or a raw (k, n) array with k >= 2. Entries are
    clipped to [-1, 1] to absorb rounding.
    """
    arr = _data_values(data)
    k, n = arr.shape
    if k < 2:
        raise InsufficientSamplesError(f"need at least 2 rows for correlations, got {k}")
    centered = arr - arr.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    degenerate = frozenset(int(i) for i in np.flatnonzero(norms == 0.0))
    safe = norms.copy()
    safe[safe == 0.0] = 1.0
    corr = (centered.T @ centered) / np.outer(safe, safe)
    corr = np.clip(corr, -1.0, 1.0)
    for i in degenerate:
        corr[i, :] = 0.0
        corr[:, i] = 0.0
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(values=corr, degenerate=degenerate)


def _batched_cholesky(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky factors for a stack of symmetric matrices, no exceptions.

    Returns (L, ok) where ok[t] is False when matrix t hit a squared
    pivot at or below PD_TOLERANCE; this covers both outright non-PD
    input (negative pivot square) and numerically singular input. Bad
    pivots are replaced by 1 so the factorization can finish; callers
    must discard flagged results.
    """
    m, d = mats.shape[0], mats.shape[1]
    chol = np.zeros_like(mats)
    ok = np.ones(m, dtype=bool)
    for c in range(d):
        pivot_sq = mats[:, c, c] - (chol[:, c, :c] * chol[:, c, :c]).sum(axis=1)
        bad = pivot_sq <= PD_TOLERANCE
        ok &= ~bad
        pivot = np.sqrt(np.where(bad, 1.0, pivot_sq))
        chol[:, c, c] = pivot
        if c + 1 < d:
            below = mats[:, c + 1 :, c] - np.einsum(
                "mij,mj->mi", chol[:, c + 1 :, :c], chol[:, c, :c]
            )
            chol[:, c + 1 :, c] = below / pivot[:, None]
    return chol, ok


def _partial_from_submatrices(mats: np.ndarray) -> np.ndarray:
    """Partial correlations of variables 0 and 1 given the rest, batched.

    ``mats`` is an (m, d, d) stack of correlation submatrices. Each one
    is inverted through its Cholesky factor and the partial correlation
    read off the precision matrix: the columns x = inv(L) e0 and
    y = inv(L) e1 give the needed precision entries as inner products.
    Matrices that are not positive definite within PD_TOLERANCE yield
    NaN.
    """
    m, d = mats.shape[0], mats.shape[1]
    chol, ok = _batched_cholesky(mats)
    x = np.zeros((m, d))
    y = np.zeros((m, d))
    x[:, 0] = 1.0 / chol[:, 0, 0]
    for r in range(1, d):
        acc_x = (chol[:, r, :r] * x[:, :r]).sum(axis=1)
        acc_y = (chol[:, r, :r] * y[:, :r]).sum(axis=1)
        x[:, r] = -acc_x / chol[:, r, r]
        y[:, r] = ((1.0 if r == 1 else 0.0) - acc_y) / chol[:, r, r]
    p00 = (x * x).sum(axis=1)
    p01 = (x * y).sum(axis=1)
    p11 = (y * y).sum(axis=1)
    rho = np.clip(-p01 / np.sqrt(p00 * p11), -1.0, 1.0)
    rho[~ok] = np.nan
    return rho


def _partial_from_submatrix(sub: np.ndarray) -> float:
    """Scalar front end of :func:`_partial_from_submatrices`."""
    rho = float(_partial_from_submatrices(sub[None, :, :])[0])
    if math.isnan(rho):
        raise UntestableError("correlation submatrix is not positive definite within tolerance")
    return rho


def partial_correlations_batch(
    corr: CorrelationMatrix,
    i: int,
    j: int,
    subsets: Sequence[tuple[int, ...]],
) -> np.ndarray:
    """Partial correlation of columns i and j under many conditioning sets.

    All subsets must share one size. Returns one value per subset, NaN
    where the test is untestable (degenerate column involved or singular
    submatrix). This is the bulk kernel behind constraint-based skeleton
    search; results match :func:`partial_correlation_from_matrix` exactly.
    """
    if not subsets:
        return np.empty(0)
    sizes = {len(s) for s in subsets}
    if len(sizes) != 1:
        raise ValueError(f"subsets must share one size, got sizes {sorted(sizes)}")
    d = sizes.pop() + 2
    m = len(subsets)
    idx = np.empty((m, d), dtype=np.intp)
    idx[:, 0] = i
    idx[:, 1] = j
    if d > 2:
        idx[:, 2:] = np.asarray(subsets, dtype=np.intp)
    if idx.min() < 0 or idx.max() >= corr.n:
        raise ValueError(f"column index out of range for n={corr.n}")
    out = np.full(m, np.nan)
    if i == j or i in corr.degenerate or j in corr.degenerate:
        if i == j:
            raise ValueError("i and j must differ")
        return out
    ok = np.ones(m, dtype=bool)
    for t, subset in enumerate(subsets):
        if i in subset or j in subset or len(set(subset)) != len(subset):
            raise ValueError(f"conditioning set {subset} must be disjoint from ({i}, {j})")
        if any(s in corr.degenerate for s in subset):
            ok[t] = False
    if ok.any():
        mats = corr.values[idx[ok, :, None], idx[ok, None, :]]
        out[ok] = _partial_from_submatrices(mats)
    return out


def partial_correlation_from_matrix(
    corr: CorrelationMatrix, i: int, j: int, conditioning: Iterable[int]
) -> float:
    """Partial correlation of columns i and j given ``conditioning``,
    computed from a precomputed correlation matrix."""
    cond = sorted(set(int(s) for s in conditioning))
    n = corr.n
    idx = [i, j, *cond]
    if len(set(idx)) != len(idx):
        raise ValueError(f"i={i}, j={j} and conditioning set {cond} must be disjoint")
    for s in idx:
        if not 0 <= s < n:
            raise ValueError(f"column index {s} out of range for n={n}")
    bad = [s for s in idx if s in corr.degenerate]
    if bad:
        raise UntestableError(f"constant columns {bad} cannot enter a correlation test")
    sub = corr.values[np.ix_(idx, idx)]
    return _partial_from_submatrix(sub)


def partial_correlation(data, i: int, j: int, conditioning: Iterable[int]) -> float:
    """Partial correlation of columns i and j of a sample matrix given a
    conditioning set of other columns.

    Raises InsufficientSamplesError when ``k <= |S| + 3`` (the Fisher z
    test downstream would have no degrees of freedom) and UntestableError
    on constant columns or a singular correlation submatrix.
    """
    arr = _data_values(data)
    cond = sorted(set(int(s) for s in conditioning))
    if arr.shape[0] <= len(cond) + 3:
        raise InsufficientSamplesError(
            f"k={arr.shape[0]} samples cannot support |S|={len(cond)} conditioning variables"
        )
    idx = [i, j, *cond]
    if len(set(idx)) != len(idx):
        raise ValueError(f"i={i}, j={j} and conditioning set {cond} must be disjoint")
    for s in idx:
        if not 0 <= s < arr.shape[1]:
            raise ValueError(f"column index {s} out of range for n={arr.shape[1]}")
    corr = pearson_correlation_matrix(arr[:, idx])
    bad = [idx[s] for s in corr.degenerate]
    if bad:
        raise UntestableError(f"constant columns {bad} cannot enter a correlation test")
    return _partial_from_submatrix(corr.values)


def fisher_z_test(r: float, k: int, s: int) -> PValue:
    """Fisher z test of zero (partial) correlation.

    ``r`` is the estimated correlation from ``k`` samples with ``s``
    conditioning variables. The statistic is
    ``sqrt(k - s - 3) * |atanh(r)|`` referred to a standard normal.
    Perfect correlations give p = 0 with an infinite statistic.
    """
    if k <= s + 3:
        raise InsufficientSamplesError(f"k={k} samples cannot support s={s} conditioners")
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {r}")
    dof = float(k - s - 3)
    if abs(r) == 1.0:
        return PValue(value=0.0, statistic=math.inf, dof=dof)
    z = 0.5 * math.log((1.0 + r) / (1.0 - r))
    statistic = math.sqrt(dof) * abs(z)
    return PValue(value=min(1.0, 2.0 * normal_sf(statistic)), statistic=statistic, dof=dof)

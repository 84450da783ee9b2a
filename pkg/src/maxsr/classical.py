"""Competing tests of "every asset's signal-to-noise ratio equals c0".

All of these reduce the correlated Sharpe vector to the constant-correlation
model R = rho 11' + (1-rho) I, whose symmetric inverse square root is known
in closed form and order-preserving. The family covers the plain Bonferroni
max test (noncentral t), the correlation-fixed Bonferroni z test (with a
Slepian worst-case variant for general positive correlation), the
chi-bar-square one-sided test, Follman's two-part test, and the
log-log-threshold adjustments that shrink the effective hypothesis count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc, chdtr, erf, gammaln, ndtr, ndtri

from .errors import DataError, NumericalError
from .moments import MomentEstimates, _check_rank_one_rho
from .outcomes import TestOutcome

__all__ = [
    "RhoEstimate",
    "estimate_rho",
    "noncentral_t_cdf",
    "noncentral_t_quantile",
    "chi_bar_weights",
    "bonferroni_naive",
    "bonferroni_rho_fixed",
    "bonferroni_slepian",
    "xi_transform",
    "chi_bar_square_test",
    "follman_test",
    "hansen_effective_count",
    "hansen_chi_bar_square",
    "hansen_spa",
    "invert_to_lower_bound",
]

_RHO_CLAMP_EPS = 1e-6


@dataclass(frozen=True)
class RhoEstimate:
    """A common-correlation estimate and how it was obtained."""

    rho: float
    source: str
    clamped: bool = False


def estimate_rho(moments: MomentEstimates, selected: int = 0,
                 source: str = "mean_selected_vs_rest") -> RhoEstimate:
    """Estimate the common correlation for the rank-one model.

    ``mean_selected_vs_rest`` averages the selected asset's correlations
    against all others (cheap, O(k)); ``median_pairwise`` takes the median
    of all strictly-upper-triangle entries. Estimates outside the
    positive-definite range are clamped and flagged.
    """
    corr = moments.corr
    k = corr.shape[0]
    if k < 2:
        raise DataError("rho estimation needs k >= 2")
    if source == "mean_selected_vs_rest":
        if not 0 <= selected < k:
            raise DataError(f"selected index {selected} out of range for k={k}")
        mask = np.ones(k, dtype=bool)
        mask[selected] = False
        rho = float(corr[selected, mask].mean())
    elif source == "median_pairwise":
        iu = np.triu_indices(k, 1)
        rho = float(np.median(corr[iu]))
    else:
        raise DataError(f"unknown rho source {source!r}")
    lo = -1.0 / (k - 1) + _RHO_CLAMP_EPS
    hi = 1.0 - _RHO_CLAMP_EPS
    clamped = rho < lo or rho > hi
    return RhoEstimate(rho=float(np.clip(rho, lo, hi)), source=source,
                       clamped=clamped)


# ---------------------------------------------------------------------------
# noncentral t distribution
# ---------------------------------------------------------------------------

def noncentral_t_cdf(t: float, df: float, delta: float,
                     tol: float = 1e-13, max_iter: int = 5000) -> float:
    """CDF of the noncentral t distribution by incomplete-beta series.

    Sums the Poisson-weighted incomplete-beta expansion term by term with
    log-space weights, stopping once the unaccumulated weight bounds the
    truncation error below ``tol``. Negative t is handled through the
    reflection F(t; df, delta) = 1 - F(-t; df, -delta).
    """
    if df <= 0:
        raise DataError(f"degrees of freedom must be positive, got {df}")
    t = float(t)
    delta = float(delta)
    if not np.isfinite(t):
        return 1.0 if t > 0 else 0.0
    if t < 0.0:
        return 1.0 - noncentral_t_cdf(-t, df, -delta, tol=tol, max_iter=max_iter)

    base = float(ndtr(-delta))
    if t == 0.0:
        return base
    x = t * t / (t * t + df)
    lam = 0.5 * delta * delta
    if lam == 0.0:
        # central case: single beta term
        return min(1.0, base + 0.5 * float(betainc(0.5, 0.5 * df, x)))

    log_lam = np.log(lam)
    q_total = abs(float(erf(delta / np.sqrt(2.0))))
    sign_q = 1.0 if delta > 0 else -1.0
    acc = 0.0
    cum_p = 0.0
    cum_q = 0.0
    for j in range(max_iter):
        log_pois = -lam + j * log_lam
        p_j = np.exp(log_pois - gammaln(j + 1))
        q_j = np.exp(np.log(abs(delta)) + log_pois - 0.5 * np.log(2.0)
                     - gammaln(j + 1.5))
        ib_p = float(betainc(j + 0.5, 0.5 * df, x))
        ib_q = float(betainc(j + 1.0, 0.5 * df, x))
        acc += p_j * ib_p + sign_q * q_j * ib_q
        cum_p += p_j
        cum_q += q_j
        if j >= lam:
            rem = max(0.0, 1.0 - cum_p) + max(0.0, q_total - cum_q)
            if rem * ib_p <= tol:
                break
    else:
        raise NumericalError("noncentral t series did not converge")
    return float(np.clip(base + 0.5 * acc, 0.0, 1.0))


def noncentral_t_quantile(p: float, df: float, delta: float) -> float:
    """Quantile of the noncentral t distribution by bracketed root search."""
    if not 0.0 < p < 1.0:
        raise DataError(f"quantile level must be in (0, 1), got {p}")
    # normal-theory starting bracket around delta
    z = float(ndtri(p))
    center = delta + z * np.sqrt(1.0 + (delta * delta + z * z) / (2.0 * df))
    width = 4.0 * np.sqrt(1.0 + delta * delta / (2.0 * df))
    lo, hi = center - width, center + width
    for _ in range(80):
        if noncentral_t_cdf(lo, df, delta) < p:
            break
        lo -= width
        width *= 2.0
    else:
        raise NumericalError("quantile bracket failed from below")
    width = hi - lo
    for _ in range(80):
        if noncentral_t_cdf(hi, df, delta) > p:
            break
        hi += width
        width *= 2.0
    else:
        raise NumericalError("quantile bracket failed from above")
    return float(brentq(lambda q: noncentral_t_cdf(q, df, delta) - p,
                        lo, hi, xtol=1e-12, rtol=1e-12))


# ---------------------------------------------------------------------------
# chi-bar-square machinery
# ---------------------------------------------------------------------------

def chi_bar_weights(k: int) -> np.ndarray:
    """Binomial mixture weights w_i = C(k, i) 2^{-k}, i = 0..k.

    Computed in log space so they stay finite and sum to 1 for k up to the
    thousands.
    """
    if k < 1:
        raise DataError(f"need k >= 1, got {k}")
    i = np.arange(k + 1)
    logw = gammaln(k + 1) - gammaln(i + 1) - gammaln(k - i + 1) - k * np.log(2.0)
    return np.exp(logw)


def _chi_bar_mixture_cdf(x: float, k: int) -> float:
    """CDF at x >= 0 of the chi-bar-square mixture with k components.

    The zero-degree component is a point mass at the origin, so its CDF is
    1 everywhere on x >= 0.
    """
    w = chi_bar_weights(k)
    if x < 0.0:
        return 0.0
    if k == 0:
        return 1.0
    dfs = np.arange(1, k + 1)
    return float(w[0] + (w[1:] * chdtr(dfs, x)).sum())


def _common_scale(rho: float, k: int) -> tuple[float, float]:
    """(c, s) with c = (1+(k-1) rho)^{-1/2} and s = (1-rho)^{-1/2}."""
    rho = _check_rank_one_rho(rho, k)
    return 1.0 / np.sqrt(1.0 + (k - 1) * rho), 1.0 / np.sqrt(1.0 - rho)


def xi_transform(sharpe: np.ndarray, rho: float) -> np.ndarray:
    """Whiten a Sharpe vector under the constant-correlation model.

    xi = c mean(z) 1 + (z - mean(z) 1) / sqrt(1 - rho), which equals the
    closed-form R^{-1/2} z and preserves the ordering of the entries.
    """
    z = np.asarray(sharpe, dtype=float).reshape(-1)
    c, s = _common_scale(rho, z.shape[0])
    zbar = z.mean()
    return c * zbar + s * (z - zbar)


# ---------------------------------------------------------------------------
# the tests
# ---------------------------------------------------------------------------

def bonferroni_naive(max_sharpe: float, n: int, k: int, c0: float = 0.0,
                     alpha: float = 0.05) -> TestOutcome:
    """Bonferroni-corrected max test assuming independent assets.

    sqrt(n) max z is compared against the 1 - alpha/k quantile of the
    noncentral t with n-1 degrees of freedom and noncentrality sqrt(n) c0;
    equivalently the p-value is k times the noncentral t tail, clipped to 1.
    """
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    if k < 1:
        raise DataError(f"need k >= 1, got {k}")
    stat = np.sqrt(n) * float(max_sharpe)
    tail = 1.0 - noncentral_t_cdf(stat, n - 1, np.sqrt(n) * float(c0))
    p = min(1.0, k * tail)
    return TestOutcome(method="bonferroni", statistic=stat, p_value=p,
                       reject=p <= alpha, alpha=alpha, null_value=float(c0))


def bonferroni_rho_fixed(sharpe: np.ndarray, n: int, rho: float,
                         c0: float = 0.0, alpha: float = 0.05) -> TestOutcome:
    """Bonferroni max test fixed for common positive correlation.

    The statistic is the leading (maximal) element of
    sqrt(n) R^{-1/2} (z - c0 1) under the constant-correlation model:

        z1 = sqrt(n) [ (max z - c0) / sqrt(1-rho)
                       + (c - 1/sqrt(1-rho)) (mean z - c0) ],

    with c = (1+(k-1) rho)^{-1/2}. The whitening is order-preserving, so z1
    is a standard-normal maximum under the null and is compared against the
    1 - alpha/k normal quantile. Centering the max at c0 keeps the statistic
    monotone in the null value, which the confidence-bound inversion needs;
    at c0 = 0 it coincides with the uncentered sum form, and at rho = 0 it
    collapses to the plain z statistic sqrt(n) (max z - c0).
    """
    z = np.asarray(sharpe, dtype=float).reshape(-1)
    k = z.shape[0]
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    c, s = _common_scale(rho, k)
    z1 = np.sqrt(n) * (s * (z.max() - c0) + (c - s) * (z.mean() - c0))
    p = min(1.0, k * float(ndtr(-z1)))
    return TestOutcome(method="bonferroni_fixed", statistic=float(z1),
                       p_value=p, reject=p <= alpha, alpha=alpha,
                       null_value=float(c0))


def bonferroni_slepian(sharpe: np.ndarray, n: int, corr: np.ndarray,
                       c0: float = 0.0, alpha: float = 0.05) -> TestOutcome:
    """Correlation-fixed Bonferroni under a worst-case rank-one bound.

    For a correlation matrix with nonnegative off-diagonal entries, a
    Gaussian maximum becomes stochastically smaller as correlations grow,
    so running the fixed test at rho = min off-diagonal entry keeps the
    size at or below alpha.
    """
    corr = np.asarray(corr, dtype=float)
    k = corr.shape[0]
    if corr.shape != (k, k) or k < 2:
        raise DataError("need a k x k correlation matrix with k >= 2")
    iu = np.triu_indices(k, 1)
    offdiag = corr[iu]
    if np.any(offdiag < 0.0):
        raise DataError(
            "worst-case rank-one bound requires nonnegative correlations; "
            f"found {offdiag.min():.4f}"
        )
    rho = float(offdiag.min())
    out = bonferroni_rho_fixed(sharpe, n, rho, c0=c0, alpha=alpha)
    return TestOutcome(method="bonferroni_slepian", statistic=out.statistic,
                       p_value=out.p_value, reject=out.reject, alpha=alpha,
                       null_value=float(c0))


def chi_bar_square_test(sharpe: np.ndarray, n: int, rho: float,
                        zeta0: float = 0.0, alpha: float = 0.05) -> TestOutcome:
    """One-sided chi-bar-square test in the whitened coordinates.

    The statistic is n times the squared positive part of xi - c zeta0,
    summed over assets; its null law is the binomial mixture of chi-squared
    distributions, whose upper tail gives the p-value.
    """
    z = np.asarray(sharpe, dtype=float).reshape(-1)
    k = z.shape[0]
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    c, _ = _common_scale(rho, k)
    xi = xi_transform(z, rho)
    stat = n * float((np.maximum(xi - c * zeta0, 0.0) ** 2).sum())
    p = 1.0 - _chi_bar_mixture_cdf(stat, k)
    p = float(np.clip(p, 0.0, 1.0))
    return TestOutcome(method="chibar", statistic=stat, p_value=p,
                       reject=p <= alpha, alpha=alpha, null_value=float(zeta0))


def follman_test(sharpe: np.ndarray, n: int, rho: float, zeta0: float = 0.0,
                 alpha: float = 0.05) -> TestOutcome:
    """Follman's one-sided test: a chi-squared statistic gated on the mean.

    g2 = n k c^2 (mean z - zeta0)^2 + n / (1-rho) sum (z - mean z)^2 is
    referred to chi-squared with k degrees of freedom at level 2 alpha, and
    the test rejects only if additionally mean z > zeta0. The reported
    p-value is half the chi-squared tail when the gate passes and 1
    otherwise, so reject remains p <= alpha.
    """
    z = np.asarray(sharpe, dtype=float).reshape(-1)
    k = z.shape[0]
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    c, _ = _common_scale(rho, k)
    zbar = z.mean()
    g2 = n * k * c * c * (zbar - zeta0) ** 2 \
        + n / (1.0 - rho) * float(((z - zbar) ** 2).sum())
    if zbar > zeta0:
        p = 0.5 * (1.0 - float(chdtr(k, g2)))
    else:
        p = 1.0
    return TestOutcome(method="follman", statistic=float(g2), p_value=p,
                       reject=p <= alpha, alpha=alpha, null_value=float(zeta0))


def hansen_effective_count(sharpe: np.ndarray, n: int, rho: float,
                           zeta0: float = 0.0) -> int:
    """Number of whitened coordinates within the log-log band of the null.

    Counts xi_i > c zeta0 - sqrt(2 log log n / n); coordinates far below
    the null are irrelevant alternatives and drop out of the correction.
    """
    if n < 3:
        raise DataError(f"log log n needs n >= 3, got {n}")
    z = np.asarray(sharpe, dtype=float).reshape(-1)
    c, _ = _common_scale(rho, z.shape[0])
    xi = xi_transform(z, rho)
    threshold = c * zeta0 - np.sqrt(2.0 * np.log(np.log(n)) / n)
    return int((xi > threshold).sum())


def hansen_chi_bar_square(sharpe: np.ndarray, n: int, rho: float,
                          zeta0: float = 0.0, alpha: float = 0.05) -> TestOutcome:
    """Chi-bar-square test with the effective hypothesis count reduced to
    the coordinates that survive the log-log threshold.

    With k_eff = k this is exactly the plain chi-bar-square test; with
    k_eff = 0 the test never rejects.
    """
    z = np.asarray(sharpe, dtype=float).reshape(-1)
    k = z.shape[0]
    if n < 3:
        raise DataError(f"log log n needs n >= 3, got {n}")
    c, _ = _common_scale(rho, k)
    xi = xi_transform(z, rho)
    stat = n * float((np.maximum(xi - c * zeta0, 0.0) ** 2).sum())
    k_eff = hansen_effective_count(z, n, rho, zeta0)
    if k_eff == 0:
        p = 1.0
    else:
        p = float(np.clip(1.0 - _chi_bar_mixture_cdf(stat, k_eff), 0.0, 1.0))
    return TestOutcome(method="hansen_chibar", statistic=stat, p_value=p,
                       reject=p <= alpha, alpha=alpha, null_value=float(zeta0))


def hansen_spa(sharpe: np.ndarray, n: int, rho: float, zeta0: float = 0.0,
               alpha: float = 0.05) -> TestOutcome:
    """Bonferroni max test over the surviving coordinates only.

    Rejects when sqrt(n) (max xi - c zeta0) clears the 1 - alpha/k_eff
    normal quantile; k_eff = 0 never rejects. The statistic carries the
    sqrt(n) scaling so that it is dimensionless like the fixed Bonferroni z.
    """
    z = np.asarray(sharpe, dtype=float).reshape(-1)
    k = z.shape[0]
    if n < 3:
        raise DataError(f"log log n needs n >= 3, got {n}")
    c, _ = _common_scale(rho, k)
    xi = xi_transform(z, rho)
    stat = np.sqrt(n) * float(xi.max() - c * zeta0)
    k_eff = hansen_effective_count(z, n, rho, zeta0)
    if k_eff == 0:
        p = 1.0
    else:
        p = min(1.0, k_eff * float(ndtr(-stat)))
    return TestOutcome(method="hansen_spa", statistic=stat, p_value=p,
                       reject=p <= alpha, alpha=alpha, null_value=float(zeta0))


# ---------------------------------------------------------------------------
# test inversion
# ---------------------------------------------------------------------------

def invert_to_lower_bound(test, sharpe: np.ndarray, n: int, rho: float,
                          alpha: float) -> float:
    """Largest null value zeta0 at which ``test`` still rejects at level
    alpha: the lower endpoint of the one-sided confidence interval.

    ``test`` is called as test(sharpe, n, rho, zeta0, alpha) and its
    p-value must be nondecreasing in zeta0; non-monotone behavior observed
    while bracketing raises ``NumericalError``.
    """
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    z = np.asarray(sharpe, dtype=float).reshape(-1)

    seen: list[tuple[float, float]] = []

    def pvalue(zeta0: float) -> float:
        p = test(z, n, rho, zeta0, alpha).p_value
        seen.append((zeta0, p))
        return p

    center = float(z.max())
    se = np.sqrt((1.0 + 0.5 * center * center) / n)
    lo, hi = center - 10.0 * se, center + 10.0 * se
    width = hi - lo
    for _ in range(60):
        if pvalue(lo) < alpha:
            break
        lo -= width
        width *= 2.0
    else:
        raise NumericalError("confidence bound bracket failed from below")
    width = hi - lo
    for _ in range(60):
        if pvalue(hi) > alpha:
            break
        hi += width
        width *= 2.0
    else:
        raise NumericalError("confidence bound bracket failed from above")

    seen.sort()
    ps = [p for _, p in seen]
    if any(b < a - 1e-12 for a, b in zip(ps, ps[1:])):
        raise NumericalError("rejection region is not monotone in the null value")

    return float(brentq(lambda zeta0: pvalue(zeta0) - alpha, lo, hi, xtol=1e-10))

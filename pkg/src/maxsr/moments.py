"""Sample moments of a returns panel and the asymptotic covariance of its
Sharpe-ratio vector.

All moment estimates use the 1/n (population style) denominator, which is
what the method-of-moments derivation of the Sharpe covariance assumes.
Switching to 1/(n-1) moves the bundled golden values by more than their
test tolerances at small n, so the convention is fixed here and not
configurable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError

__all__ = [
    "ReturnsPanel",
    "MomentEstimates",
    "SharpeCovariance",
    "estimate_moments",
    "estimate_kurtosis_factor",
    "sharpe_covariance_gaussian",
    "sharpe_covariance_elliptical",
    "delta_derivative",
    "rank_one_correlation",
    "rank_one_inverse_sqrt",
]

# Eigenvalues of a plug-in covariance below this are treated as genuinely
# negative rather than floating-point noise.
_PSD_TOL = 1e-10


def _column_variances(values: np.ndarray, labels) -> np.ndarray:
    """1/n column variances; a column whose variance is zero relative to its
    second moment (a constant column up to rounding) is an error."""
    mu = values.mean(axis=0)
    mom2 = (values * values).mean(axis=0)
    var = mom2 - mu * mu
    degenerate = var <= 1e-12 * np.maximum(mom2, 1e-300)
    if np.any(degenerate):
        j = int(np.argmax(degenerate))
        raise DataError(f"column {labels[j]!r} has zero sample variance")
    return var


@dataclass(frozen=True)
class ReturnsPanel:
    """An n-by-k matrix of per-period returns with asset labels.

    Attributes:
        values: (n, k) array, one column per asset, one row per period.
        labels: k asset names, unique.
        periods_per_year: optional annualization factor; display metadata
            only, never used in computation.
    """

    values: np.ndarray
    labels: tuple[str, ...]
    periods_per_year: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"panel values must be 2-D, got shape {values.shape}")
        n, k = values.shape
        if n < 2:
            raise DataError(f"panel needs at least 2 rows, got {n}")
        if k < 1:
            raise DataError("panel needs at least 1 column")
        labels = tuple(str(x) for x in self.labels)
        if len(labels) != k:
            raise DataError(f"{len(labels)} labels for {k} columns")
        if len(set(labels)) != k:
            raise DataError("duplicate asset labels")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(
                f"non-finite return at row {bad[0] + 1}, column {labels[bad[1]]!r}"
            )
        _column_variances(values, labels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MomentEstimates:
    """Per-asset sample moments and the sample correlation matrix.

    ``sharpe[i] == (mu[i] - rfr) / sigma[i]`` exactly, with
    ``sigma = sqrt(mom2 - mu**2)`` under the 1/n convention.
    """

    mu: np.ndarray
    mom2: np.ndarray
    sigma: np.ndarray
    sharpe: np.ndarray
    corr: np.ndarray
    rfr: float
    n: int
    labels: tuple[str, ...] = field(default=())

    @property
    def k(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class SharpeCovariance:
    """Approximate covariance of the Sharpe vector, 1/n factor included.

    ``flavor`` is "gaussian" or "elliptical"; the latter carries the
    kurtosis factor (one third of the marginal kurtosis) it was built with.
    """

    q: np.ndarray
    flavor: str
    n: int
    kurtosis_factor: float | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise NumericalError(f"covariance must be square, got shape {q.shape}")
        if not np.allclose(q, q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(q).max())):
            raise NumericalError("covariance matrix is not symmetric")
        q = 0.5 * (q + q.T)
        eigvals, eigvecs = np.linalg.eigh(q)
        if eigvals[0] < -_PSD_TOL:
            raise NumericalError(
                f"covariance has negative eigenvalue {eigvals[0]:.3e}"
            )
        if eigvals[0] < 0.0:
            # tiny negatives are floating-point noise: clamp to the PSD cone
            q = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
            q = 0.5 * (q + q.T)
        object.__setattr__(self, "q", q)

    @property
    def k(self) -> int:
        return self.q.shape[0]


def estimate_moments(panel: ReturnsPanel, rfr: float = 0.0) -> MomentEstimates:
    """Estimate means, second moments, volatilities, Sharpe ratios and the
    correlation matrix of a returns panel.

    Args:
        panel: the observed returns.
        rfr: per-period risk-free rate subtracted from the mean.

    Returns:
        A ``MomentEstimates`` with all vectors in panel column order.
    """
    x = panel.values
    n, k = x.shape
    mu = x.mean(axis=0)
    mom2 = (x * x).mean(axis=0)
    var = _column_variances(x, panel.labels)
    sigma = np.sqrt(var)
    sharpe = (mu - rfr) / sigma
    if k == 1:
        corr = np.ones((1, 1))
    else:
        corr = np.corrcoef(x, rowvar=False)
        corr = 0.5 * (corr + corr.T)
        np.fill_diagonal(corr, 1.0)
    return MomentEstimates(
        mu=mu, mom2=mom2, sigma=sigma, sharpe=sharpe, corr=corr,
        rfr=float(rfr), n=n, labels=panel.labels,
    )


def estimate_kurtosis_factor(panel: ReturnsPanel) -> float:
    """Median over assets of one third of the raw sample kurtosis.

    The raw fourth standardized moment is used without bias correction; the
    factor is 1 for Gaussian data.
    """
    x = panel.values
    n = x.shape[0]
    if n < 4:
        raise DataError(f"kurtosis needs at least 4 rows, got {n}")
    mu = x.mean(axis=0)
    var = _column_variances(x, panel.labels)
    centered = x - mu
    m4 = (centered ** 4).mean(axis=0)
    kurt = m4 / (var * var)
    return float(np.median(kurt)) / 3.0


def _check_corr(corr: np.ndarray) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise DataError(f"correlation matrix must be square, got {corr.shape}")
    if not np.allclose(corr, corr.T, rtol=0.0, atol=1e-10):
        raise DataError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, rtol=0.0, atol=1e-8):
        raise DataError("correlation matrix diagonal is not 1")
    if np.any(np.abs(corr) > 1.0 + 1e-10):
        raise DataError("correlation entries outside [-1, 1]")
    return corr


def sharpe_covariance_gaussian(corr: np.ndarray, snr: np.ndarray, n: int) -> SharpeCovariance:
    """Covariance of the Sharpe vector under Gaussian returns.

    Q = (R + diag(z) (R o R) diag(z) / 2) / n, where o is the elementwise
    product. For k = 1 this is the familiar (1 + z^2/2)/n standard error
    squared.
    """
    corr = _check_corr(corr)
    snr = np.asarray(snr, dtype=float).reshape(-1)
    if snr.shape[0] != corr.shape[0]:
        raise DataError(
            f"snr has length {snr.shape[0]} but correlation is {corr.shape[0]}x{corr.shape[0]}"
        )
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    q = (corr + 0.5 * np.outer(snr, snr) * corr * corr) / n
    return SharpeCovariance(q=q, flavor="gaussian", n=int(n))


def sharpe_covariance_elliptical(
    corr: np.ndarray, snr: np.ndarray, kurtosis_factor: float, n: int
) -> SharpeCovariance:
    """Covariance of the Sharpe vector under elliptical returns.

    Q = (R + (kappa-1)/4 z z' + kappa/2 diag(z) (R o R) diag(z)) / n with
    kappa one third of the marginal kurtosis; kappa = 1 recovers the
    Gaussian form.
    """
    corr = _check_corr(corr)
    snr = np.asarray(snr, dtype=float).reshape(-1)
    if snr.shape[0] != corr.shape[0]:
        raise DataError(
            f"snr has length {snr.shape[0]} but correlation is {corr.shape[0]}x{corr.shape[0]}"
        )
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    kappa = float(kurtosis_factor)
    if kappa < 1.0 / 3.0:
        raise DataError(f"kurtosis factor must be >= 1/3, got {kappa}")
    outer = np.outer(snr, snr)
    q = (corr + 0.25 * (kappa - 1.0) * outer + 0.5 * kappa * outer * corr * corr) / n
    return SharpeCovariance(q=q, flavor="elliptical", n=int(n), kurtosis_factor=kappa)


def delta_derivative(mu: np.ndarray, mom2: np.ndarray, rfr: float = 0.0) -> np.ndarray:
    """Jacobian of the Sharpe vector with respect to the stacked moment
    vector (mu, mom2): two diagonal blocks side by side, shape (k, 2k).

    Exposed for the sandwich oracle tests; production code uses the closed
    forms in :func:`sharpe_covariance_gaussian`.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    mom2 = np.asarray(mom2, dtype=float).reshape(-1)
    if mu.shape != mom2.shape:
        raise DataError("mu and mom2 must have the same length")
    var = mom2 - mu * mu
    if np.any(var <= 0.0):
        raise DataError("mom2 - mu^2 must be strictly positive")
    sig3 = var ** 1.5
    left = np.diag((mom2 - mu * rfr) / sig3)
    right = np.diag((rfr - mu) / (2.0 * sig3))
    return np.hstack([left, right])


def _check_rank_one_rho(rho: float, k: int) -> float:
    rho = float(rho)
    if k < 1:
        raise DataError(f"need k >= 1, got {k}")
    lower = -1.0 / (k - 1) if k > 1 else -np.inf
    if not (lower < rho < 1.0):
        raise DataError(
            f"rho={rho} outside the positive-definite range ({lower}, 1) for k={k}"
        )
    return rho


def rank_one_correlation(rho: float, k: int) -> np.ndarray:
    """Constant-correlation matrix R = rho 11' + (1-rho) I."""
    rho = _check_rank_one_rho(rho, k)
    return rho * np.ones((k, k)) + (1.0 - rho) * np.eye(k)


def rank_one_inverse_sqrt(rho: float, k: int) -> np.ndarray:
    """Closed-form inverse symmetric square root of the constant-correlation
    matrix:

        R^{-1/2} = (1/k) (1/sqrt(1-rho+k rho) - 1/sqrt(1-rho)) 11'
                   + (1-rho)^{-1/2} I.
    """
    rho = _check_rank_one_rho(rho, k)
    a = (1.0 / np.sqrt(1.0 - rho + k * rho) - 1.0 / np.sqrt(1.0 - rho)) / k
    return a * np.ones((k, k)) + np.eye(k) / np.sqrt(1.0 - rho)

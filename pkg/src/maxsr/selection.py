"""Conditional (post-selection) inference on the chosen asset's
signal-to-noise ratio.

The selection event "asset i looked best" is encoded as a polyhedron
A z <= b in the space of Sharpe ratios. Conditional on that event, a
truncated-normal pivot in the test direction eta is exactly uniform, which
yields conditional p-values and one-sided confidence bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr, ndtr

from .errors import DataError, NumericalError
from .moments import SharpeCovariance
from .outcomes import TestOutcome

__all__ = [
    "SelectionEvent",
    "TruncationInterval",
    "build_max_constraint",
    "select_max",
    "build_abs_max_constraint",
    "build_top_m_constraint",
    "build_threshold_constraint",
    "with_test_vector",
    "truncation_bounds",
    "truncated_normal_cdf",
    "conditional_pvalue",
    "conditional_lower_bound",
]

# Rows of A with |A c| below this relative tolerance are direction-neutral
# and excluded from both truncation bounds.
_ROW_TOL = 1e-12

# Standardized intervals entirely beyond this many sigmas from the mean are
# evaluated with log-space complementary CDFs.
_TAIL_SIGMA = 6.0


@dataclass(frozen=True)
class SelectionEvent:
    """A linear selection event together with its test direction.

    The constraint pair (A, b) and the test vector eta live in "event
    order": asset columns permuted so the selected asset comes first, with
    optional sign flips (absolute-value selection). ``permutation[i]`` is
    the original column index occupying position i, and ``selected_index``
    is the original column index of the chosen asset.
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray
    eta: np.ndarray
    kind: str
    selected_index: int
    permutation: np.ndarray
    sign_flips: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        b = np.asarray(self.b_vector, dtype=float).reshape(-1)
        eta = np.asarray(self.eta, dtype=float).reshape(-1)
        perm = np.asarray(self.permutation, dtype=int).reshape(-1)
        flips = np.asarray(self.sign_flips, dtype=float).reshape(-1)
        k = eta.shape[0]
        if a.size == 0:
            a = a.reshape(0, k)
        if a.shape[1] != k or b.shape[0] != a.shape[0]:
            raise DataError(
                f"inconsistent constraint shapes A{a.shape}, b{b.shape}, eta({k},)"
            )
        if perm.shape[0] != k or sorted(perm.tolist()) != list(range(k)):
            raise DataError("permutation must reorder all k columns")
        if flips.shape[0] != k or not np.all(np.abs(flips) == 1.0):
            raise DataError("sign flips must be +/-1 per column")
        if not np.any(eta != 0.0):
            raise DataError("test vector eta must be nonzero")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_vector", b)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "sign_flips", flips)

    @property
    def k(self) -> int:
        return self.eta.shape[0]

    def transform(self, vector: np.ndarray) -> np.ndarray:
        """Reorder (and sign-flip) an original-order vector into event order."""
        v = np.asarray(vector, dtype=float).reshape(-1)
        if v.shape[0] != self.k:
            raise DataError(f"expected a vector of length {self.k}, got {v.shape[0]}")
        return v[self.permutation] * self.sign_flips

    def transform_cov(self, matrix: np.ndarray) -> np.ndarray:
        """Conjugate an original-order covariance into event order."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (self.k, self.k):
            raise DataError(f"expected a {self.k}x{self.k} matrix, got {m.shape}")
        out = m[np.ix_(self.permutation, self.permutation)]
        return out * np.outer(self.sign_flips, self.sign_flips)


@dataclass(frozen=True)
class TruncationInterval:
    """Truncation bounds for the selected direction, plus the decomposition
    y = c (eta'y) + z used to derive them (all in event order)."""

    v_min: float
    v_max: float
    c_vector: np.ndarray
    z_vector: np.ndarray


def _identity_event(a, b, eta, kind, k, permutation=None, sign_flips=None,
                    selected_index=None):
    if permutation is None:
        permutation = np.arange(k)
    if sign_flips is None:
        sign_flips = np.ones(k)
    if selected_index is None:
        selected_index = int(permutation[0])
    return SelectionEvent(
        a_matrix=a, b_vector=b, eta=eta, kind=kind,
        selected_index=selected_index, permutation=permutation,
        sign_flips=sign_flips,
    )


def _max_rows(k: int) -> np.ndarray:
    # rows -e1 + ej for j = 2..k: "every other asset trails the first"
    a = np.zeros((k - 1, k))
    a[:, 0] = -1.0
    a[np.arange(k - 1), np.arange(1, k)] = 1.0
    return a


def build_max_constraint(k: int, permutation: np.ndarray | None = None) -> SelectionEvent:
    """Selection event "the first asset has the largest Sharpe ratio".

    A is (k-1) x k with rows (-1, 0, ..., 1, ..., 0), b = 0 and eta = e1.
    ``permutation`` records which original column sits in each event-order
    position (identity when omitted); see :func:`select_max` to build the
    event directly from an observed Sharpe vector.
    """
    if k < 2:
        raise DataError(
            "max-Sharpe selection needs k >= 2; with a single asset there is "
            "no selection to correct for, use an unconditional test"
        )
    eta = np.zeros(k)
    eta[0] = 1.0
    return _identity_event(_max_rows(k), np.zeros(k - 1), eta, "max", k,
                           permutation=permutation)


def select_max(sharpe: np.ndarray) -> SelectionEvent:
    """Build the max-Sharpe selection event for an observed Sharpe vector.

    Ties break toward the lowest original column index, which makes the
    conditioning slightly conservative on tied fixtures.
    """
    sharpe = np.asarray(sharpe, dtype=float).reshape(-1)
    k = sharpe.shape[0]
    if k < 2:
        raise DataError(
            "max-Sharpe selection needs k >= 2; with a single asset there is "
            "no selection to correct for, use an unconditional test"
        )
    best = int(np.argmax(sharpe))
    perm = np.concatenate(([best], np.delete(np.arange(k), best)))
    return build_max_constraint(k, permutation=perm)


def build_abs_max_constraint(sharpe: np.ndarray) -> SelectionEvent:
    """Selection event "the first asset has the largest absolute Sharpe".

    Columns with negative Sharpe are sign-flipped so every flipped Sharpe is
    treated as nonnegative; A stacks the (k-1) max rows with k rows -ej
    enforcing that nonnegativity, so A has 2k-1 rows in total.
    """
    sharpe = np.asarray(sharpe, dtype=float).reshape(-1)
    k = sharpe.shape[0]
    if k < 2:
        raise DataError("absolute-max selection needs k >= 2")
    flips = np.where(sharpe < 0.0, -1.0, 1.0)
    best = int(np.argmax(np.abs(sharpe)))
    perm = np.concatenate(([best], np.delete(np.arange(k), best)))
    a = np.vstack([_max_rows(k), -np.eye(k)])
    eta = np.zeros(k)
    eta[0] = 1.0
    return SelectionEvent(
        a_matrix=a, b_vector=np.zeros(2 * k - 1), eta=eta, kind="abs_max",
        selected_index=best, permutation=perm, sign_flips=flips[perm],
    )


def build_top_m_constraint(sharpe: np.ndarray, m: int) -> SelectionEvent:
    """Selection event "these m assets beat the other k-m by Sharpe".

    A encodes the m (k-m) pairwise inequalities; event order puts the kept
    assets first (descending Sharpe), then the dropped ones. eta defaults to
    e1 and can be replaced via :func:`with_test_vector`.
    """
    sharpe = np.asarray(sharpe, dtype=float).reshape(-1)
    k = sharpe.shape[0]
    if not 1 <= m < k:
        raise DataError(f"need 1 <= m < k, got m={m}, k={k}")
    order = np.argsort(-sharpe, kind="stable")
    boundary = sharpe[order[m - 1]] - sharpe[order[m]]
    if boundary == 0.0:
        raise DataError(
            f"tie at the top-{m} boundary (Sharpe {sharpe[order[m]]!r}); "
            "the kept set is not unique"
        )
    rows = []
    for j in range(m, k):
        for i in range(m):
            row = np.zeros(k)
            row[i] = -1.0
            row[j] = 1.0
            rows.append(row)
    eta = np.zeros(k)
    eta[0] = 1.0
    return SelectionEvent(
        a_matrix=np.array(rows), b_vector=np.zeros(m * (k - m)), eta=eta,
        kind="top_m", selected_index=int(order[0]), permutation=order,
        sign_flips=np.ones(k),
    )


def build_threshold_constraint(sharpe: np.ndarray, zeta_star: float) -> SelectionEvent:
    """Selection event "exactly these assets clear the Sharpe bar zeta_star".

    Passers get rows -ei (Sharpe >= bar), the rest rows +ej (Sharpe <= bar),
    k rows in total. Event order is passers first, descending.
    """
    sharpe = np.asarray(sharpe, dtype=float).reshape(-1)
    k = sharpe.shape[0]
    zeta_star = float(zeta_star)
    if np.any(sharpe == zeta_star):
        raise DataError(f"a Sharpe ratio equals the threshold {zeta_star} exactly")
    passing = sharpe > zeta_star
    n_pass = int(passing.sum())
    if n_pass == 0:
        raise DataError(f"no asset clears the threshold {zeta_star}")
    order = np.argsort(-sharpe, kind="stable")
    a = np.zeros((k, k))
    b = np.empty(k)
    for pos in range(k):
        if pos < n_pass:
            a[pos, pos] = -1.0
            b[pos] = -zeta_star
        else:
            a[pos, pos] = 1.0
            b[pos] = zeta_star
    eta = np.zeros(k)
    eta[0] = 1.0
    return SelectionEvent(
        a_matrix=a, b_vector=b, eta=eta, kind="threshold",
        selected_index=int(order[0]), permutation=order, sign_flips=np.ones(k),
    )


def with_test_vector(event: SelectionEvent, weights: np.ndarray,
                     corr: np.ndarray) -> SelectionEvent:
    """Replace the test direction with a portfolio in volatility units.

    ``weights`` and ``corr`` are given in original column order; the new
    direction is eta = w / sqrt(w' R w), invariant to rescaling w.
    """
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != event.k:
        raise DataError(f"expected {event.k} weights, got {w.shape[0]}")
    if not np.any(w != 0.0):
        raise DataError("portfolio weights must be nonzero")
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (event.k, event.k):
        raise DataError(f"expected a {event.k}x{event.k} correlation matrix")
    scale = float(w @ corr @ w)
    if scale <= 0.0:
        raise DataError(f"w' R w = {scale} is not positive")
    eta = event.transform(w) / np.sqrt(scale)
    return replace(event, eta=eta, kind="portfolio")


def truncation_bounds(event: SelectionEvent, sharpe: np.ndarray,
                      q: SharpeCovariance) -> TruncationInterval:
    """Truncation interval of eta'z compatible with the selection event.

    Decomposes the (event-order) Sharpe vector as y = c (eta'y) + z with
    c = Q eta / (eta' Q eta), then intersects the constraints row by row:
    rows with (A c)_j < 0 bound from below, rows with (A c)_j > 0 from
    above, neutral rows do not constrain.
    """
    y = event.transform(sharpe)
    qq = event.transform_cov(q.q)
    eta = event.eta
    a, b = event.a_matrix, event.b_vector

    slack = a @ y - b
    tol = 1e-9 * max(1.0, float(np.abs(y).max()))
    if slack.size and float(slack.max()) > tol:
        j = int(np.argmax(slack))
        raise DataError(
            f"observed Sharpe vector violates selection constraint row {j} "
            f"by {slack[j]:.3e}"
        )

    s2 = float(eta @ qq @ eta)
    if s2 <= 0.0:
        raise NumericalError(f"eta' Q eta = {s2} is not positive")
    c = (qq @ eta) / s2
    t = float(eta @ y)
    z = y - c * t

    if a.shape[0] == 0:
        return TruncationInterval(-np.inf, np.inf, c, z)

    ac = a @ c
    az = a @ z
    row_tol = _ROW_TOL * max(1.0, float(np.linalg.norm(c)))
    neg = ac < -row_tol
    pos = ac > row_tol
    with np.errstate(divide="ignore"):
        v_min = float(((b[neg] - az[neg]) / ac[neg]).max()) if neg.any() else -np.inf
        v_max = float(((b[pos] - az[pos]) / ac[pos]).min()) if pos.any() else np.inf
    if not v_min < v_max:
        raise NumericalError(
            f"inconsistent truncation bounds: v_min={v_min} >= v_max={v_max}"
        )
    return TruncationInterval(v_min, v_max, c, z)


def truncated_normal_cdf(x: float, a: float, b: float, mu: float,
                         sigma2: float) -> float:
    """CDF at x of a normal(mu, sigma2) truncated to [a, b].

    Far tails (the whole interval beyond 6 sigma of the mean) are evaluated
    through log-space complementary CDF differences; the textbook ratio of
    plain CDFs underflows exactly where selection pressure is strongest.
    """
    if not sigma2 > 0.0:
        raise DataError(f"sigma2 must be positive, got {sigma2}")
    if not a < b:
        raise DataError(f"need a < b, got a={a}, b={b}")
    sigma = np.sqrt(sigma2)
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    xi = (x - mu) / sigma
    if xi <= alpha:
        return 0.0
    if xi >= beta:
        return 1.0

    if alpha >= _TAIL_SIGMA:
        # interval in the far right tail: work with log survival functions
        la = log_ndtr(-alpha)
        num = -np.expm1(log_ndtr(-xi) - la)
        den = -np.expm1(log_ndtr(-beta) - la) if np.isfinite(beta) else 1.0
    elif beta <= -_TAIL_SIGMA:
        # far left tail: mirror with log CDFs
        lb = log_ndtr(beta)
        if np.isfinite(alpha):
            la = log_ndtr(alpha)
            num = np.expm1(log_ndtr(xi) - la)
            den = np.expm1(lb - la)
        else:
            num = np.exp(log_ndtr(xi) - lb)
            den = 1.0
    else:
        fa = ndtr(alpha) if np.isfinite(alpha) else 0.0
        fb = ndtr(beta) if np.isfinite(beta) else 1.0
        num = ndtr(xi) - fa
        den = fb - fa

    if den <= 0.0:
        # interval narrower than CDF resolution: density is locally flat
        return float(np.clip((x - a) / (b - a), 0.0, 1.0))
    return float(np.clip(num / den, 0.0, 1.0))


def conditional_pvalue(event: SelectionEvent, sharpe: np.ndarray,
                       q: SharpeCovariance, null_value: float,
                       alpha: float = 0.05) -> TestOutcome:
    """One-sided conditional test of H0: eta'snr = null_value against >.

    The pivot u = F_trunc(eta'z; v_min, v_max, null_value, eta'Q eta) is
    uniform under the null given the selection, so the reported p-value is
    1 - u and the test rejects when u >= 1 - alpha.
    """
    interval = truncation_bounds(event, sharpe, q)
    y = event.transform(sharpe)
    qq = event.transform_cov(q.q)
    t = float(event.eta @ y)
    s2 = float(event.eta @ qq @ event.eta)
    u = truncated_normal_cdf(t, interval.v_min, interval.v_max,
                             float(null_value), s2)
    p = 1.0 - u
    return TestOutcome(
        method="conditional", statistic=t, p_value=p, reject=p <= alpha,
        alpha=alpha, null_value=float(null_value),
    )


def conditional_lower_bound(event: SelectionEvent, sharpe: np.ndarray,
                            q: SharpeCovariance, alpha: float) -> float:
    """One-sided lower confidence bound for eta'snr at level 1 - alpha.

    Solves F_trunc(eta'z; v_min, v_max, c0, eta'Q eta) = 1 - alpha for the
    null value c0. The truncated-normal CDF is strictly decreasing in its
    mean, so the root is unique; with no active constraints this reduces to
    the unconditional bound eta'z + z_alpha sqrt(eta'Q eta).
    """
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    interval = truncation_bounds(event, sharpe, q)
    y = event.transform(sharpe)
    qq = event.transform_cov(q.q)
    t = float(event.eta @ y)
    s2 = float(event.eta @ qq @ event.eta)
    se = np.sqrt(s2)

    def objective(c0):
        return truncated_normal_cdf(t, interval.v_min, interval.v_max, c0, s2) \
            - (1.0 - alpha)

    lo, hi = t - 10.0 * se, t + 10.0 * se
    width = hi - lo
    for _ in range(60):
        if objective(lo) > 0.0:
            break
        lo -= width
        width *= 2.0
    else:
        raise NumericalError("could not bracket the confidence bound from below")
    width = hi - lo
    for _ in range(60):
        if objective(hi) < 0.0:
            break
        hi += width
        width *= 2.0
    else:
        raise NumericalError("could not bracket the confidence bound from above")
    return float(brentq(objective, lo, hi, xtol=1e-8))

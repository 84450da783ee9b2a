"""Seeded Monte Carlo laboratory: null calibration, uniformity sweeps,
power studies and size-versus-correlation sweeps.

Every replication draws its own counter-based random stream from
(seed, replication_index), so results are a pure function of the
configuration no matter how many worker threads execute them, and
summaries are reduced in replication order to keep the output bit-stable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .classical import (
    bonferroni_naive,
    bonferroni_rho_fixed,
    bonferroni_slepian,
    chi_bar_square_test,
    estimate_rho,
    follman_test,
    hansen_chi_bar_square,
    hansen_spa,
)
from .errors import DataError, MaxsrError, NumericalError
from .moments import (
    ReturnsPanel,
    estimate_kurtosis_factor,
    estimate_moments,
    rank_one_correlation,
    sharpe_covariance_elliptical,
    sharpe_covariance_gaussian,
)
from .selection import conditional_pvalue, select_max, truncated_normal_cdf

__all__ = [
    "SnrConfig",
    "ReturnsLaw",
    "SimConfig",
    "DeltaPoint",
    "PowerBin",
    "MethodSummary",
    "SimSummary",
    "KsCell",
    "SweepCell",
    "ks_statistic",
    "sample_returns",
    "run_null_calibration",
    "run_power_study",
    "run_rho_sweep",
    "run_ks_sweep",
    "LAB_METHODS",
]

LAB_METHODS = (
    "conditional", "naive", "bonferroni", "bonferroni_fixed",
    "bonferroni_slepian", "chibar", "follman", "hansen_chibar", "hansen_spa",
)

DELTA_QS = (0.005, 0.01, 0.025, 0.05, 0.10)

_N_POWER_BINS = 20
_LOW_CONFIDENCE_COUNT = 25
_MAX_FAILURE_RATE = 1e-3


@dataclass(frozen=True)
class SnrConfig:
    """Population signal-to-noise configuration for the simulated assets."""

    kind: str
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0

    _KINDS = ("zero", "all_equal", "one_good", "half_good", "uniform_range")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise DataError(f"unknown snr kind {self.kind!r}")
        for v in (self.value, self.lo, self.hi):
            if not np.isfinite(v):
                raise DataError("snr levels must be finite")

    @classmethod
    def zero(cls):
        return cls(kind="zero")

    @classmethod
    def all_equal(cls, value: float):
        return cls(kind="all_equal", value=float(value))

    @classmethod
    def one_good(cls, value: float):
        return cls(kind="one_good", value=float(value))

    @classmethod
    def half_good(cls, value: float):
        return cls(kind="half_good", value=float(value))

    @classmethod
    def uniform_range(cls, lo: float, hi: float):
        return cls(kind="uniform_range", lo=float(lo), hi=float(hi))

    def vector(self, k: int) -> np.ndarray:
        """The length-k population SNR vector this configuration describes."""
        if self.kind == "zero":
            return np.zeros(k)
        if self.kind == "all_equal":
            return np.full(k, self.value)
        if self.kind == "one_good":
            out = np.full(k, -self.value)
            out[0] = self.value
            return out
        if self.kind == "half_good":
            out = np.full(k, -self.value)
            out[: k // 2] = self.value
            return out
        return np.linspace(self.lo, self.hi, k)


@dataclass(frozen=True)
class ReturnsLaw:
    """Marginal law of the simulated returns: gaussian or student_t(df)."""

    kind: str = "gaussian"
    df: float = 5.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t"):
            raise DataError(f"unknown returns law {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    """One fully-specified simulation experiment."""

    k: int
    n: int
    rho: float
    snr: SnrConfig
    replications: int
    seed: int
    methods: tuple[str, ...] = ("conditional",)
    alpha: float = 0.05
    returns_law: ReturnsLaw = ReturnsLaw()
    covariance_mode: str = "infeasible"
    workers: int = 1
    retain_pvalues: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise DataError(f"need k >= 2, got {self.k}")
        if self.n < 2:
            raise DataError(f"need n >= 2, got {self.n}")
        if self.replications < 1:
            raise DataError(f"need replications >= 1, got {self.replications}")
        if not 0.0 < self.alpha < 1.0:
            raise DataError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.covariance_mode not in ("infeasible", "feasible_gaussian",
                                        "feasible_elliptical"):
            raise DataError(f"unknown covariance mode {self.covariance_mode!r}")
        if self.returns_law.kind == "student_t" and self.returns_law.df <= 4:
            raise DataError(
                "student_t simulations need df > 4 for a finite fourth moment"
            )
        methods = tuple(self.methods)
        if not methods:
            raise DataError("at least one method is required")
        for m in methods:
            if m not in LAB_METHODS:
                raise DataError(f"unknown method {m!r}; choose from {LAB_METHODS}")
        if self.workers < 1:
            raise DataError(f"need workers >= 1, got {self.workers}")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class DeltaPoint:
    """Calibration point: prop(p <= q) - q with its binomial 95% half-width."""

    q: float
    delta: float
    half_width: float


@dataclass(frozen=True)
class PowerBin:
    """Rejection rate among replications whose selected asset has true SNR
    inside [lo, hi); bins with few observations are flagged."""

    lo: float
    hi: float
    count: int
    rejections: int
    rate: float
    low_confidence: bool


@dataclass(frozen=True)
class MethodSummary:
    method: str
    used: int
    failures: int
    rejection_rate: float
    ks_statistic: float
    delta_curve: tuple[DeltaPoint, ...]
    power_bins: tuple[PowerBin, ...]
    bad_selection_count: int
    p_values: tuple[float, ...] | None


@dataclass(frozen=True)
class SimSummary:
    config: SimConfig
    replications: int
    failures: int
    methods: tuple[MethodSummary, ...]

    def method(self, name: str) -> MethodSummary:
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)


@dataclass(frozen=True)
class KsCell:
    n: int
    k: int
    rho: float
    ks_statistic: float


@dataclass(frozen=True)
class SweepCell:
    rho: float
    method: str
    rejection_rate: float


def ks_statistic(p_values) -> float:
    """Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
    p_values and the Uniform[0, 1] identity line."""
    p = np.sort(np.asarray(p_values, dtype=float))
    m = p.shape[0]
    if m == 0:
        raise DataError("ks_statistic needs a nonempty sample")
    if p[0] < 0.0 or p[-1] > 1.0:
        raise DataError("p-values must lie in [0, 1]")
    grid = np.arange(1, m + 1) / m
    return float(np.maximum(grid - p, p - (grid - 1.0 / m)).max())


def _replication_rng(seed: int, replication_index: int) -> np.random.Generator:
    # counter-based stream fully determined by (seed, replication_index)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replication_index,))
    return np.random.Generator(np.random.Philox(ss))


def _rank_one_sqrt_apply(z: np.ndarray, rho: float) -> np.ndarray:
    """Right-multiply iid normals by the symmetric square root of the
    constant-correlation matrix, using its closed form."""
    k = z.shape[1]
    b = np.sqrt(1.0 - rho)
    a = (np.sqrt(1.0 - rho + k * rho) - b) / k
    return b * z + a * z.sum(axis=1, keepdims=True)


def sample_returns(config: SimConfig, replication_index: int) -> ReturnsPanel:
    """Draw one n-by-k returns panel for the given replication.

    Population moments: unit marginal volatility, constant correlation
    config.rho and mean equal to the configured SNR vector. The student_t
    law scales a shared Gaussian draw by an inverse-chi factor and rescales
    so the population covariance (not the scale matrix) equals the target,
    preserving the configured SNRs.
    """
    law = config.returns_law
    if law.kind == "student_t" and law.df <= 2:
        raise DataError("student_t covariance needs df > 2")
    rng = _replication_rng(config.seed, replication_index)
    zeta = config.snr.vector(config.k)
    z = rng.standard_normal((config.n, config.k))
    g = _rank_one_sqrt_apply(z, config.rho)
    if law.kind == "gaussian":
        values = zeta + g
    else:
        w = rng.chisquare(law.df, size=config.n)
        scale = np.sqrt((law.df - 2.0) / law.df)
        values = zeta + scale * g * np.sqrt(law.df / w)[:, None]
    labels = tuple(f"asset{i:03d}" for i in range(config.k))
    return ReturnsPanel(values=values, labels=labels)


@dataclass(frozen=True)
class _RepRecord:
    index: int
    selected_snr: float
    results: dict


def _evaluate_replication(config: SimConfig, rep: int, zeta: np.ndarray,
                          true_q, null_mode: str) -> _RepRecord:
    panel = sample_returns(config, rep)
    moments = estimate_moments(panel)
    sharpe = moments.sharpe
    selected = int(np.argmax(sharpe))
    sel_snr = float(zeta[selected])
    c0 = sel_snr if null_mode == "true" else 0.0

    feasible = config.covariance_mode != "infeasible"
    results: dict = {}

    q_cov = None
    rho_used = None

    def get_q():
        nonlocal q_cov
        if q_cov is None:
            if not feasible:
                q_cov = true_q
            elif config.covariance_mode == "feasible_gaussian":
                q_cov = sharpe_covariance_gaussian(moments.corr, sharpe, config.n)
            else:
                kappa = max(estimate_kurtosis_factor(panel), 1.0 / 3.0)
                q_cov = sharpe_covariance_elliptical(moments.corr, sharpe,
                                                     kappa, config.n)
        return q_cov

    def get_rho():
        nonlocal rho_used
        if rho_used is None:
            if feasible:
                rho_used = estimate_rho(moments, selected).rho
            else:
                rho_used = config.rho
        return rho_used

    for method in config.methods:
        try:
            if method == "conditional":
                event = select_max(sharpe)
                out = conditional_pvalue(event, sharpe, get_q(), c0,
                                         alpha=config.alpha)
            elif method == "naive":
                q = get_q()
                s2 = float(q.q[selected, selected])
                u = truncated_normal_cdf(float(sharpe[selected]), -np.inf,
                                         np.inf, c0, s2)
                p = 1.0 - u
                results[method] = (p, p <= config.alpha)
                continue
            elif method == "bonferroni":
                out = bonferroni_naive(float(sharpe.max()), config.n, config.k,
                                       c0, config.alpha)
            elif method == "bonferroni_fixed":
                out = bonferroni_rho_fixed(sharpe, config.n, get_rho(), c0,
                                           config.alpha)
            elif method == "bonferroni_slepian":
                corr = moments.corr if feasible else rank_one_correlation(
                    config.rho, config.k)
                out = bonferroni_slepian(sharpe, config.n, corr, c0,
                                         config.alpha)
            elif method == "chibar":
                out = chi_bar_square_test(sharpe, config.n, get_rho(), c0,
                                          config.alpha)
            elif method == "follman":
                out = follman_test(sharpe, config.n, get_rho(), c0,
                                   config.alpha)
            elif method == "hansen_chibar":
                out = hansen_chi_bar_square(sharpe, config.n, get_rho(), c0,
                                            config.alpha)
            elif method == "hansen_spa":
                out = hansen_spa(sharpe, config.n, get_rho(), c0, config.alpha)
            else:  # pragma: no cover - guarded by SimConfig validation
                raise DataError(f"unknown method {method!r}")
            results[method] = (out.p_value, out.reject)
        except MaxsrError:
            results[method] = None
    return _RepRecord(index=rep, selected_snr=sel_snr, results=results)


def _run_replications(config: SimConfig, null_mode: str) -> list[_RepRecord]:
    zeta = config.snr.vector(config.k)
    true_q = None
    if config.covariance_mode == "infeasible":
        corr = rank_one_correlation(config.rho, config.k)
        true_q = sharpe_covariance_gaussian(corr, zeta, config.n)

    def work(rep: int) -> _RepRecord:
        return _evaluate_replication(config, rep, zeta, true_q, null_mode)

    reps = range(config.replications)
    if config.workers == 1:
        records = [work(r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(work, reps))
    records.sort(key=lambda r: r.index)
    return records


def _bin_edges(zeta: np.ndarray) -> np.ndarray:
    lo, hi = float(zeta.min()), float(zeta.max())
    if lo == hi:
        return np.array([lo, hi])
    return np.linspace(lo, hi, _N_POWER_BINS + 1)


def _summarize(config: SimConfig, records: list[_RepRecord],
               null_mode: str) -> SimSummary:
    zeta = config.snr.vector(config.k)
    edges = _bin_edges(zeta)
    n_bins = max(1, edges.shape[0] - 1)

    summaries = []
    total_failures = 0
    for method in config.methods:
        ps, rejects, snrs = [], [], []
        failures = 0
        bad = 0
        bin_counts = np.zeros(n_bins, dtype=int)
        bin_rejects = np.zeros(n_bins, dtype=int)
        for rec in records:
            res = rec.results.get(method)
            if res is None:
                failures += 1
                continue
            p, reject = res
            ps.append(p)
            rejects.append(reject)
            snrs.append(rec.selected_snr)
            if rec.selected_snr < 0.0:
                bad += 1
            if edges.shape[0] == 2:
                b = 0
            else:
                b = int(np.clip(np.searchsorted(edges, rec.selected_snr,
                                                side="right") - 1, 0, n_bins - 1))
            bin_counts[b] += 1
            bin_rejects[b] += int(reject)
        used = len(ps)
        total_failures = max(total_failures, failures)
        rate = float(np.mean(rejects)) if used else float("nan")
        ks = ks_statistic(ps) if used else float("nan")
        curve = tuple(
            DeltaPoint(
                q=q,
                delta=float(np.mean(np.asarray(ps) <= q)) - q if used else float("nan"),
                half_width=1.96 * np.sqrt(q * (1.0 - q) / used) if used else float("nan"),
            )
            for q in DELTA_QS
        )
        bins = tuple(
            PowerBin(
                lo=float(edges[b]),
                hi=float(edges[min(b + 1, edges.shape[0] - 1)]),
                count=int(bin_counts[b]),
                rejections=int(bin_rejects[b]),
                rate=float(bin_rejects[b] / bin_counts[b]) if bin_counts[b] else float("nan"),
                low_confidence=bool(bin_counts[b] < _LOW_CONFIDENCE_COUNT),
            )
            for b in range(n_bins)
        )
        summaries.append(MethodSummary(
            method=method, used=used, failures=failures, rejection_rate=rate,
            ks_statistic=ks, delta_curve=curve, power_bins=bins,
            bad_selection_count=bad,
            p_values=tuple(ps) if config.retain_pvalues else None,
        ))

    if total_failures > _MAX_FAILURE_RATE * config.replications:
        raise NumericalError(
            f"{total_failures} of {config.replications} replications failed"
        )
    return SimSummary(config=config, replications=config.replications,
                      failures=total_failures, methods=tuple(summaries))


def run_null_calibration(config: SimConfig) -> SimSummary:
    """Simulate under a point null and collect putative p-values.

    Every method is evaluated at the *true* SNR of the asset it ends up
    testing (the selected one), so under a correct procedure the collected
    p-values are uniform; the delta curve and K-S statistic quantify how
    close they come.
    """
    records = _run_replications(config, null_mode="true")
    return _summarize(config, records, null_mode="true")


def run_power_study(config: SimConfig) -> SimSummary:
    """Empirical rejection rates of H0: selected SNR = 0, binned by the
    true SNR of the selected asset.

    Requires a structured alternative (all_equal, one_good or half_good);
    the summary also counts "bad selections", replications whose winning
    asset has negative true SNR.
    """
    if config.snr.kind not in ("all_equal", "one_good", "half_good"):
        raise DataError(
            f"power studies need all_equal/one_good/half_good, got {config.snr.kind!r}"
        )
    records = _run_replications(config, null_mode="zero")
    return _summarize(config, records, null_mode="zero")


def run_rho_sweep(config_template: SimConfig, rhos) -> list[SweepCell]:
    """Empirical size of each configured method across correlation levels.

    The template must use the zero SNR configuration; each rho reuses the
    template's seed so cells are individually reproducible.
    """
    if config_template.snr.kind != "zero":
        raise DataError("rho sweeps run under the zero SNR configuration")
    cells = []
    for rho in rhos:
        config = replace(config_template, rho=float(rho))
        summary = _summarize(config, _run_replications(config, "zero"), "zero")
        for m in summary.methods:
            cells.append(SweepCell(rho=float(rho), method=m.method,
                                   rejection_rate=m.rejection_rate))
    return cells


def run_ks_sweep(grid) -> list[KsCell]:
    """One K-S uniformity statistic per null-calibration configuration.

    Each grid entry must configure exactly one method; the cell records the
    K-S distance of that method's null p-values from Uniform[0, 1].
    """
    cells = []
    for config in grid:
        if len(config.methods) != 1:
            raise DataError("ks sweeps need exactly one method per cell")
        summary = run_null_calibration(config)
        cells.append(KsCell(n=config.n, k=config.k, rho=config.rho,
                            ks_statistic=summary.methods[0].ks_statistic))
    return cells

"""Running the test battery over a returns panel and serializing results.

This is the layer the CLI drives: it owns the method registry, the JSON
report shape and the CSV formats for simulation summaries.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import __version__
from .classical import (
    bonferroni_naive,
    bonferroni_rho_fixed,
    bonferroni_slepian,
    chi_bar_square_test,
    estimate_rho,
    follman_test,
    hansen_chi_bar_square,
    hansen_spa,
    invert_to_lower_bound,
)
from .errors import DataError
from .moments import (
    MomentEstimates,
    ReturnsPanel,
    estimate_kurtosis_factor,
    estimate_moments,
    sharpe_covariance_elliptical,
    sharpe_covariance_gaussian,
)
from .montecarlo import SimSummary
from .outcomes import TestOutcome
from .selection import conditional_lower_bound, conditional_pvalue, select_max

__all__ = [
    "CLI_METHODS",
    "RHO_METHODS",
    "RunReport",
    "evaluate_panel",
    "report_to_json",
    "summary_csv_rows",
    "sweep_csv_rows",
    "ks_csv_rows",
]

CLI_METHODS = (
    "naive", "conditional", "bonferroni", "bonferroni_fixed",
    "bonferroni_slepian", "chibar", "follman", "hansen_chibar", "hansen_spa",
)

# methods that consume the rank-one correlation estimate
RHO_METHODS = ("bonferroni_fixed", "chibar", "follman", "hansen_chibar",
               "hansen_spa")


@dataclass(frozen=True)
class RunReport:
    """A JSON-serializable record of one CLI invocation."""

    command: str
    inputs: dict
    selected_index: int
    selected_label: str
    sharpe_by_label: tuple[tuple[str, float], ...]
    outcomes: tuple[TestOutcome, ...]
    timing_seconds: float
    version: str = field(default=__version__)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "selected": {"index": self.selected_index,
                         "label": self.selected_label},
            "sharpe": [{"label": lab, "value": val}
                       for lab, val in self.sharpe_by_label],
            "outcomes": [asdict(o) | {"warnings": list(o.warnings)}
                         for o in self.outcomes],
            "timing_seconds": self.timing_seconds,
            "version": self.version,
        }


def report_to_json(report: RunReport) -> str:
    """Key-sorted JSON rendering; floats keep full double precision."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2,
                      allow_nan=False)


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _naive_outcome(moments: MomentEstimates, q, selected: int, c0: float,
                   alpha: float) -> TestOutcome:
    se = float(np.sqrt(q.q[selected, selected]))
    stat = float(moments.sharpe[selected])
    p = float(ndtr(-(stat - c0) / se))
    return TestOutcome(method="naive", statistic=stat, p_value=p,
                       reject=p <= alpha, alpha=alpha, null_value=c0)


def _naive_bound(moments: MomentEstimates, q, selected: int,
                 alpha: float) -> float:
    se = float(np.sqrt(q.q[selected, selected]))
    return float(moments.sharpe[selected] + ndtri(alpha) * se)


def evaluate_panel(
    panel: ReturnsPanel,
    methods,
    *,
    alpha: float = 0.05,
    null_value: float = 0.0,
    rfr: float = 0.0,
    flavor: str = "gaussian",
    rho_override: float | None = None,
    rho_source: str = "median_pairwise",
    compute_bounds: bool = False,
    command: str = "test",
    source_path: str | None = None,
    extra_inputs: dict | None = None,
) -> RunReport:
    """Run the requested methods on a panel and assemble a report.

    With ``compute_bounds`` the battery additionally inverts each test into
    a one-sided lower confidence bound at level 1 - alpha.
    """
    started = time.perf_counter()
    methods = list(methods)
    for m in methods:
        if m not in CLI_METHODS:
            raise DataError(f"unknown method {m!r}; choose from {CLI_METHODS}")
    if rho_override is not None and any(m in ("naive", "conditional")
                                        for m in methods):
        raise DataError(
            "--rho cannot be combined with the conditional or naive methods; "
            "they use the full estimated covariance rather than a common rho"
        )
    if flavor not in ("gaussian", "elliptical"):
        raise DataError(f"unknown covariance flavor {flavor!r}")

    moments = estimate_moments(panel, rfr=rfr)
    k, n = moments.k, moments.n
    selection_methods = set(CLI_METHODS) - {"naive"}
    if k < 2 and any(m in selection_methods for m in methods):
        raise DataError(
            "selection over a single asset is vacuous; only the "
            "unconditional 'naive' method applies to a k=1 panel"
        )

    sharpe = moments.sharpe
    selected = int(np.argmax(sharpe))

    kappa = None
    if flavor == "elliptical":
        kappa = max(estimate_kurtosis_factor(panel), 1.0 / 3.0)
        q = sharpe_covariance_elliptical(moments.corr, sharpe, kappa, n)
    else:
        q = sharpe_covariance_gaussian(moments.corr, sharpe, n)

    rho_est = None
    warnings: tuple[str, ...] = ()
    if rho_override is not None:
        rho = float(rho_override)
    elif k >= 2:
        rho_est = estimate_rho(moments, selected, source=rho_source)
        rho = rho_est.rho
        if rho_est.clamped:
            warnings = (f"estimated rho clamped to {rho:.6f}",)
    else:
        rho = 0.0

    outcomes = []
    for method in methods:
        if method == "naive":
            out = _naive_outcome(moments, q, selected, null_value, alpha)
            bound = _naive_bound(moments, q, selected, alpha) \
                if compute_bounds else None
        elif method == "conditional":
            event = select_max(sharpe)
            out = conditional_pvalue(event, sharpe, q, null_value, alpha=alpha)
            bound = conditional_lower_bound(event, sharpe, q, alpha) \
                if compute_bounds else None
        elif method == "bonferroni":
            out = bonferroni_naive(float(sharpe.max()), n, k, null_value, alpha)
            bound = invert_to_lower_bound(
                lambda z, nn, _rho, z0, a: bonferroni_naive(
                    float(np.max(z)), nn, len(z), z0, a),
                sharpe, n, rho, alpha) if compute_bounds else None
        elif method == "bonferroni_slepian":
            out = bonferroni_slepian(sharpe, n, moments.corr, null_value, alpha)
            bound = invert_to_lower_bound(
                lambda z, nn, _rho, z0, a: bonferroni_slepian(
                    z, nn, moments.corr, z0, a),
                sharpe, n, rho, alpha) if compute_bounds else None
        else:
            test_fn = {
                "bonferroni_fixed": bonferroni_rho_fixed,
                "chibar": chi_bar_square_test,
                "follman": follman_test,
                "hansen_chibar": hansen_chi_bar_square,
                "hansen_spa": hansen_spa,
            }[method]
            out = test_fn(sharpe, n, rho, null_value, alpha)
            bound = invert_to_lower_bound(test_fn, sharpe, n, rho, alpha) \
                if compute_bounds else None
        if bound is not None or warnings:
            out = TestOutcome(
                method=out.method, statistic=out.statistic,
                p_value=out.p_value, reject=out.reject, alpha=out.alpha,
                null_value=out.null_value, lower_bound=bound,
                warnings=warnings if method in RHO_METHODS else (),
            )
        outcomes.append(out)

    order = np.argsort(-sharpe, kind="stable")
    inputs = {
        "alpha": alpha,
        "null_value": null_value,
        "rfr": rfr,
        "flavor": flavor,
        "kurtosis_factor": kappa,
        "rho": rho if k >= 2 else None,
        "rho_source": ("override" if rho_override is not None
                       else (rho_est.source if rho_est else None)),
        "methods": methods,
        "n": n,
        "k": k,
        "labels": list(panel.labels),
    }
    if source_path is not None:
        inputs["path"] = str(source_path)
        inputs["sha256"] = file_sha256(source_path)
    if extra_inputs:
        inputs.update(extra_inputs)

    return RunReport(
        command=command,
        inputs=inputs,
        selected_index=selected,
        selected_label=panel.labels[selected],
        sharpe_by_label=tuple((panel.labels[int(j)], float(sharpe[int(j)]))
                              for j in order),
        outcomes=tuple(outcomes),
        timing_seconds=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# CSV rendering of simulation results
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def summary_csv_rows(summary: SimSummary) -> list[list[str]]:
    """Flatten a SimSummary into (method, metric, arg, value) rows."""
    rows = [["method", "metric", "arg", "value"]]
    for m in summary.methods:
        rows.append([m.method, "replications", "", _fmt(m.used)])
        rows.append([m.method, "failures", "", _fmt(m.failures)])
        rows.append([m.method, "rejection_rate", "", _fmt(m.rejection_rate)])
        rows.append([m.method, "ks_statistic", "", _fmt(m.ks_statistic)])
        rows.append([m.method, "bad_selection_count", "",
                     _fmt(m.bad_selection_count)])
        for point in m.delta_curve:
            rows.append([m.method, "delta", _fmt(point.q), _fmt(point.delta)])
            rows.append([m.method, "delta_half_width", _fmt(point.q),
                         _fmt(point.half_width)])
        for b in m.power_bins:
            arg = f"{_fmt(b.lo)}..{_fmt(b.hi)}"
            rows.append([m.method, "power_bin_count", arg, _fmt(b.count)])
            rows.append([m.method, "power_bin_rate", arg, _fmt(b.rate)])
            rows.append([m.method, "power_bin_low_confidence", arg,
                         _fmt(int(b.low_confidence))])
    return rows


def sweep_csv_rows(cells) -> list[list[str]]:
    rows = [["rho", "method", "rejection_rate"]]
    for cell in cells:
        rows.append([_fmt(cell.rho), cell.method, _fmt(cell.rejection_rate)])
    return rows


def ks_csv_rows(cells) -> list[list[str]]:
    rows = [["n", "k", "rho", "ks_statistic"]]
    for cell in cells:
        rows.append([_fmt(cell.n), _fmt(cell.k), _fmt(cell.rho),
                     _fmt(cell.ks_statistic)])
    return rows

"""Construct the bundled five-industry monthly returns panel.

The panel is synthetic but moment-exact: a whitened Gaussian draw is
affinely transformed so the *sample* mean and (1/n) covariance equal
prescribed targets. The targets are tuned so the panel reproduces the
package's golden statistics: the five descending Sharpe ratios, the median
pairwise correlation, and the five one-sided confidence bounds produced by
`maxsr ci`.

Usage: python tools/make_fixture.py [--write]
"""

import argparse
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from maxsr import ReturnsPanel, estimate_moments, load_panel

from maxsr.report import evaluate_panel

N, K = 1104, 5

# column order in the shipped file; descending-Sharpe order is
# Healthcare, Consumer, Manufacturing, Technology, Other
LABELS = ("Consumer", "Manufacturing", "Technology", "Healthcare", "Other")
FILE_TO_SORTED = np.array([1, 2, 3, 0, 4])  # file column -> rank by Sharpe
VOLS = np.array([0.0519, 0.0633, 0.0717, 0.0563, 0.0646])  # monthly, per file col

# golden values the tuned panel must reproduce (per sqrt(month))
SHARPE_TABLE = np.array([0.193, 0.187, 0.172, 0.170, 0.140])  # descending
BOUND_TARGETS = {
    "naive": 0.143,
    "bonferroni": 0.122,
    "bonferroni_fixed": 0.125,
    "chibar": 0.141,
    "conditional": 0.073,
}
METHODS = tuple(BOUND_TARGETS)

# fixed pairwise correlations in descending-Sharpe order; pair (0, 1) is the
# free parameter. Values keep the pairwise median pinned at 0.801 and the
# range at [0.708, 0.891] for any r01 in (0.7405, 0.801).
CORR_TEMPLATE = {
    (0, 2): 0.7841, (0, 3): 0.8132, (0, 4): 0.7405,
    (1, 2): 0.8667, (1, 3): 0.8345, (1, 4): 0.801,
    (2, 3): 0.891, (2, 4): 0.801, (3, 4): 0.708,
}


def corr_sorted(r01: float) -> np.ndarray:
    corr = np.eye(K)
    entries = dict(CORR_TEMPLATE)
    entries[(0, 1)] = r01
    for (i, j), value in entries.items():
        corr[i, j] = corr[j, i] = value
    return corr


def whitened_noise() -> np.ndarray:
    """(N, K) draw with exactly zero sample mean and identity 1/n covariance."""
    rng = np.random.default_rng(41926)
    z = rng.standard_normal((N, K))
    z -= z.mean(axis=0)
    chol = np.linalg.cholesky(z.T @ z / N)
    return z @ np.linalg.inv(chol).T


NOISE = whitened_noise()


def build_panel(sharpe_sorted: np.ndarray, r01: float) -> ReturnsPanel:
    corr_file = corr_sorted(r01)[np.ix_(FILE_TO_SORTED, FILE_TO_SORTED)]
    sharpe_file = sharpe_sorted[FILE_TO_SORTED]
    mu = sharpe_file * VOLS
    sigma = np.outer(VOLS, VOLS) * corr_file
    values = mu + NOISE @ np.linalg.cholesky(sigma).T
    return ReturnsPanel(values=values, labels=LABELS)


def bounds_for(panel: ReturnsPanel) -> dict:
    report = evaluate_panel(panel, list(METHODS), alpha=0.05,
                            compute_bounds=True, command="ci")
    return {o.method: o.lower_bound for o in report.outcomes}


def residuals(x: np.ndarray) -> np.ndarray:
    panel = build_panel(x[:K], x[K])
    got = bounds_for(panel)
    return np.array([got[m] - BOUND_TARGETS[m] for m in METHODS]) / 0.0005


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--write", action="store_true",
                        help="write the tuned panel to src/maxsr/data/")
    args = parser.parse_args()

    x0 = np.concatenate([SHARPE_TABLE, [0.765]])
    lower = np.concatenate([SHARPE_TABLE - 0.0009, [0.7425]])
    upper = np.concatenate([SHARPE_TABLE + 0.0009, [0.7995]])
    fit = least_squares(residuals, x0, bounds=(lower, upper),
                        diff_step=1e-4, xtol=1e-12, ftol=1e-12)
    sharpe_sorted, r01 = fit.x[:K], fit.x[K]
    print("tuned Sharpe (desc):", np.array2string(sharpe_sorted, precision=6))
    print("tuned corr(0,1):", f"{r01:.6f}")

    panel = build_panel(sharpe_sorted, r01)
    eig = np.linalg.eigvalsh(corr_sorted(r01))
    print("corr eigenvalues:", np.array2string(eig, precision=4))
    assert eig.min() > 1e-3, "target correlation matrix is not comfortably PD"

    got = bounds_for(panel)
    print("\nbounds from the in-memory panel:")
    for m in METHODS:
        print(f"  {m:<18s} {got[m]:.5f}  target {BOUND_TARGETS[m]:.3f} "
              f"(off by {got[m] - BOUND_TARGETS[m]:+.5f})")

    moments = estimate_moments(panel)
    order = np.argsort(-moments.sharpe)
    print("\nSharpe (desc):", np.array2string(moments.sharpe[order], precision=5))
    iu = np.triu_indices(K, 1)
    print("pairwise corr median:", f"{np.median(moments.corr[iu]):.6f}",
          "range:", f"[{moments.corr[iu].min():.3f}, {moments.corr[iu].max():.3f}]")

    if not args.write:
        return

    dates = [f"{year}{month:02d}" for year in range(1927, 2019)
             for month in range(1, 13)]
    assert len(dates) == N
    out = Path(__file__).resolve().parents[1] / "src" / "maxsr" / "data"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "industry5_monthly.csv"

    with open(path, "w", encoding="utf-8") as handle:
        handle.write("date," + ",".join(LABELS) + "\n")
        for date, row in zip(dates, panel.values):
            cells = ",".join(f"{v:.6f}" for v in row)
            handle.write(f"{date},{cells}\n")
    print(f"\nwrote {path}")

    reloaded = load_panel(str(path))
    got = bounds_for(reloaded)
    print("bounds from the written file:")
    for m in METHODS:
        print(f"  {m:<18s} {got[m]:.5f}  target {BOUND_TARGETS[m]:.3f} "
              f"(off by {got[m] - BOUND_TARGETS[m]:+.5f})")
    moments = estimate_moments(reloaded)
    order = np.argsort(-moments.sharpe)
    print("Sharpe (desc):", np.array2string(moments.sharpe[order], precision=5))
    print("pairwise corr median:",
          f"{np.median(moments.corr[np.triu_indices(K, 1)]):.6f}")


if __name__ == "__main__":
    main()

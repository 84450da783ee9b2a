import dataclasses

import numpy as np
import pytest

from maxsr import (
    DataError,
    ReturnsLaw,
    SimConfig,
    SnrConfig,
    ks_statistic,
    run_ks_sweep,
    run_null_calibration,
    run_power_study,
    run_rho_sweep,
    sample_returns,
)
from maxsr.report import summary_csv_rows


def small_config(**overrides):
    base = dict(
        k=5, n=150, rho=0.3, snr=SnrConfig.uniform_range(-0.05, 0.05),
        replications=60, seed=4242, methods=("conditional",),
        covariance_mode="infeasible", workers=1,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestSnrConfig:
    def test_vectors(self):
        assert np.array_equal(SnrConfig.zero().vector(3), np.zeros(3))
        assert np.array_equal(SnrConfig.all_equal(0.1).vector(3), np.full(3, 0.1))
        assert np.array_equal(SnrConfig.one_good(0.2).vector(4),
                              [0.2, -0.2, -0.2, -0.2])
        assert np.array_equal(SnrConfig.half_good(0.2).vector(4),
                              [0.2, 0.2, -0.2, -0.2])
        got = SnrConfig.uniform_range(-0.1, 0.1).vector(5)
        assert np.array_equal(got, np.linspace(-0.1, 0.1, 5))

    def test_rejects_unknown_kind(self):
        with pytest.raises(DataError, match="kind"):
            SnrConfig(kind="spiky")


class TestSimConfigValidation:
    def test_student_t_needs_df_above_four(self):
        with pytest.raises(DataError, match="df > 4"):
            small_config(returns_law=ReturnsLaw(kind="student_t", df=4.0))

    def test_unknown_method(self):
        with pytest.raises(DataError, match="unknown method"):
            small_config(methods=("monte",))

    def test_unknown_covariance_mode(self):
        with pytest.raises(DataError, match="covariance mode"):
            small_config(covariance_mode="oracle")


class TestSampleReturns:
    def test_deterministic_per_replication(self):
        cfg = small_config()
        a = sample_returns(cfg, 7).values
        b = sample_returns(cfg, 7).values
        c = sample_returns(cfg, 8).values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_zero_snr_pooled_mean_is_zero(self):
        cfg = small_config(k=2, n=10_000, rho=0.5, snr=SnrConfig.zero())
        pooled = np.concatenate([sample_returns(cfg, r).values
                                 for r in range(100)])
        se = pooled.std(axis=0) / np.sqrt(pooled.shape[0])
        assert (np.abs(pooled.mean(axis=0)) < 3 * se).all()

    def test_population_correlation_recovered(self):
        cfg = small_config(k=3, n=100_000, rho=0.7, snr=SnrConfig.zero())
        values = sample_returns(cfg, 0).values
        corr = np.corrcoef(values, rowvar=False)
        off = corr[np.triu_indices(3, 1)]
        assert np.abs(off - 0.7).max() < 0.01

    def test_population_snr_recovered(self):
        cfg = small_config(k=4, n=250_000, rho=0.4,
                           snr=SnrConfig.uniform_range(-0.05, 0.1))
        values = sample_returns(cfg, 3).values
        zeta_hat = values.mean(axis=0) / values.std(axis=0)
        assert np.abs(zeta_hat - cfg.snr.vector(4)).max() < 3.0 / np.sqrt(250_000) * 1.5

    def test_student_t_kurtosis(self):
        cfg = small_config(
            k=3, n=100_000, rho=0.5, snr=SnrConfig.zero(),
            returns_law=ReturnsLaw(kind="student_t", df=5.0),
        )
        values = sample_returns(cfg, 1).values
        centered = values - values.mean(axis=0)
        kurt = (centered**4).mean(axis=0) / (centered**2).mean(axis=0) ** 2
        assert np.abs(kurt - 9.0).max() < 1.0

    def test_student_t_unit_variance(self):
        cfg = small_config(
            k=2, n=200_000, rho=0.0, snr=SnrConfig.zero(),
            returns_law=ReturnsLaw(kind="student_t", df=6.0),
        )
        values = sample_returns(cfg, 0).values
        assert np.abs(values.std(axis=0) - 1.0).max() < 0.02


class TestKsStatistic:
    def test_single_point(self):
        assert ks_statistic([0.5]) == pytest.approx(0.5, abs=1e-15)

    def test_evenly_spaced_grid(self):
        m = 99
        p = np.arange(1, m + 1) / (m + 1)
        assert ks_statistic(p) == pytest.approx(1.0 / (m + 1), abs=1e-12)

    def test_matches_bruteforce_double_loop(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            p = np.sort(rng.uniform(size=rng.integers(1, 60)))
            m = p.shape[0]
            best = 0.0
            for i in range(m):
                ecdf_after = (i + 1) / m
                ecdf_before = i / m
                best = max(best, abs(ecdf_after - p[i]), abs(p[i] - ecdf_before))
            assert ks_statistic(p) == pytest.approx(best, abs=1e-15)

    def test_uniform_samples_usually_below_critical(self):
        rng = np.random.default_rng(24)
        crit = 1.36 / np.sqrt(5000)
        hits = sum(ks_statistic(rng.uniform(size=5000)) < crit
                   for _ in range(20))
        assert hits >= 18

    def test_empty_input(self):
        with pytest.raises(DataError, match="nonempty"):
            ks_statistic([])


class TestNullCalibration:
    def test_single_replication_summary_is_well_formed(self):
        summary = run_null_calibration(small_config(replications=1))
        m = summary.method("conditional")
        assert m.used == 1
        assert len(m.p_values) == 1
        assert len(m.delta_curve) == 5
        for point in m.delta_curve:
            assert -point.q <= point.delta <= 1 - point.q

    def test_identical_config_identical_summary(self):
        a = run_null_calibration(small_config())
        b = run_null_calibration(small_config())
        assert a.methods == b.methods

    def test_worker_count_does_not_change_results(self):
        base = small_config(replications=48, methods=("conditional", "chibar"),
                            covariance_mode="feasible_gaussian")
        results = []
        for workers in (1, 4):
            cfg = dataclasses.replace(base, workers=workers)
            results.append(run_null_calibration(cfg))
        assert results[0].methods == results[1].methods
        assert summary_csv_rows(results[0]) == summary_csv_rows(results[1])

    def test_delta_curve_bands_cover_at_desk_scale(self):
        cfg = small_config(k=10, n=252, rho=0.5, replications=600, seed=515)
        m = run_null_calibration(cfg).method("conditional")
        for point in m.delta_curve:
            assert abs(point.delta) <= 2.0 * point.half_width


class TestPowerStudy:
    def test_requires_structured_alternative(self):
        with pytest.raises(DataError, match="power"):
            run_power_study(small_config(snr=SnrConfig.zero()))

    def test_bins_partition_snr_range(self):
        cfg = small_config(
            k=6, n=200, rho=0.0, snr=SnrConfig.one_good(0.1),
            replications=120, methods=("conditional", "chibar"),
        )
        summary = run_power_study(cfg)
        m = summary.method("conditional")
        assert len(m.power_bins) == 20
        assert m.power_bins[0].lo == pytest.approx(-0.1)
        assert m.power_bins[-1].hi == pytest.approx(0.1)
        for left, right in zip(m.power_bins, m.power_bins[1:]):
            assert left.hi == pytest.approx(right.lo)
        assert sum(b.count for b in m.power_bins) == m.used
        assert m.bad_selection_count == sum(
            b.count for b in m.power_bins if b.hi <= 0)

    def test_all_equal_at_zero_matches_alpha(self):
        cfg = small_config(
            k=8, n=252, rho=0.0, snr=SnrConfig.all_equal(0.0),
            replications=800, seed=99, methods=("conditional", "chibar"),
            covariance_mode="feasible_gaussian",
        )
        summary = run_power_study(cfg)
        for m in summary.methods:
            assert abs(m.rejection_rate - 0.05) < 0.025

    def test_degenerate_bin_for_all_equal(self):
        cfg = small_config(snr=SnrConfig.all_equal(0.05), replications=30)
        summary = run_power_study(cfg)
        m = summary.method("conditional")
        assert len(m.power_bins) == 1
        assert m.power_bins[0].count == m.used


class TestRhoSweep:
    def test_requires_zero_snr(self):
        with pytest.raises(DataError, match="zero"):
            run_rho_sweep(small_config(), [0.0, 0.3])

    def test_table_shape_and_determinism(self):
        template = small_config(snr=SnrConfig.zero(), replications=80,
                                methods=("conditional", "bonferroni_fixed"))
        a = run_rho_sweep(template, [0.0, 0.4])
        b = run_rho_sweep(template, [0.0, 0.4])
        assert a == b
        assert [(c.rho, c.method) for c in a] == [
            (0.0, "conditional"), (0.0, "bonferroni_fixed"),
            (0.4, "conditional"), (0.4, "bonferroni_fixed"),
        ]


class TestKsSweep:
    def test_requires_single_method(self):
        cfg = small_config(methods=("conditional", "chibar"))
        with pytest.raises(DataError, match="exactly one"):
            run_ks_sweep([cfg])

    def test_deterministic_table(self):
        grid = [small_config(replications=40),
                small_config(n=252, replications=40)]
        assert run_ks_sweep(grid) == run_ks_sweep(grid)

    def test_small_sample_many_assets_is_less_uniform(self):
        # k >> n distorts the approximation; uniformity degrades
        hard = small_config(k=200, n=126, rho=0.3, replications=800,
                            seed=71, covariance_mode="feasible_gaussian")
        easy = small_config(k=50, n=2016, rho=0.3, replications=800,
                            seed=71, covariance_mode="feasible_gaussian")
        cells = run_ks_sweep([hard, easy])
        assert cells[0].ks_statistic > cells[1].ks_statistic

import numpy as np
import pytest
from numpy.testing import assert_allclose

from maxsr import (
    DataError,
    NumericalError,
    ReturnsPanel,
    SharpeCovariance,
    delta_derivative,
    estimate_kurtosis_factor,
    estimate_moments,
    rank_one_correlation,
    rank_one_inverse_sqrt,
    sharpe_covariance_elliptical,
    sharpe_covariance_gaussian,
)


def random_panel(rng, n=50, k=3):
    values = rng.normal(0.001, 0.02, size=(n, k))
    return ReturnsPanel(values=values, labels=tuple(f"a{i}" for i in range(k)))


class TestReturnsPanel:
    def test_requires_two_rows(self):
        with pytest.raises(DataError, match="at least 2 rows"):
            ReturnsPanel(values=np.array([[0.1, 0.2]]), labels=("a", "b"))

    def test_rejects_duplicate_labels(self):
        with pytest.raises(DataError, match="duplicate"):
            ReturnsPanel(values=np.zeros((3, 2)) + [[0.1, 0.2], [0.0, 0.1], [0.2, 0.0]],
                         labels=("a", "a"))

    def test_rejects_nonfinite(self):
        values = np.array([[0.1, 0.2], [np.nan, 0.1], [0.0, 0.3]])
        with pytest.raises(DataError, match="non-finite"):
            ReturnsPanel(values=values, labels=("a", "b"))

    def test_rejects_constant_column_naming_it(self):
        values = np.column_stack([np.full(10, 0.02), np.linspace(-0.1, 0.1, 10)])
        with pytest.raises(DataError, match="'flat'"):
            ReturnsPanel(values=values, labels=("flat", "ok"))


class TestEstimateMoments:
    def test_single_asset_definitions(self):
        # constant return with one perturbed entry keeps variance positive
        values = np.full((24, 1), 0.005)
        values[7, 0] = 0.009
        panel = ReturnsPanel(values=values, labels=("only",))
        m = estimate_moments(panel, rfr=0.001)
        assert m.mu[0] == pytest.approx(values.mean(), abs=1e-15)
        assert m.sigma[0] == pytest.approx(np.sqrt((values**2).mean() - values.mean()**2))
        assert m.sharpe[0] == (m.mu[0] - 0.001) / m.sigma[0]
        assert m.corr.shape == (1, 1) and m.corr[0, 0] == 1.0

    def test_corr_matches_bruteforce_pearson(self):
        rng = np.random.default_rng(101)
        panel = random_panel(rng, n=50, k=3)
        m = estimate_moments(panel)
        x = panel.values
        for i in range(3):
            for j in range(3):
                xi = x[:, i] - x[:, i].mean()
                xj = x[:, j] - x[:, j].mean()
                ref = (xi * xj).sum() / np.sqrt((xi * xi).sum() * (xj * xj).sum())
                assert abs(m.corr[i, j] - ref) < 1e-12

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(55)
        panel = random_panel(rng, n=80, k=4)
        perm = np.array([2, 0, 3, 1])
        shuffled = ReturnsPanel(values=panel.values[:, perm],
                                labels=tuple(panel.labels[i] for i in perm))
        m0 = estimate_moments(panel)
        m1 = estimate_moments(shuffled)
        # column summation order differs, so only round-off level agreement
        assert_allclose(m1.mu, m0.mu[perm], rtol=1e-13)
        assert_allclose(m1.sharpe, m0.sharpe[perm], rtol=1e-13)
        assert_allclose(m1.corr, m0.corr[np.ix_(perm, perm)], atol=1e-13)

    def test_degenerate_column_error(self):
        values = np.column_stack([np.linspace(0, 0.1, 10), np.zeros(10)])
        values[0, 1] = 0.0
        with pytest.raises(DataError, match="'dead'"):
            ReturnsPanel(values=values, labels=("live", "dead"))


class TestSharpeCovariance:
    def test_k1_standard_error_matches_published_value(self):
        q = sharpe_covariance_gaussian(np.ones((1, 1)), np.array([0.193]), 1104)
        assert np.sqrt(q.q[0, 0]) == pytest.approx(0.03, abs=5e-4)

    def test_zero_snr_reduces_to_correlation(self):
        r = rank_one_correlation(0.4, 4)
        q = sharpe_covariance_gaussian(r, np.zeros(4), 200)
        assert_allclose(q.q, r / 200, rtol=0, atol=0)

    def test_matches_sandwich_oracle(self):
        # brute-force delta-method sandwich from the stacked-moment
        # covariance of Gaussian returns
        rng = np.random.default_rng(33)
        for _ in range(20):
            k = int(rng.integers(1, 7))
            mu = rng.normal(0.0, 0.02, k)
            a = rng.normal(size=(k, k))
            sig = a @ a.T / k + np.diag(rng.uniform(0.5, 2.0, k))
            vol = np.sqrt(np.diag(sig))
            corr = sig / np.outer(vol, vol)
            snr = mu / vol
            mom2 = np.diag(sig) + mu * mu
            d = delta_derivative(mu, mom2, 0.0)
            omega = np.block([
                [sig, 2.0 * sig * mu[None, :]],
                [2.0 * mu[:, None] * sig,
                 2.0 * sig * sig + 4.0 * np.outer(mu, mu) * sig],
            ])
            n = 750
            direct = d @ omega @ d.T / n
            q = sharpe_covariance_gaussian(corr, snr, n).q
            assert np.abs(direct - q).max() < 1e-10

    def test_elliptical_kappa_one_equals_gaussian(self):
        rng = np.random.default_rng(9)
        corr = rank_one_correlation(0.5, 3)
        snr = rng.normal(0, 0.1, 3)
        g = sharpe_covariance_gaussian(corr, snr, 300).q
        e = sharpe_covariance_elliptical(corr, snr, 1.0, 300).q
        assert np.array_equal(g, e)

    def test_elliptical_k1_mertens_form(self):
        zeta, kappa, n = 0.17, 2.3, 500
        q = sharpe_covariance_elliptical(np.ones((1, 1)), np.array([zeta]), kappa, n)
        expected = (1.0 + ((kappa - 1.0) / 4.0 + kappa / 2.0) * zeta**2) / n
        assert q.q[0, 0] == pytest.approx(expected, rel=1e-14)

    def test_elliptical_k2_offdiagonal_hand_value(self):
        q = sharpe_covariance_elliptical(np.eye(2), np.array([0.1, 0.1]), 2.0, 100)
        assert q.q[0, 1] == pytest.approx(0.000025, rel=1e-12)

    def test_elliptical_rejects_small_kurtosis_factor(self):
        with pytest.raises(DataError, match="1/3"):
            sharpe_covariance_elliptical(np.eye(2), np.zeros(2), 0.2, 100)

    def test_dimension_mismatch(self):
        with pytest.raises(DataError, match="length"):
            sharpe_covariance_gaussian(np.eye(3), np.zeros(2), 100)

    def test_outputs_symmetric_psd(self):
        rng = np.random.default_rng(81)
        for _ in range(25):
            k = int(rng.integers(2, 8))
            x = rng.normal(0.001, 0.02, size=(260, k))
            m = estimate_moments(ReturnsPanel(values=x, labels=tuple(map(str, range(k)))))
            q = sharpe_covariance_gaussian(m.corr, m.sharpe, m.n).q
            assert np.array_equal(q, q.T)
            assert np.linalg.eigvalsh(q).min() >= -1e-10

    def test_truly_negative_eigenvalue_is_an_error(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]]) / 100
        with pytest.raises(NumericalError, match="negative eigenvalue"):
            SharpeCovariance(q=bad, flavor="gaussian", n=100)


class TestDeltaDerivative:
    def test_zero_mean_unit_moment(self):
        d = delta_derivative(np.zeros(3), np.ones(3), 0.0)
        assert_allclose(d[:, :3], np.eye(3), atol=0)
        assert_allclose(d[:, 3:], np.zeros((3, 3)), atol=0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        mu = rng.normal(0.0, 0.3, 4)
        mom2 = mu * mu + rng.uniform(0.5, 2.0, 4)
        rfr = 0.05
        d = delta_derivative(mu, mom2, rfr)
        h = 1e-6

        def sharpe(m, m2):
            return (m - rfr) / np.sqrt(m2 - m * m)

        for i in range(4):
            dm = np.zeros(4)
            dm[i] = h
            grad_mu = (sharpe(mu + dm, mom2)[i] - sharpe(mu - dm, mom2)[i]) / (2 * h)
            grad_m2 = (sharpe(mu, mom2 + dm)[i] - sharpe(mu, mom2 - dm)[i]) / (2 * h)
            assert d[i, i] == pytest.approx(grad_mu, rel=1e-6)
            assert d[i, 4 + i] == pytest.approx(grad_m2, rel=1e-6)

    def test_hand_evaluated_scalar_case(self):
        mu, mom2, rfr = 0.01, 0.0102, 0.001
        var = mom2 - mu * mu
        d = delta_derivative(np.array([mu]), np.array([mom2]), rfr)
        assert d[0, 0] == pytest.approx((mom2 - mu * rfr) / var**1.5, rel=1e-14)
        assert d[0, 1] == pytest.approx((rfr - mu) / (2 * var**1.5), rel=1e-14)

    def test_degenerate_variance(self):
        with pytest.raises(DataError, match="positive"):
            delta_derivative(np.array([1.0]), np.array([1.0]), 0.0)


class TestKurtosisFactor:
    def test_gaussian_factor_near_one(self):
        rng = np.random.default_rng(2024)
        panel = ReturnsPanel(values=rng.normal(size=(100_000, 3)),
                             labels=("a", "b", "c"))
        assert estimate_kurtosis_factor(panel) == pytest.approx(1.0, abs=0.05)

    def test_hand_computed_fourth_moments(self):
        values = np.column_stack([
            [1.0, -1.0, 1.0, -1.0],   # kurtosis 1
            [2.0, -2.0, 0.0, 0.0],    # kurtosis 2
            [1.0, -1.0, 2.0, -2.0],   # kurtosis 1.36
        ])
        panel = ReturnsPanel(values=values, labels=("x", "y", "z"))
        assert estimate_kurtosis_factor(panel) == pytest.approx(1.36 / 3.0, rel=1e-14)

    def test_student_t5_factor_near_three(self):
        rng = np.random.default_rng(77)
        panel = ReturnsPanel(values=rng.standard_t(5, size=(100_000, 3)),
                             labels=("a", "b", "c"))
        assert estimate_kurtosis_factor(panel) == pytest.approx(3.0, abs=0.5)

    def test_needs_four_rows(self):
        panel = ReturnsPanel(values=np.array([[0.1], [0.2], [-0.1]]), labels=("a",))
        with pytest.raises(DataError, match="4 rows"):
            estimate_kurtosis_factor(panel)


class TestRankOne:
    def test_rho_zero_is_identity(self):
        assert np.array_equal(rank_one_correlation(0.0, 4), np.eye(4))
        assert np.array_equal(rank_one_inverse_sqrt(0.0, 4), np.eye(4))

    def test_entries(self):
        r = rank_one_correlation(0.7, 3)
        assert np.all(np.diag(r) == 1.0)
        off = r[np.triu_indices(3, 1)]
        assert np.all(off == 0.7)

    def test_eigenvalues_against_dense_solver(self):
        for rho, k in [(0.3, 5), (0.7, 12), (-0.05, 8)]:
            eig = np.sort(np.linalg.eigvalsh(rank_one_correlation(rho, k)))
            expected = np.sort(np.r_[np.full(k - 1, 1 - rho), 1 + (k - 1) * rho])
            assert_allclose(eig, expected, atol=1e-12)

    def test_inverse_sqrt_identity_product(self):
        for rho in (0.3, 0.7, 0.9):
            for k in (2, 20, 100):
                r = rank_one_correlation(rho, k)
                m = rank_one_inverse_sqrt(rho, k)
                assert np.abs(m @ r @ m - np.eye(k)).max() < 1e-12

    def test_maps_ones_to_scaled_ones(self):
        rho, k = 0.65, 7
        m = rank_one_inverse_sqrt(rho, k)
        expected = np.full(k, 1.0 / np.sqrt(1.0 + (k - 1) * rho))
        assert_allclose(m @ np.ones(k), expected, rtol=1e-13)

    def test_order_preserving(self):
        rng = np.random.default_rng(6)
        for rho in (0.0, 0.4, 0.95):
            m = rank_one_inverse_sqrt(rho, 6)
            for _ in range(200):
                b = rng.normal(size=6)
                assert np.array_equal(np.argsort(m @ b), np.argsort(b))

    def test_rho_out_of_range(self):
        with pytest.raises(DataError, match="range"):
            rank_one_correlation(1.0, 3)
        with pytest.raises(DataError, match="range"):
            rank_one_correlation(-0.6, 3)
        with pytest.raises(DataError, match="range"):
            rank_one_inverse_sqrt(1.0, 3)

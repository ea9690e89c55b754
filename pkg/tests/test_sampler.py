import numpy as np
import numpy.testing as npt
import pytest
from scipy.integrate import quad
from scipy.linalg import eigh as dense_eigh

from spike_spectra.covmodel import build_spiked_diagonal
from spike_spectra.errors import DomainError, ShapeError
from spike_spectra.sampler import (EntryDistribution, covariance_from_observations,
                                   draw_data, draw_data_grouped, load_csv_matrix,
                                   rep_seed, sample_covariance, spectrum)

SQRT3 = np.sqrt(3.0)


class TestEntryDistribution:
    def test_builtin_gamma4(self):
        assert EntryDistribution("standard_normal").gamma4 == 3.0
        assert EntryDistribution("uniform_sym").gamma4 == pytest.approx(1.8)
        assert EntryDistribution("rademacher").gamma4 == 1.0

    def test_uniform_gamma4_against_quadrature(self):
        # independent oracle: integrate x^4 over the density 1/(2 sqrt 3)
        moment = quad(lambda x: x ** 4 / (2 * SQRT3), -SQRT3, SQRT3)[0]
        assert EntryDistribution("uniform_sym").gamma4 == pytest.approx(moment, rel=1e-10)

    def test_custom_table_gamma4_derived(self):
        dist = EntryDistribution("custom_table", values=[-1.0, 1.0],
                                 probabilities=[0.5, 0.5])
        assert dist.gamma4 == pytest.approx(1.0)

    def test_custom_table_must_be_standardized(self):
        with pytest.raises(DomainError):
            EntryDistribution("custom_table", values=[0.0, 2.0], probabilities=[0.5, 0.5])
        with pytest.raises(DomainError):
            EntryDistribution("custom_table", values=[-1.0, 1.0], probabilities=[0.7, 0.2])

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            EntryDistribution("cauchy")


class TestDrawData:
    def test_uniform_fourth_moment_monte_carlo(self):
        x = draw_data(1000, 1000, EntryDistribution("uniform_sym"), seed=5)
        assert np.mean(x ** 4) == pytest.approx(1.8, abs=0.05)

    def test_normal_unit_variance(self):
        x = draw_data(1000, 1000, EntryDistribution("standard_normal"), seed=6)
        assert x.var() == pytest.approx(1.0, abs=0.01)

    def test_determinism(self):
        a = draw_data(17, 13, EntryDistribution("rademacher"), seed=99)
        b = draw_data(17, 13, EntryDistribution("rademacher"), seed=99)
        npt.assert_array_equal(a, b)
        assert set(np.unique(a)) <= {-1.0, 1.0}

    def test_bad_shape(self):
        with pytest.raises(DomainError):
            draw_data(0, 5, EntryDistribution(), seed=1)

    def test_grouped_rows(self):
        groups = [(4, EntryDistribution("rademacher")),
                  (3, EntryDistribution("standard_normal"))]
        x = draw_data_grouped(groups, 2000, seed=3)
        assert x.shape == (7, 2000)
        assert set(np.unique(x[:4])) <= {-1.0, 1.0}
        assert x[4:].var() == pytest.approx(1.0, abs=0.1)
        npt.assert_array_equal(x, draw_data_grouped(groups, 2000, seed=3))

    def test_rep_seed_distinct(self):
        seeds = {rep_seed(123, r) for r in range(200)}
        assert len(seeds) == 200


class TestSampleCovariance:
    def test_hand_case_identity(self):
        model = build_spiked_diagonal([], [1.0, 1.0])
        x = np.array([[1.0, -1.0], [1.0, 1.0]])
        npt.assert_allclose(sample_covariance(model, x), np.eye(2), atol=1e-14)

    def test_centering_annihilates_constants(self):
        model = build_spiked_diagonal([2.0], [1.0, 1.0])
        x = np.ones((3, 7))
        s = sample_covariance(model, x, centered=True)
        npt.assert_allclose(s, 0.0, atol=1e-14)

    def test_shape_mismatch(self):
        model = build_spiked_diagonal([2.0], [1.0])
        with pytest.raises(ShapeError):
            sample_covariance(model, np.ones((3, 4)))

    def test_spike_ratio_band_monte_carlo(self):
        # lam_1 / mu_1 concentrates near 1 for a strong spike
        rng = np.random.default_rng(1234)
        bulk = np.sort(rng.uniform(1.0, 2.0, 398))[::-1]
        model = build_spiked_diagonal([800.0, 200.0], bulk)
        from spike_spectra.covmodel import gamma_matrix
        gamma = gamma_matrix(model)
        dist = EntryDistribution("uniform_sym")
        hits = 0
        reps = 200
        for rep in range(reps):
            x = draw_data(400, 400, dist, rep_seed(2024, rep))
            s = covariance_from_observations(gamma @ x)
            lam1 = dense_eigh(s, subset_by_index=(399, 399), eigvals_only=True)[0]
            hits += 0.9 <= lam1 / 800.0 <= 1.15
        assert hits / reps >= 0.95


class TestSpectrum:
    def test_diagonal(self):
        spec = spectrum(np.diag([3.0, 1.0, 2.0]))
        npt.assert_allclose(spec.eigenvalues, [3.0, 2.0, 1.0])
        npt.assert_allclose(np.abs(spec.eigenvectors),
                            np.eye(3)[:, [0, 2, 1]], atol=1e-14)
        # sign convention: the single big component is positive
        assert spec.eigenvectors.max() == pytest.approx(1.0)

    def test_two_by_two_textbook(self):
        spec = spectrum(np.array([[2.0, 1.0], [1.0, 2.0]]))
        npt.assert_allclose(spec.eigenvalues, [3.0, 1.0], rtol=1e-14)
        r = 1 / np.sqrt(2)
        npt.assert_allclose(spec.eigenvectors[:, 0], [r, r], rtol=1e-12)
        npt.assert_allclose(np.abs(spec.eigenvectors[:, 1]), [r, r], rtol=1e-12)

    def test_wishart_reconstruction(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 80))
        s = covariance_from_observations(x)
        spec = spectrum(s, n=80)
        recon = (spec.eigenvectors * spec.eigenvalues) @ spec.eigenvectors.T
        assert np.max(np.abs(s - recon)) <= 1e-8 * np.max(np.abs(s))
        npt.assert_allclose(spec.eigenvectors.T @ spec.eigenvectors,
                            np.eye(50), atol=1e-8)
        assert spec.eigenvalues.min() >= -1e-10
        assert spec.trace == pytest.approx(np.trace(s), rel=1e-8)

    def test_not_symmetric(self):
        with pytest.raises(ShapeError):
            spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(ShapeError):
            spectrum(np.ones((2, 3)))

    def test_determinism_bit_for_bit(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((30, 30))
        s = covariance_from_observations(x)
        a, b = spectrum(s, n=30), spectrum(s, n=30)
        npt.assert_array_equal(a.eigenvalues, b.eigenvalues)
        npt.assert_array_equal(a.eigenvectors, b.eigenvectors)

    def test_centered_rank_deficiency(self):
        # p >= n: centering drops one dimension, so lam_{min(p,n)} ~ 0
        rng = np.random.default_rng(21)
        x = rng.standard_normal((30, 20))
        model = build_spiked_diagonal([], np.ones(30))
        s = sample_covariance(model, x, centered=True)
        spec = spectrum(s, n=20, centered=True)
        assert spec.eigenvalues[19] <= 1e-8


def test_load_csv_matrix(tmp_path):
    path = tmp_path / "data.csv"
    np.savetxt(path, np.arange(6.0).reshape(2, 3), delimiter=",")
    mat = load_csv_matrix(path)
    npt.assert_allclose(mat, [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]])

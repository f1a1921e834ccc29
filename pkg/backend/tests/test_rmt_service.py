import numpy as np
import pytest

from exceptions import EnsembleError
from schemas import EnsembleEstimate, EnsembleSpec, StateWeights
from services import rmt_service, spectra_service

# the CLI's verify-average bound
MAX_ABS_Z = 4.0


def test_draws_are_reproducible_per_index():
    spec = EnsembleSpec(kind="GOE", dim=8, seed=11)
    first = rmt_service.sample_matrix(spec, 3).entries
    np.testing.assert_array_equal(first, rmt_service.sample_matrix(spec, 3).entries)
    assert not np.array_equal(first, rmt_service.sample_matrix(spec, 4).entries)


def test_goe_is_real_symmetric():
    H = rmt_service.sample_matrix(EnsembleSpec(kind="GOE", dim=12), 0).entries
    assert H.dtype == np.float64
    np.testing.assert_array_equal(H, H.T)


def test_gue_is_complex_hermitian():
    H = rmt_service.sample_matrix(EnsembleSpec(kind="GUE", dim=12), 0).entries
    assert np.iscomplexobj(H)
    np.testing.assert_array_equal(H, H.conj().T)


def test_poisson_diagonal_is_sorted_and_diagonal():
    H = rmt_service.sample_matrix(EnsembleSpec(kind="PoissonDiagonal", dim=50), 0).entries
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
    assert np.all(np.diff(np.diag(H)) >= 0)


def test_poisson_diagonal_spacings_cluster_near_zero():
    spec = EnsembleSpec(kind="PoissonDiagonal", dim=500, seed=11)
    levels = [np.diag(rmt_service.sample_matrix(spec, i).entries) for i in range(10)]
    sample, _ = spectra_service.level_statistics(levels, degree=10, reference="poisson")
    assert sample.histogram.densities[0] > 0.7


@pytest.mark.parametrize("kind,diagonal_factor", [("GOE", 2.0), ("GUE", 1.0)])
def test_ensemble_variances(kind, diagonal_factor):
    sigma = 1.5
    spec = EnsembleSpec(kind=kind, dim=100, sigma=sigma, seed=5)
    draws = [rmt_service.sample_matrix(spec, i).entries for i in range(50)]
    upper = np.triu_indices(100, k=1)
    off_diagonal = np.concatenate([np.abs(H[upper]) ** 2 for H in draws])
    diagonal = np.concatenate([np.real(np.diag(H)) for H in draws])
    assert off_diagonal.mean() == pytest.approx(sigma ** 2, rel=0.03)
    assert diagonal.var() == pytest.approx(diagonal_factor * sigma ** 2, rel=0.1)


def test_avg_chi1_from_two_levels():
    t = 3.7
    expected = 2.0 ** 2 * spectra_service.delta_t(1.0, t)
    assert rmt_service.avg_chi1_from_levels([0.0, 1.0], [0.5, 0.5], t, sigma=2.0) == pytest.approx(expected)
    assert rmt_service.avg_chi1_from_levels([0.0, 1.0], [0.5, 0.5], 0.0) == 0.0


def test_avg_chi2_analytic_factors():
    eig = spectra_service.eigendecompose(rmt_service.sample_matrix(EnsembleSpec(dim=4), 0))
    rho = spectra_service.thermal_weights(eig, 0.0)
    goe = rmt_service.avg_chi2_analytic(rho, 3.0, sigma=0.5, kind="GOE")
    assert goe == pytest.approx(2 * 0.25 * 9.0 * (1 - 0.25))
    assert rmt_service.avg_chi2_analytic(rho, 3.0, sigma=0.5, kind="GUE") == pytest.approx(goe / 2)
    with pytest.raises(ValueError):
        rmt_service.avg_chi2_analytic(rho, 3.0, kind="PoissonDiagonal")


def test_unit_mean_spacing():
    levels = rmt_service.unit_mean_spacing(3.0 * np.arange(100.0))
    np.testing.assert_allclose(np.diff(levels), 1.0)
    with pytest.raises(ValueError):
        rmt_service.unit_mean_spacing(np.ones(10))


def test_monte_carlo_requires_two_samples(goe_pair):
    H, _ = goe_pair
    rho = spectra_service.thermal_weights(spectra_service.eigendecompose(H), 0.0)
    with pytest.raises(EnsembleError):
        rmt_service.monte_carlo_avg_chi(H, rho, 1.0, EnsembleSpec(dim=H.dim), 1)
    with pytest.raises(ValueError):
        rmt_service.monte_carlo_avg_chi(H, rho, 1.0, EnsembleSpec(kind="PoissonDiagonal", dim=H.dim), 10)


def test_monte_carlo_is_independent_of_worker_count(goe_pair):
    H, _ = goe_pair
    rho = spectra_service.thermal_weights(spectra_service.eigendecompose(H), 0.2)
    spec = EnsembleSpec(dim=H.dim, seed=9)
    serial = rmt_service.monte_carlo_avg_chi(H, rho, 2.0, spec, 20, max_workers=1, keep_samples=True)
    parallel = rmt_service.monte_carlo_avg_chi(H, rho, 2.0, spec, 20, max_workers=4, keep_samples=True)
    assert serial == parallel


@pytest.mark.parametrize("t", [1.0, 5.0, 20.0])
def test_monte_carlo_matches_analytic_average(t):
    H = rmt_service.sample_matrix(EnsembleSpec(kind="GOE", dim=32, seed=100), 0)
    eig = spectra_service.eigendecompose(H)
    rho = spectra_service.thermal_weights(eig, 0.0)
    mc1, mc2 = rmt_service.monte_carlo_avg_chi(H, rho, t, EnsembleSpec(kind="GOE", dim=32, seed=101), 500)
    assert abs(mc1.z_score(rmt_service.avg_chi1_analytic(eig, rho, t))) < MAX_ABS_Z
    assert abs(mc2.z_score(rmt_service.avg_chi2_analytic(rho, t))) < MAX_ABS_Z
    assert mc1.n_samples == 500


def test_estimate_needs_two_samples():
    with pytest.raises(EnsembleError):
        EnsembleEstimate.from_samples([1.0], t=1.0)
    estimate = EnsembleEstimate.from_samples([1.0, 3.0], t=1.0)
    assert estimate.mean == 2.0
    assert estimate.stderr == pytest.approx(1.0)


def test_conjecture_guards():
    spec = EnsembleSpec(kind="GOE", dim=20)
    with pytest.raises(EnsembleError):
        rmt_service.ensemble_conjecture_experiment(spec, [10.0], 1)
    with pytest.raises(ValueError):
        rmt_service.ensemble_conjecture_experiment(spec, [], 5)
    zero = rmt_service.ensemble_conjecture_experiment(spec, [0.0], 3)
    assert zero[0].mean == 0.0


def test_conjecture_separates_ensembles_at_small_scale():
    times = [200.0]
    goe = rmt_service.ensemble_conjecture_experiment(EnsembleSpec(kind="GOE", dim=100, seed=1), times, 30)
    poisson = rmt_service.ensemble_conjecture_experiment(
        EnsembleSpec(kind="PoissonDiagonal", dim=100, seed=1), times, 30
    )
    assert poisson[0].mean > goe[0].mean


def test_estimates_csv_is_reproducible(tmp_path):
    spec = EnsembleSpec(kind="GOE", dim=20, seed=4)
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        estimates = rmt_service.ensemble_conjecture_experiment(spec, [10.0, 50.0], 5)
        rmt_service.write_estimates_csv(str(path), estimates)
    content = paths[0].read_bytes()
    assert content == paths[1].read_bytes()
    assert content.startswith(b"ensemble,dim,t,n_samples,mean,stderr,seed\nGOE,20,10,5,")


@pytest.mark.slow
def test_conjecture_regular_spectra_dominate_chaotic_ones():
    times = [400.0]
    goe = rmt_service.ensemble_conjecture_experiment(EnsembleSpec(kind="GOE", dim=200, seed=2), times, 100)[0]
    poisson = rmt_service.ensemble_conjecture_experiment(
        EnsembleSpec(kind="PoissonDiagonal", dim=200, seed=2), times, 100
    )[0]
    assert poisson.mean >= 5 * goe.mean
    assert poisson.mean - 3 * poisson.stderr > goe.mean + 3 * goe.stderr


def test_avg_chi1_vanishes_on_kernel_zeros():
    t = 6.0
    levels = 2 * np.pi / t * np.arange(12)
    assert rmt_service.avg_chi1_from_levels(levels, np.full(12, 1 / 12), t) == pytest.approx(0.0, abs=1e-12)


def test_avg_chi2_for_a_mixed_qubit():
    rho = StateWeights(probs=[0.75, 0.25])
    assert rmt_service.avg_chi2_analytic(rho, 2.0, sigma=0.5) == pytest.approx(2 * 0.25 * 4.0 * (1 - 10 / 16))
    assert rmt_service.avg_chi2_analytic(StateWeights(probs=[1.0, 0.0]), 2.0) == 0.0


def test_doubling_sigma_quadruples_averages(goe_pair):
    H, _ = goe_pair
    rho = spectra_service.thermal_weights(spectra_service.eigendecompose(H), 0.3)
    unit = rmt_service.monte_carlo_avg_chi(H, rho, 4.0, EnsembleSpec(dim=H.dim, seed=8), 10)
    double = rmt_service.monte_carlo_avg_chi(H, rho, 4.0, EnsembleSpec(dim=H.dim, sigma=2.0, seed=8), 10)
    for small, large in zip(unit, double):
        assert large.mean == pytest.approx(4 * small.mean, rel=1e-9)


@pytest.mark.slow
def test_chaotic_conjecture_value_does_not_grow_with_time():
    early, late = rmt_service.ensemble_conjecture_experiment(
        EnsembleSpec(kind="GOE", dim=200, seed=2), [200.0, 400.0], 100
    )
    assert late.mean <= early.mean + 3 * (early.stderr + late.stderr)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obspurity.dynamics import (
    DynamicsScenario,
    asymptotic_error,
    asymptotic_haar_error,
    check_grid,
    coarse_index,
    cumulative_series,
    error_series,
    f_on_grid,
    fit_lambda,
    gaussian_local_field_f,
    infidelity_law,
    infidelity_series,
    perturbed_evolution,
    run_ensemble,
    spectral_flags,
    transient_factor,
    uniform_grid,
)
from obspurity.ensembles import PerturbationModel, SeedSpec, StateEnsemble, empirical_f, haar_state
from obspurity.exceptions import DegenerateSpectrumWarning, DimensionError
from obspurity.metrics import build_report
from obspurity.operators import HermitianOperator
from obspurity.spins import (
    LmgParams,
    SpinSystem,
    TimParams,
    collective_spin,
    lmg_hamiltonian,
    stretched_state,
    sx_projector,
    tim_hamiltonian,
)

N = 8
SYSTEM = SpinSystem(N)
H15 = lmg_hamiltonian(LmgParams(N, 1.5))


@pytest.fixture(scope="module")
def diagonal_run():
    model = PerturbationModel("diagonal", 0.05)
    sx = collective_spin(SYSTEM, "x")
    scenario = DynamicsScenario(H15, stretched_state(SYSTEM, "x", -1), model, uniform_grid(80, 160), 400,
                                SeedSpec(77), (sx, sx_projector(SYSTEM, 0)))
    return scenario, perturbed_evolution(scenario)


def test_grid_checks():
    assert uniform_grid(10, 5)[-1] == 10.0
    with pytest.raises(ValueError):
        uniform_grid(10, 1)
    for bad in ([0.0], [0.1, 0.2, 0.3], [0.0, 0.2, 0.1], [0.0, 0.1, 0.3]):
        with pytest.raises(ValueError):
            check_grid(bad)


def test_scenario_validation():
    model = PerturbationModel("goe", 0.01)
    with pytest.raises(DimensionError):
        DynamicsScenario(H15, haar_state(SeedSpec(1), 4), model, uniform_grid(1, 4))
    with pytest.raises(ValueError):
        DynamicsScenario(H15, stretched_state(SYSTEM, "x", 1), model, uniform_grid(1, 4), n_instances=0)
    sc = DynamicsScenario(H15, stretched_state(SYSTEM, "x", 1), model, uniform_grid(1, 4),
                          observables=(collective_spin(SYSTEM, "z"),))
    assert sc.labels == ["A1"]


def test_zero_strength_gives_zero_error():
    sx = collective_spin(SYSTEM, "x")
    scenario = DynamicsScenario(H15, stretched_state(SYSTEM, "x", -1), PerturbationModel("goe", 0.0),
                                uniform_grid(20, 40), 3, SeedSpec(1), (sx,))
    series = error_series(scenario)["A1"]
    np.testing.assert_allclose(series.delta, 0, atol=1e-12)
    inf = infidelity_series(scenario)
    np.testing.assert_allclose(inf.exact, 0, atol=1e-12)


def test_diagonal_model_delta_is_exact_in_expectation(diagonal_run):
    scenario, evolution = diagonal_run
    f = f_on_grid(scenario)
    np.testing.assert_allclose(f, np.exp(-((0.05 * scenario.times) ** 2)))
    series = error_series(scenario, evolution)
    for s in series.values():
        se = np.maximum(s.delta_stderr, 1e-12)
        z = (s.delta - s.analytic_delta) / se
        assert np.max(np.abs(z)) < 5
        assert np.mean(z**2) < 1.5


def test_diagonal_model_infidelity_is_exact_in_expectation(diagonal_run):
    scenario, evolution = diagonal_run
    inf = infidelity_series(scenario, evolution)
    se = np.maximum(inf.exact_stderr, 1e-12)
    z = (inf.exact - inf.analytic) / se
    assert np.max(np.abs(z[1:])) < 5
    assert inf.exact[0] == pytest.approx(0.0, abs=1e-12)


def test_goe_infidelity_law_beyond_inverse_gaps():
    # B = 1.5 has a gapped spectrum; the law holds once lambda t is past the
    # transient set by the smallest gap
    psi = stretched_state(SYSTEM, "x", -1)
    gap = spectral_flags(H15)["min_gap"]
    scenario = DynamicsScenario(H15, psi, PerturbationModel("goe", 0.02), uniform_grid(150, 150), 100, SeedSpec(5))
    inf = infidelity_series(scenario)
    late = scenario.times > 5 / gap
    rel = np.abs(inf.exact[late] - inf.analytic[late]) / inf.analytic[late]
    assert np.median(rel) < 0.1


def test_evolution_independent_of_workers():
    sx = collective_spin(SYSTEM, "x")
    scenario = DynamicsScenario(H15, stretched_state(SYSTEM, "x", -1), PerturbationModel("goe", 0.02),
                                uniform_grid(10, 20), 6, SeedSpec(9), (sx,))
    a = perturbed_evolution(scenario)
    b = perturbed_evolution(scenario, workers=3)
    assert a.instance_expectations.tobytes() == b.instance_expectations.tobytes()
    assert a.fidelities.tobytes() == b.fidelities.tobytes()


def test_averaged_density_is_a_density(diagonal_run):
    scenario, _ = diagonal_run
    small = DynamicsScenario(scenario.hamiltonian, scenario.initial, scenario.perturbation, uniform_grid(4, 4), 5,
                             SeedSpec(1))
    ev = perturbed_evolution(small, keep_states=True)
    rho = ev.averaged_density(3)
    assert ev.averaged_trace(3) == pytest.approx(1.0)
    assert rho.purity() <= 1 + 1e-12
    with pytest.raises(ValueError):
        perturbed_evolution(small).averaged_density(0)


def test_cumulative_series_sine():
    times = uniform_grid(100, 20_000)
    w = 0.7
    cum = cumulative_series(times, np.sin(w * times))
    t = times[1:]
    expected = np.sqrt(0.5 - np.sin(2 * w * t) / (4 * w * t))
    late = t >= 1.0  # the first steps carry the relative error of the t^2 onset
    np.testing.assert_allclose(cum[1:][late], expected[late], atol=1e-5)
    # second-order quadrature: halving the step cuts the error by about four
    fine = uniform_grid(100, 40_000)
    err_coarse = abs(cum[-1] - expected[-1])
    err_fine = abs(cumulative_series(fine, np.sin(w * fine))[-1] - expected[-1])
    assert 3.5 < err_coarse / err_fine < 4.5
    assert cum[0] == 0.0
    cum, rel = cumulative_series(times, np.full_like(times, 2.0), haar_mean=4.0)
    np.testing.assert_allclose(rel, 0.5)


def test_transient_factor_goe():
    times = uniform_grid(400, 4000)
    model = PerturbationModel("goe", 0.05)
    tf = transient_factor(model, times)
    assert tf[0] == 0.0
    assert 0 < tf[-1] < 1
    # compare with a fine quadrature of (1 - exp(-s^2))^2 over lambda t in [0, 20]
    s = np.linspace(0, 20, 200_001)
    g = (1 - np.exp(-(s**2))) ** 2
    assert tf[-1] == pytest.approx(np.trapezoid(g, s) / 20, rel=1e-6)
    np.testing.assert_array_equal(transient_factor(np.exp(-((0.05 * times) ** 2)), times), tf)


def test_asymptotic_error_matches_vectorized():
    psi = haar_state(SeedSpec(3), SYSTEM.dim)
    A = collective_spin(SYSTEM, "x").power(2)
    u = H15.eigenvectors
    p = np.abs(u.conj().T @ psi.amplitudes) ** 2
    a = u.conj().T @ A.matrix @ u
    off = np.abs(a) ** 2
    np.fill_diagonal(off, 0.0)
    expected = p @ off @ p
    assert asymptotic_error(A, H15, psi).squared == pytest.approx(expected, rel=1e-12)


def test_haar_average_of_asymptotic_error():
    # E_Haar[sum_{n != m} p_n p_m |A_nm|^2] / (Tr A_s / d)^2 = d/(d+1) (eta - eta_D)
    report = build_report(collective_spin(SYSTEM, "x"), H15)
    d = report.dim
    values = np.array([asymptotic_error(report.shifted, H15, haar_state(SeedSpec(40, (i,)), d)).squared
                       for i in range(3000)]) / report.haar_mean**2
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - asymptotic_haar_error(report, H15) ** 2) < 4 * se


def test_degenerate_spectrum_flags_and_warning():
    H = HermitianOperator.from_diagonal([0.0, 1.0, 1.0, 3.0])
    flags = spectral_flags(H, t_max=100)
    assert flags["degenerate"] and flags["gap_collision"] and not flags["resolved"]
    psi = haar_state(SeedSpec(1), 4)
    with pytest.warns(DegenerateSpectrumWarning):
        result = asymptotic_error(HermitianOperator.from_diagonal([0, 1, 2, 3]), H, psi)
    assert result.gap_collision


def test_gap_collision_without_degeneracy():
    # equally spaced levels have equal gaps
    H = HermitianOperator.from_diagonal([0.0, 1.0, 2.0])
    flags = spectral_flags(H)
    assert not flags["degenerate"] and flags["gap_collision"]


def test_fit_lambda_recovers_synthetic_curve():
    times = uniform_grid(600, 600)
    curve = infidelity_law(times, 0.013, 0.2)
    fit = fit_lambda(times, curve, 0.2)
    assert fit.strength == pytest.approx(0.013, rel=1e-6)
    assert fit.note == ""


def test_fit_lambda_flat_and_invalid():
    times = uniform_grid(10, 10)
    fit = fit_lambda(times, np.zeros_like(times), 0.3)
    assert fit.strength == 0.0 and "flat" in fit.note
    with pytest.raises(ValueError):
        fit_lambda(times, np.zeros(3), 0.3)
    with pytest.raises(ValueError):
        fit_lambda(times, np.ones_like(times), 1.5)


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(1e-3, 0.5), s0=st.floats(0.0, 0.9))
def test_fit_lambda_round_trip(lam, s0):
    times = uniform_grid(5 / lam, 200)
    fit = fit_lambda(times, infidelity_law(times, lam, s0), s0)
    assert fit.strength == pytest.approx(lam, rel=1e-5)


def test_gaussian_local_field_f_matches_monte_carlo():
    H = tim_hamiltonian(TimParams(4, 0.33))
    tau = np.array([0.5, 1.5])
    exact = gaussian_local_field_f(H, tau)
    est = empirical_f(PerturbationModel("local-fields", 0.02), tau, H, SeedSpec(6), n_samples=20_000)
    assert np.all(np.abs(est.value - exact) < 4 * est.stderr + 1e-4)


def test_run_ensemble_is_thread_independent_and_consistent():
    states = StateEnsemble("haar", 3).sample(SeedSpec(2, (0,)), SYSTEM.dim)
    obs = [build_report(collective_spin(SYSTEM, "x"), H15, "Sx")]
    kwargs = dict(n_instances=4, seed=SeedSpec(2, (1,)))
    times = uniform_grid(30, 60)
    a = run_ensemble(H15, states, PerturbationModel("goe", 0.02), times, obs, workers=1, **kwargs)
    b = run_ensemble(H15, states, PerturbationModel("goe", 0.02), times, obs, workers=3, **kwargs)
    ra, rb = a["Sx"], b["Sx"]
    assert ra.cumulative_sq.tobytes() == rb.cumulative_sq.tobytes()
    assert a.infidelity.tobytes() == b.infidelity.tobytes()
    assert ra.n_states == 3
    assert ra.relative[-1] == pytest.approx(np.sqrt(ra.mean_sq[-1]) / ra.haar_mean)
    assert coarse_index(times) == 60
    # per-state series equal a direct single-state run with the same stream
    single = DynamicsScenario(H15, states[1], PerturbationModel("goe", 0.02), times, 4, SeedSpec(2, (1, 1)),
                              tuple(obs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpectrumWarning)
        direct = error_series(single)["Sx"]
    np.testing.assert_allclose(ra.cumulative_sq[1], direct.cumulative**2, rtol=1e-12)

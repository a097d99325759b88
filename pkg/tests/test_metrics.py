import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obspurity.ensembles import SeedSpec, haar_state
from obspurity.exceptions import DegenerateSpectrumWarning, TrivialObservableError
from obspurity.metrics import (
    build_report,
    diagonal_ensemble,
    diagonal_purity,
    eigenbasis_diagonal,
    infinite_time_average,
    inverse_participation_ratio,
    observable_purity,
    shift_spectrum,
    variation_distance,
)
from obspurity.operators import HermitianOperator, PureState, evolve
from obspurity.spins import LmgParams, SpinSystem, collective_spin, lmg_hamiltonian


def random_hermitian(seed, d):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return HermitianOperator((z + z.conj().T) / 2)


def test_projector_has_unit_purity():
    assert observable_purity(HermitianOperator.from_diagonal([1, 0, 0, 0])) == pytest.approx(1.0)


def test_uniform_nonzero_spectrum():
    # shifted spectrum (0, 1, 1, 1)
    assert observable_purity(HermitianOperator.from_diagonal([0, 1, 1, 1])) == pytest.approx(1 / 3)


def test_identity_is_trivial():
    with pytest.raises(TrivialObservableError):
        observable_purity(HermitianOperator.identity(4))


def test_spin_one_sz():
    sz = collective_spin(SpinSystem(2), "z")
    assert observable_purity(sz) == pytest.approx(5 / 9)


def test_shift_clamps_near_zero_eigenvalues():
    op = HermitianOperator.from_diagonal([1e-13, 0.0, 2.0])
    _, values, emin = shift_spectrum(op)
    assert emin == 0.0
    assert values[1] == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(2, 10),
       a=st.floats(0.01, 100), b=st.floats(-100, 100))
def test_purity_affine_invariance_and_bounds(seed, d, a, b):
    A = random_hermitian(seed, d)
    eta = observable_purity(A)
    assert 1 / (d - 1) - 1e-9 <= eta <= 1 + 1e-9
    assert observable_purity(A * a + b) == pytest.approx(eta, rel=1e-7)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(2, 10))
def test_diagonal_purity_bounds(seed, d):
    A = random_hermitian(seed, d)
    H = random_hermitian(seed + 1, d)
    shifted, _, _ = shift_spectrum(A)
    dp = diagonal_purity(shifted, H)
    assert 1 / d - 1e-12 <= dp <= observable_purity(A) + 1e-9


def test_diag_purity_equals_purity_when_commuting():
    H = lmg_hamiltonian(LmgParams(6, 1.5))
    A = H.power(2) + 3.0 * H
    report = build_report(A, H)
    assert report.diag_purity == pytest.approx(report.purity, rel=1e-10)
    assert report.modified_purity == pytest.approx(0.0, abs=1e-10)


def test_report_fields():
    A = HermitianOperator.from_diagonal([0.0, 1.0, 3.0])
    r = build_report(A, label="a")
    assert r.dim == 3 and r.label == "a"
    assert r.haar_mean == pytest.approx(4 / 3)
    assert r.rho.purity() == pytest.approx(r.purity)
    with pytest.raises(ValueError):
        r.modified_purity


def test_ipr_of_eigenstate_and_uniform_superposition():
    H = HermitianOperator.from_diagonal([0.0, 1.0, 2.0, 3.0])
    assert inverse_participation_ratio(H, PureState.basis(4, 2)) == pytest.approx(1.0)
    assert inverse_participation_ratio(H, PureState(np.full(4, 0.5))) == pytest.approx(0.25)


def test_diagonal_ensemble_density_is_stationary():
    H = random_hermitian(4, 6)
    psi = haar_state(SeedSpec(4), 6)
    rho = diagonal_ensemble(H, psi).density()
    assert np.trace(rho.matrix).real == pytest.approx(1.0)
    np.testing.assert_allclose(H.matrix @ rho.matrix - rho.matrix @ H.matrix, 0, atol=1e-12)


def test_infinite_time_average_matches_long_average():
    H = random_hermitian(7, 5)
    A = random_hermitian(8, 5)
    psi = haar_state(SeedSpec(5), 5)
    times = np.linspace(0, 4000, 40_001)
    u = H.eigenvectors
    b = u.conj().T @ psi.amplitudes
    phases = np.exp(-1j * np.outer(times, H.eigenvalues)) * b
    traj = phases @ u.T
    values = np.einsum("ti,ij,tj->t", traj.conj(), A.matrix, traj).real
    assert values.mean() == pytest.approx(infinite_time_average(A, H, psi), abs=5e-3)
    np.testing.assert_allclose(evolve(H, psi, times[5]).amplitudes, traj[5], atol=1e-10)


def test_degenerate_hamiltonian_warns():
    H = HermitianOperator.from_diagonal([0.0, 1.0, 1.0])
    A = random_hermitian(1, 3)
    with pytest.warns(DegenerateSpectrumWarning):
        infinite_time_average(A, H, PureState(np.ones(3) / np.sqrt(3)))


def test_no_warning_when_nondegenerate():
    H = HermitianOperator.from_diagonal([0.0, 1.0, 2.5])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        infinite_time_average(random_hermitian(1, 3), H, PureState.basis(3, 0))


def test_eigenbasis_diagonal_sums_to_trace():
    A, H = random_hermitian(2, 7), random_hermitian(3, 7)
    assert eigenbasis_diagonal(A, H).sum() == pytest.approx(np.trace(A.matrix).real)


def test_variation_distance():
    assert variation_distance([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)
    assert variation_distance([0.2, 0.8], [0.2, 0.8]) == 0.0
    with pytest.raises(ValueError):
        variation_distance([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(ValueError):
        variation_distance([0.5, 0.5], [0.3, 0.3, 0.4])

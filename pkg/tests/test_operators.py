import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from obspurity.exceptions import DimensionError, NonHermitianError, SizeGuardError
from obspurity.operators import (
    DensityOperator,
    HermitianOperator,
    PureState,
    eigendecompose,
    evolve,
    evolve_series,
    expectation,
    frobenius_inner,
    matrix_apply,
    state_distance,
    trace,
)
from obspurity.spins import LmgParams, SpinSystem, lmg_hamiltonian
from obspurity.ensembles import SeedSpec, spin_coherent_state


def random_hermitian(seed, d):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return HermitianOperator((z + z.conj().T) / 2)


def random_state(seed, d):
    rng = np.random.default_rng(seed)
    return PureState.normalized(rng.standard_normal(d) + 1j * rng.standard_normal(d))


def test_identity_spectrum():
    op = eigendecompose(HermitianOperator.identity(4))
    np.testing.assert_array_equal(op.eigenvalues, np.ones(4))
    u = op.eigenvectors
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_diagonal_gives_permutation_eigenvectors():
    op = HermitianOperator(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(op.eigenvalues, [1.0, 2.0, 3.0])
    expected = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex)
    np.testing.assert_array_equal(op.eigenvectors, expected)


def test_reconstruction_random_8x8():
    op = random_hermitian(3, 8)
    e, u = op.spectrum
    assert np.all(np.diff(e) >= 0)
    np.testing.assert_allclose(u @ np.diag(e) @ u.conj().T, op.matrix, atol=1e-9)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(8), atol=1e-10)


def test_decomposition_is_deterministic():
    a = random_hermitian(5, 12)
    b = HermitianOperator(a.matrix.copy())
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)


def test_phase_convention():
    u = random_hermitian(9, 10).eigenvectors
    for col in u.T:
        first = col[np.argmax(np.abs(col) > 1e-10)]
        assert abs(first.imag) < 1e-14 and first.real > 0


def test_non_hermitian_rejected_with_deviation():
    m = np.array([[0, 1], [0.5, 0]], dtype=complex)
    with pytest.raises(NonHermitianError, match="5.000e-01"):
        HermitianOperator(m)


def test_nan_rejected():
    with pytest.raises(ValueError):
        HermitianOperator(np.array([[np.nan, 0], [0, 1]]))


def test_size_guard_on_decomposition():
    op = HermitianOperator._trusted(np.ones((4097, 4097), dtype=complex))
    with pytest.raises(SizeGuardError):
        op.eigenvalues


def test_evolve_t0_is_identity():
    H = random_hermitian(1, 5)
    psi = random_state(2, 5)
    np.testing.assert_array_equal(evolve(H, psi, 0.0).amplitudes, psi.amplitudes)


def test_two_level_pi():
    H = HermitianOperator(np.diag([0.0, 1.0]))
    psi = PureState(np.array([1, 1]) / np.sqrt(2))
    out = evolve(H, psi, np.pi)
    target = PureState(np.array([1, -1]) / np.sqrt(2))
    assert state_distance(out, target) < 1e-12


def test_evolve_rejects_bad_input():
    H = random_hermitian(1, 3)
    with pytest.raises(DimensionError):
        evolve(H, random_state(0, 4), 1.0)
    with pytest.raises(ValueError):
        evolve(H, random_state(0, 3), np.inf)


def test_lmg_evolution_matches_runge_kutta():
    system = SpinSystem(15)
    H = lmg_hamiltonian(LmgParams(15, 0.4))
    psi = spin_coherent_state(SeedSpec(11), system)
    out = evolve(H, psi, 30.0)
    m = H.matrix
    sol = solve_ivp(lambda t, y: -1j * (m @ y), (0, 30.0), psi.amplitudes, method="DOP853", rtol=1e-12, atol=1e-12)
    ref = sol.y[:, -1]
    deficit = 1 - abs(np.vdot(ref, out.amplitudes)) ** 2
    assert deficit < 1e-8


def test_evolve_series_matches_pointwise():
    H = random_hermitian(4, 6)
    psi = random_state(5, 6)
    times = np.linspace(0, 3, 7)
    series = evolve_series(H, psi, times)
    for k, t in enumerate(times):
        np.testing.assert_allclose(series[k], evolve(H, psi, t).amplitudes, atol=1e-12)


def test_expectation_examples():
    psi = PureState(np.array([0, 1], dtype=complex))
    assert expectation(HermitianOperator.identity(2), psi) == pytest.approx(1.0)
    assert expectation(HermitianOperator(np.diag([0.0, 2.0])), psi) == pytest.approx(2.0)


def test_trace_and_inner_products():
    assert trace(HermitianOperator.identity(5)) == pytest.approx(5.0)
    a, b = random_hermitian(1, 6).matrix, random_hermitian(2, 6).matrix
    assert np.trace(matrix_apply(a, b)) == pytest.approx(np.trace(matrix_apply(b, a)))
    assert frobenius_inner(a, a).real >= 0


def test_pure_state_norm_enforced():
    with pytest.raises(ValueError):
        PureState(np.array([1.0, 1.0]))


def test_density_operator_checks():
    rho = DensityOperator.from_state(random_state(3, 4))
    assert rho.purity() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DensityOperator(np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        DensityOperator(np.diag([1.2, -0.2]))


def test_scalar_shift_keeps_spectrum_cache():
    op = random_hermitian(8, 5)
    e = op.eigenvalues.copy()
    shifted = op - 2.5
    np.testing.assert_allclose(shifted.eigenvalues, e - 2.5)
    fresh = HermitianOperator(shifted.matrix.copy())
    np.testing.assert_allclose(fresh.eigenvalues, shifted.eigenvalues, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(2, 12), t=st.floats(-50, 50))
def test_norm_conservation(seed, d, t):
    out = evolve(random_hermitian(seed, d), random_state(seed + 1, d), t)
    assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), t1=st.floats(-20, 20), t2=st.floats(-20, 20))
def test_group_property(seed, t1, t2):
    H = random_hermitian(seed, 7)
    psi = random_state(seed + 7, 7)
    direct = evolve(H, psi, t1 + t2)
    stepped = evolve(H, evolve(H, psi, t1), t2)
    assert state_distance(direct, stepped) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(-100, 100))
def test_expectation_shift(seed, c):
    A = random_hermitian(seed, 6)
    psi = random_state(seed + 3, 6)
    assert expectation(A + c, psi) == pytest.approx(expectation(A, psi) + c, abs=1e-9)


@pytest.mark.parametrize("d", [2, 64, 512])
def test_reconstruction_residual_sizes(d):
    op = random_hermitian(d, d)
    e, u = op.spectrum
    assert np.max(np.abs(u @ (e[:, None] * u.conj().T) - op.matrix)) <= 1e-9

"""Dynamical error model: evolution under H + lambda V averaged over random V,
its first-order prediction, the infidelity law, cumulative errors and the
fit of lambda to an infidelity curve.

Exact evolution (a fresh eigendecomposition of H + lambda V per instance)
is always the ground truth; the first-order formulas are reported next to
it, never substituted for it.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.optimize import minimize_scalar

from .ensembles import (
    GOE,
    LOCAL_FIELDS,
    PerturbationModel,
    SeedSpec,
    characteristic_f,
    empirical_f,
    sample_perturbation,
)
from .exceptions import ConvergenceError, DegenerateSpectrumWarning, DimensionError
from .metrics import (
    DEGENERACY_TOL,
    ObservableReport,
    build_report,
    diagonal_ensemble,
    eigenbasis_diagonal,
    is_degenerate,
)
from .operators import (
    DensityOperator,
    HermitianOperator,
    PureState,
    evolve_series,
    expectation_series,
    min_gap_difference,
    spectral_gaps,
)

GAP_COLLISION_TOL = 1e-8
# tau grid used to tabulate a Monte-Carlo f(tau) before interpolation
_EMPIRICAL_TAU_POINTS = 121


def uniform_grid(t_max, n_steps):
    if n_steps < 2:
        raise ValueError("time grid needs n_steps >= 2")
    return np.linspace(0.0, float(t_max), int(n_steps) + 1)


def check_grid(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("time grid needs at least two points")
    if times[0] != 0.0:
        raise ValueError("time grid must start at t = 0")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise ValueError("time grid must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError("time grid must be uniform")
    return times


@dataclass(frozen=True)
class DynamicsScenario:
    hamiltonian: HermitianOperator
    initial: PureState
    perturbation: PerturbationModel
    times: np.ndarray
    n_instances: int = 50
    seed: SeedSpec = SeedSpec(0)
    observables: tuple = ()
    system: object = None

    def __post_init__(self):
        object.__setattr__(self, "times", check_grid(self.times))
        if self.n_instances < 1:
            raise ValueError("need at least one perturbation instance")
        if self.hamiltonian.dim != self.initial.dim:
            raise DimensionError("initial state and Hamiltonian differ in dimension")
        reports = []
        for i, obs in enumerate(self.observables):
            if not isinstance(obs, ObservableReport):
                obs = build_report(obs, self.hamiltonian, label=f"A{i + 1}")
            if obs.dim != self.hamiltonian.dim:
                raise DimensionError(f"observable {obs.label!r} has dimension {obs.dim}")
            reports.append(obs)
        object.__setattr__(self, "observables", tuple(reports))

    @property
    def labels(self):
        return [o.label for o in self.observables]

    def with_observables(self, observables):
        return replace(self, observables=tuple(observables))


@dataclass
class PerturbedEvolution:
    """Ideal and perturbed trajectories of one scenario.

    ``instance_expectations`` has shape (instances, observables, times) and
    ``fidelities`` (instances, times). ``states`` is kept only on request.
    """

    times: np.ndarray
    ideal: np.ndarray
    ideal_expectations: np.ndarray
    instance_expectations: np.ndarray
    fidelities: np.ndarray
    states: np.ndarray | None = None

    @property
    def n_instances(self):
        return self.fidelities.shape[0]

    def averaged_density(self, k):
        """[rho_sim(t_k)]_V as a density operator (needs ``keep_states``)."""
        if self.states is None:
            raise ValueError("states were not kept; rerun with keep_states=True")
        s = self.states[:, k, :]
        return DensityOperator(np.einsum("ni,nj->ij", s, s.conj()) / s.shape[0])

    def averaged_trace(self, k):
        s = self.states[:, k, :]
        return float(np.sum(np.abs(s) ** 2) / s.shape[0])


def _instance(scenario, ops, index):
    model = scenario.perturbation
    V = sample_perturbation(model, scenario.seed.child(index), scenario.system or scenario.hamiltonian.dim,
                            hamiltonian=scenario.hamiltonian)
    Hp = scenario.hamiltonian + model.strength * V
    try:
        states = evolve_series(Hp, scenario.initial, scenario.times)
    except ConvergenceError as exc:
        raise ConvergenceError(f"perturbation instance {index}: {exc}") from exc
    exps = np.array([expectation_series(op, states) for op in ops]) if ops else np.empty((0, states.shape[0]))
    return states, exps


def perturbed_evolution(scenario, keep_states=False, workers=1):
    """Evolve under every perturbation instance, results in instance order."""
    ops = [o.original for o in scenario.observables]
    ideal = evolve_series(scenario.hamiltonian, scenario.initial, scenario.times)
    ideal_exps = np.array([expectation_series(op, ideal) for op in ops]) if ops else np.empty((0, ideal.shape[0]))

    def task(i):
        states, exps = _instance(scenario, ops, i)
        fid = np.abs(np.einsum("ki,ki->k", ideal.conj(), states)) ** 2
        return (states if keep_states else None), exps, fid

    indices = range(scenario.n_instances)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, indices))
    else:
        results = [task(i) for i in indices]
    return PerturbedEvolution(
        times=scenario.times,
        ideal=ideal,
        ideal_expectations=ideal_exps,
        instance_expectations=np.array([r[1] for r in results]),
        fidelities=np.array([r[2] for r in results]),
        states=np.array([r[0] for r in results]) if keep_states else None,
    )


def _mean_and_stderr(samples, axis=0):
    n = samples.shape[axis]
    mean = samples.mean(axis=axis)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=axis, ddof=1) / np.sqrt(n)


_F_CACHE = {}


def f_on_grid(scenario, n_samples=100_000):
    """f(lambda t) on the scenario grid.

    Closed forms where they exist; otherwise a Monte-Carlo table over tau
    (cached per scenario Hamiltonian, model and seed) interpolated onto the grid.
    """
    model = scenario.perturbation
    tau = model.strength * scenario.times
    try:
        return characteristic_f(model, tau)
    except ValueError:
        pass
    key = (id(scenario.hamiltonian), model, scenario.seed.master_seed, float(tau[-1]), n_samples)
    if key not in _F_CACHE:
        table_tau = np.linspace(0.0, tau[-1], _EMPIRICAL_TAU_POINTS)
        _F_CACHE[key] = (
            scenario.hamiltonian,  # keeps the id alive while cached
            empirical_f(model, table_tau, scenario.hamiltonian, SeedSpec(scenario.seed.master_seed, (2**31,)),
                        n_samples, system=scenario.system),
        )
    table = _F_CACHE[key][1]
    return np.interp(tau, table.tau, table.value)


def gaussian_local_field_f(hamiltonian, tau):
    """Exact pair-averaged f for local Gaussian fields.

    V_nn is linear in the Gaussian fields, so V_ll - V_mm is Gaussian with
    variance |x_l - x_m|^2 / 4, where x_n[j] = <u_n|sigma_x^(j)|u_n>.
    """
    from .spins import PAULI, _site_operator

    n = int(round(np.log2(hamiltonian.dim)))
    u = hamiltonian.eigenvectors
    x = np.array([np.einsum("in,ij,jn->n", u.conj(), _site_operator(n, j, PAULI["x"]), u).real
                  for j in range(1, n + 1)])
    d = hamiltonian.dim
    l, m = np.triu_indices(d, 1)
    var = np.sum((x[:, l] - x[:, m]) ** 2, axis=0) / 4
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    return np.exp(-np.multiply.outer(tau**2, var) / 2).mean(axis=1)


@dataclass(frozen=True)
class AsymptoticError:
    """Long-time limit of the cumulative error for one initial state."""

    squared: float
    degenerate: bool
    min_gap: float
    min_gap_difference: float

    @property
    def value(self):
        return math.sqrt(max(self.squared, 0.0))

    @property
    def gap_collision(self):
        return self.degenerate or self.min_gap_difference < GAP_COLLISION_TOL


def spectral_flags(H, t_max=None):
    """Degeneracy and gap-collision diagnostics; ``resolved`` compares the
    smallest gap difference to 2 pi / t_max when a horizon is given.
    """
    gaps = spectral_gaps(H)
    min_gap = float(gaps.min()) if gaps.size else math.inf
    min_diff = min_gap_difference(H)
    flags = {
        "min_gap": min_gap,
        "min_gap_difference": min_diff,
        "degenerate": min_gap < DEGENERACY_TOL,
        "gap_collision": min_gap < DEGENERACY_TOL or min_diff < GAP_COLLISION_TOL,
    }
    if t_max is not None:
        flags["resolved"] = min(min_gap, min_diff) * t_max > 2 * math.pi
    return flags


def asymptotic_error(A, H, psi0):
    """sum_{n != m} |b_n|^2 |b_m|^2 A_nm A_mn by explicit double sum."""
    if A.dim != H.dim or psi0.dim != H.dim:
        raise DimensionError("observable, Hamiltonian and state must share a dimension")
    flags = spectral_flags(H)
    if flags["gap_collision"]:
        warnings.warn("asymptotic_error: degenerate spectrum or colliding gaps", DegenerateSpectrumWarning,
                      stacklevel=2)
    u = H.eigenvectors
    p = diagonal_ensemble(H, psi0).populations
    a_eig = u.conj().T @ A.matrix @ u
    total = 0.0
    d = H.dim
    for n in range(d):
        for m in range(d):
            if n != m:
                total += p[n] * p[m] * (a_eig[n, m] * a_eig[m, n]).real
    return AsymptoticError(float(total), flags["degenerate"], flags["min_gap"], flags["min_gap_difference"])


def asymptotic_haar_error(A, H):
    """sqrt(d/(d+1) (Tr rho_A^2 - Tr rho_{A_D}^2)), the Haar-averaged plateau of the relative error."""
    report = A if isinstance(A, ObservableReport) else build_report(A, H)
    if report.diag_purity is None:
        report = build_report(report.original, H, report.label)
    d = report.dim
    return math.sqrt(max(d / (d + 1) * (report.purity - report.diag_purity), 0.0))


def transient_factor(model_or_f, times):
    """(1/t) int_0^t (1 - f(lambda s))^2 ds on a uniform grid.

    Accepts a perturbation model with a closed-form f or the values of f on
    the grid. The first-order prediction of E(A,t)^2 at finite t is the
    long-time value times this factor.
    """
    times = check_grid(times)
    if isinstance(model_or_f, PerturbationModel):
        f = characteristic_f(model_or_f, model_or_f.strength * times)
    else:
        f = np.asarray(model_or_f, dtype=float)
    g = (1 - f) ** 2
    out = np.empty_like(times)
    out[0] = g[0]
    out[1:] = cumulative_trapezoid(g, times) / times[1:]
    return out


def cumulative_series(times, delta, haar_mean=None):
    """Running RMS E(A,t) = sqrt((1/t) int_0^t delta^2) by trapezoid quadrature.

    E(A,0) is the t -> 0 limit |delta(0)|. With ``haar_mean`` the relative
    form E / haar_mean is returned as a second array.
    """
    times = check_grid(times)
    delta = np.asarray(delta, dtype=float)
    sq = np.empty_like(times)
    sq[0] = delta[0] ** 2
    sq[1:] = cumulative_trapezoid(delta**2, times) / times[1:]
    cum = np.sqrt(sq)
    if haar_mean is None:
        return cum
    return cum, cum / haar_mean


@dataclass
class ErrorSeries:
    label: str
    times: np.ndarray
    delta: np.ndarray
    delta_stderr: np.ndarray
    analytic_delta: np.ndarray
    cumulative: np.ndarray
    cumulative_rel: np.ndarray
    haar_mean: float
    purity: float
    diag_purity: float
    asymptotic_single: float
    asymptotic_haar: float
    approximate: bool = False
    coarse_final_sq: float = 0.0


def _series_from(scenario, evolution, f_grid):
    H = scenario.hamiltonian
    pops = diagonal_ensemble(H, scenario.initial).populations
    means, errs = _mean_and_stderr(evolution.instance_expectations, axis=0)
    out = {}
    for j, report in enumerate(scenario.observables):
        ideal = evolution.ideal_expectations[j]
        delta = ideal - means[j]
        dyn_avg = float(np.dot(pops, eigenbasis_diagonal(report.original, H)))
        analytic = (1 - f_grid) * (ideal - dyn_avg)
        cum, cum_rel = cumulative_series(scenario.times, delta, report.haar_mean)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateSpectrumWarning)
            single = asymptotic_error(report.shifted, H, scenario.initial).value
        out[report.label] = ErrorSeries(
            label=report.label,
            times=scenario.times,
            delta=delta,
            delta_stderr=errs[j],
            analytic_delta=analytic,
            cumulative=cum,
            cumulative_rel=cum_rel,
            haar_mean=report.haar_mean,
            purity=report.purity,
            diag_purity=report.diag_purity,
            asymptotic_single=single,
            asymptotic_haar=asymptotic_haar_error(report, H),
            approximate=scenario.perturbation.is_approximate,
            coarse_final_sq=_coarse_final_sq(scenario.times, delta),
        )
    return out


def _coarse_final_sq(times, delta):
    """E(A, t_k)^2 at k = coarse_index(times), recomputed with twice the step."""
    k = coarse_index(times)
    if k < 2:
        return float(delta[-1] ** 2)
    coarse_t = times[: k + 1 : 2]
    return float(trapezoid(delta[: k + 1 : 2] ** 2, coarse_t) / coarse_t[-1])


def error_series(scenario, evolution=None, workers=1):
    """ErrorSeries for every observable of the scenario, keyed by label."""
    evolution = evolution or perturbed_evolution(scenario, workers=workers)
    return _series_from(scenario, evolution, f_on_grid(scenario))


def delta_series(scenario, A, label="A"):
    """delta(A,t) = <A(t)>_ideal - [<A(t)>_sim]_V for one observable."""
    report = A if isinstance(A, ObservableReport) else build_report(A, scenario.hamiltonian, label)
    single = scenario.with_observables([report])
    return error_series(single)[report.label]


def analytic_delta(scenario, A):
    """(1 - f(lambda t)) (<psi(t)|A|psi(t)> - Tr(rho_D A))."""
    op = A.original if isinstance(A, ObservableReport) else A
    H = scenario.hamiltonian
    ideal = expectation_series(op, evolve_series(H, scenario.initial, scenario.times))
    pops = diagonal_ensemble(H, scenario.initial).populations
    return (1 - f_on_grid(scenario)) * (ideal - float(np.dot(pops, eigenbasis_diagonal(op, H))))


@dataclass
class InfidelitySeries:
    times: np.ndarray
    exact: np.ndarray
    exact_stderr: np.ndarray
    analytic: np.ndarray
    s0: float


def infidelity_series(scenario, evolution=None, workers=1):
    """Exact 1 - [|<psi(t)|psi_sim(t)>|^2]_V next to (1 - f(lambda t))(1 - S0)."""
    evolution = evolution or perturbed_evolution(scenario.with_observables([]), workers=workers)
    infid = 1.0 - evolution.fidelities
    mean, err = _mean_and_stderr(infid, axis=0)
    s0 = diagonal_ensemble(scenario.hamiltonian, scenario.initial).ipr
    return InfidelitySeries(scenario.times, mean, err, (1 - f_on_grid(scenario)) * (1 - s0), s0)


@dataclass(frozen=True)
class LambdaFit:
    strength: float
    residual: float
    curve: np.ndarray
    note: str = ""


def infidelity_law(times, strength, s0):
    """(1 - exp(-(lambda t)^2)) (1 - S0)."""
    return (1 - np.exp(-((strength * np.asarray(times)) ** 2))) * (1 - s0)


def fit_lambda(times, infidelity, s0, bounds=(1e-5, 1.0), flat_threshold=1e-6):
    """Least-squares lambda for the GOE infidelity law.

    A coarse scan of log10(lambda) over ``bounds`` brackets the minimum, then
    golden-section search refines it.
    """
    times = np.asarray(times, dtype=float)
    infidelity = np.asarray(infidelity, dtype=float)
    if times.shape != infidelity.shape or times.size < 5:
        raise ValueError("need matching time and infidelity arrays with at least 5 points")
    if not 0 <= s0 <= 1:
        raise ValueError("S0 must lie in [0, 1]")
    if np.all(np.abs(infidelity) < flat_threshold):
        return LambdaFit(0.0, float(np.sum(infidelity**2)), np.zeros_like(times),
                         note="flat infidelity series; lambda set to 0")

    def residual(log_lam):
        return float(np.sum((infidelity_law(times, 10.0**log_lam, s0) - infidelity) ** 2))

    lo, hi = np.log10(bounds[0]), np.log10(bounds[1])
    grid = np.linspace(lo, hi, 401)
    values = np.array([residual(x) for x in grid])
    k = int(np.argmin(values))
    if 0 < k < grid.size - 1:
        res = minimize_scalar(residual, bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden",
                              options={"xtol": 1e-12})
        best = float(res.x)
    else:
        best = float(grid[k])
    note = "" if 0 < k < grid.size - 1 else "minimum on the search boundary"
    lam = 10.0**best
    return LambdaFit(lam, residual(best), infidelity_law(times, lam, s0), note)


@dataclass
class EnsembleResult:
    """Cumulative relative errors averaged over initial states.

    ``cumulative_sq`` holds E(A,t)^2 per state, shape (states, times);
    ``coarse_sq`` the same quantity at the convergence-check index recomputed
    with a doubled step.
    """

    label: str
    times: np.ndarray
    cumulative_sq: np.ndarray
    haar_mean: float
    purity: float
    diag_purity: float
    asymptotic_haar: float
    asymptotic_single: np.ndarray
    coarse_sq: np.ndarray
    f_grid: np.ndarray
    approximate: bool = False
    per_state: list = field(default_factory=list, repr=False)

    @property
    def n_states(self):
        return self.cumulative_sq.shape[0]

    @property
    def mean_sq(self):
        return self.cumulative_sq.mean(axis=0)

    @property
    def relative(self):
        """sqrt(mean over states of E^2) / (Tr A_s / d)."""
        return np.sqrt(self.mean_sq) / self.haar_mean

    @property
    def relative_stderr(self):
        """Delta-method standard error of ``relative`` from the spread of E^2 over states."""
        if self.n_states < 2:
            return np.zeros_like(self.mean_sq)
        se_sq = self.cumulative_sq.std(axis=0, ddof=1) / np.sqrt(self.n_states)
        root = np.sqrt(self.mean_sq)
        safe = np.where(root > 0, root, 1.0)
        return np.where(root > 0, se_sq / (2 * safe), 0.0) / self.haar_mean

    @property
    def plateau(self):
        return float(self.relative[-1])

    @property
    def plateau_stderr(self):
        return float(self.relative_stderr[-1])

    @property
    def finite_time_prediction(self):
        """Long-time Haar prediction times sqrt((1/t) int (1 - f)^2), per time."""
        return self.asymptotic_haar * np.sqrt(transient_factor(self.f_grid, self.times))

    @property
    def single_state_prediction(self):
        """sqrt(mean of the per-state long-time values) / (Tr A_s / d)."""
        return float(np.sqrt(np.mean(self.asymptotic_single**2)) / self.haar_mean)

    @property
    def grid_change(self):
        """Relative change of E at the check index when the step is doubled."""
        k = coarse_index(self.times)
        fine = np.sqrt(self.cumulative_sq[:, k].mean())
        coarse = np.sqrt(self.coarse_sq.mean())
        return float(abs(coarse - fine) / fine) if fine > 0 else 0.0


@dataclass
class EnsembleRun:
    """Per-observable ensemble results plus the per-state infidelity curves."""

    times: np.ndarray
    results: dict
    infidelity: np.ndarray
    infidelity_stderr: np.ndarray
    s0: np.ndarray
    f_grid: np.ndarray

    def __getitem__(self, label):
        return self.results[label]

    def __iter__(self):
        return iter(self.results)

    def items(self):
        return self.results.items()


def coarse_index(times):
    """Largest even grid index, where the doubled-step grid ends."""
    return (len(times) - 1) // 2 * 2


def run_ensemble(hamiltonian, states, perturbation, times, observables, n_instances=50, seed=SeedSpec(0),
                 system=None, workers=1, keep_series=False):
    """Cumulative errors for each initial state, then averaged.

    State ``s`` uses perturbation streams ``seed.child(s, i)``. Work fans out
    over states (or over instances when there is a single state); results are
    reduced in index order, so they do not depend on ``workers``.
    """
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    if not states:
        raise ValueError("need at least one initial state")
    base = DynamicsScenario(hamiltonian, states[0], perturbation, times, n_instances, seed, tuple(observables),
                            system)
    f_grid = f_on_grid(base)
    inner = workers if len(states) == 1 else 1

    def task(s):
        scenario = replace(base, initial=states[s], seed=seed.child(s))
        evolution = perturbed_evolution(scenario, workers=inner)
        infid, infid_err = _mean_and_stderr(1.0 - evolution.fidelities, axis=0)
        s0 = diagonal_ensemble(hamiltonian, states[s]).ipr
        return _series_from(scenario, evolution, f_grid), infid, infid_err, s0

    if workers > 1 and len(states) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(task, range(len(states))))
    else:
        outputs = [task(s) for s in range(len(states))]
    per_state = [o[0] for o in outputs]
    results = {}
    for report in base.observables:
        rows = [series[report.label] for series in per_state]
        results[report.label] = EnsembleResult(
            label=report.label,
            times=base.times,
            cumulative_sq=np.array([r.cumulative**2 for r in rows]),
            haar_mean=report.haar_mean,
            purity=report.purity,
            diag_purity=report.diag_purity,
            asymptotic_haar=asymptotic_haar_error(report, hamiltonian),
            asymptotic_single=np.array([r.asymptotic_single for r in rows]),
            coarse_sq=np.array([r.coarse_final_sq for r in rows]),
            f_grid=f_grid,
            approximate=perturbation.is_approximate,
            per_state=rows if keep_series else [],
        )
    return EnsembleRun(
        times=base.times,
        results=results,
        infidelity=np.array([o[1] for o in outputs]),
        infidelity_stderr=np.array([o[2] for o in outputs]),
        s0=np.array([o[3] for o in outputs]),
        f_grid=f_grid,
    )


def time_average_check(times, delta):
    """Mean of delta over the grid and the standard error of the time samples."""
    delta = np.asarray(delta, dtype=float)
    return float(delta.mean()), float(delta.std(ddof=1) / np.sqrt(delta.size))


__all__ = [
    "AsymptoticError",
    "DynamicsScenario",
    "EnsembleResult",
    "EnsembleRun",
    "ErrorSeries",
    "InfidelitySeries",
    "LambdaFit",
    "PerturbedEvolution",
    "analytic_delta",
    "asymptotic_error",
    "asymptotic_haar_error",
    "check_grid",
    "coarse_index",
    "cumulative_series",
    "delta_series",
    "error_series",
    "f_on_grid",
    "fit_lambda",
    "gaussian_local_field_f",
    "infidelity_law",
    "infidelity_series",
    "is_degenerate",
    "perturbed_evolution",
    "run_ensemble",
    "spectral_flags",
    "time_average_check",
    "transient_factor",
    "uniform_grid",
    "GOE",
    "LOCAL_FIELDS",
]

"""Built-in oracle suite.

Every closed form implemented in the package is checked against an
independent computation (Monte-Carlo, direct arithmetic or quadrature).
A failing gate is reported and the suite keeps going.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..dynamics import (
    DynamicsScenario,
    asymptotic_error,
    cumulative_series,
    error_series,
    fit_lambda,
    infidelity_law,
    infidelity_series,
    uniform_grid,
)
from ..ensembles import PerturbationModel, SeedSpec, characteristic_f, goe_matrix, haar_state_batch, haar_unitaries
from ..exceptions import DegenerateSpectrumWarning
from ..metrics import build_report, diagonal_ensemble, eigenbasis_diagonal, observable_purity, variation_distance
from ..operators import HermitianOperator, evolve_series, expectation_series
from ..spins import (
    LmgParams,
    SpinSystem,
    collective_spin,
    lmg_hamiltonian,
    partition_projector,
    pauli_string,
    stretched_state,
    sx_projector,
)
from ..static import analytic_delta_sq, haar_average_delta_sq, mixed_relative_error_mc, relative_delta
from .tables import ResultTable

SIGMA = 3.0

# closed form -> gates that exercise it
COVERAGE = {
    "Haar first moment E|U_11|^2 = 1/d": ("haar_p1",),
    "Haar second moment E|U_11|^4 = 2/(d(d+1))": ("haar_p2",),
    "Haar mean of the inverse participation ratio 2/(d+1)": ("haar_ipr",),
    "purity of rank-one projectors = 1": ("purity_closed_forms",),
    "purity of shifted Pauli strings = 2^-(N-1)": ("purity_closed_forms",),
    "purity of partition projectors = 2^(k-N)": ("purity_closed_forms",),
    "purity of collective magnetization = (N+1)/N 2^-N": ("purity_closed_forms",),
    "Haar average of delta^2 (pure-state perturbation)": ("static_delta_sq", "static_d2_edge"),
    "mean of delta vanishes": ("static_delta_mean",),
    "relative error from purity (pure-state perturbation)": ("relative_from_purity",),
    "depolarizing relative error": ("mixed_depolarizing",),
    "orthogonal-mixture relative error": ("mixed_orthogonal",),
    "GOE characteristic function f = exp(-tau^2)": ("goe_f",),
    "first-order error delta(A,t) and infidelity law (exact for eigenbasis-diagonal V)": ("first_order_diagonal",),
    "long-time cumulative error double sum": ("long_time_double_sum",),
    "Haar-averaged plateau from purity and diagonal purity": ("haar_plateau_identity",),
    "diagonal purity equals purity for commuting A and H": ("diag_purity_commuting",),
    "running RMS quadrature": ("cumulative_sine",),
    "lambda fit of the infidelity law": ("fit_lambda_synthetic",),
    "total variation distance": ("variation_distance",),
}


@dataclass(frozen=True)
class GateResult:
    name: str
    passed: bool
    value: float
    expected: float
    tolerance: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: value={self.value:.6g} expected={self.expected:.6g} "
                f"tol={self.tolerance:.3g} {self.detail}").rstrip()


@dataclass
class ValidationReport:
    gates: list

    @property
    def passed(self):
        return all(g.passed for g in self.gates)

    def failures(self):
        return [g for g in self.gates if not g.passed]

    def coverage(self):
        names = {g.name for g in self.gates}
        return {formula: all(any(n.startswith(g) for n in names) for g in gates)
                for formula, gates in COVERAGE.items()}

    def lines(self):
        out = [g.line() for g in self.gates]
        for formula, covered in self.coverage().items():
            out.append(f"{'COVERED' if covered else 'MISSING'} {formula}")
        out.append(f"{'ALL GATES PASS' if self.passed else f'{len(self.failures())} GATE(S) FAILED'}")
        return out

    def table(self, seed):
        t = ResultTable("validate", ["gate", "passed", "value", "expected", "tolerance", "detail"])
        for g in self.gates:
            t.add(scenario_id="validate", master_seed=seed, state_index=-1, n_instances=0, gate=g.name,
                  passed=g.passed, value=g.value, expected=g.expected, tolerance=g.tolerance, detail=g.detail)
        return t


def _sigma_gate(name, samples, expected, detail=""):
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(samples.size))
    return GateResult(name, abs(mean - expected) <= SIGMA * se, mean, expected, SIGMA * se, detail)


def _exact_gate(name, value, expected, tol=1e-10, detail=""):
    return GateResult(name, abs(value - expected) <= tol, float(value), float(expected), tol, detail)


def _haar_corner_samples(seed, d, n, chunk=10_000):
    out = []
    for i, start in enumerate(range(0, n, chunk)):
        u = haar_unitaries(seed.child(i), d, min(chunk, n - start))
        out.append(np.abs(u[:, 0, 0]) ** 2)
    return np.concatenate(out)


def gate_haar_moments(seed, n=100_000):
    gates = []
    for d in (4, 16):
        p = _haar_corner_samples(seed.child(d), d, n)
        gates.append(_sigma_gate(f"haar_p1_d{d}", p, 1 / d))
        gates.append(_sigma_gate(f"haar_p2_d{d}", p**2, 2 / (d * (d + 1))))
    return gates


def gate_haar_ipr(seed, n=10_000):
    d = 16
    H = lmg_hamiltonian(LmgParams(15, 0.4))
    psi = haar_state_batch(seed, d, n)
    s0 = np.sum(np.abs(psi @ H.eigenvectors.conj()) ** 4, axis=1)
    return [_sigma_gate("haar_ipr_d16", s0, 2 / (d + 1))]


def gate_purity_closed_forms():
    worst = {"projector": 0.0, "pauli": 0.0, "partition": 0.0, "magnetization": 0.0}
    v = np.zeros(16)
    v[3] = 1.0
    worst["projector"] = abs(observable_purity(HermitianOperator(np.outer(v, v))) - 1)
    for n in range(2, 13):
        strings = [pauli_string(n, [(j, "z") for j in range(1, n + 1)]), pauli_string(n, [(n // 2 + 1, "z")])]
        if n <= 8:  # dense eigendecomposition of non-diagonal strings stays cheap here
            strings.append(pauli_string(n, [(1, "y")] + [(j, "x") for j in range(2, n + 1)]))
        for s in strings:
            worst["pauli"] = max(worst["pauli"], abs(observable_purity(s) - 2.0 ** (-(n - 1))))
        for k in range(n + 1):
            if k == 0:
                continue  # k = 0 is the identity, excluded as a trivial observable
            worst["partition"] = max(worst["partition"],
                                     abs(observable_purity(partition_projector(n, k)) - 2.0 ** (k - n)))
        sz = collective_spin(SpinSystem(n, "full"), "z")
        worst["magnetization"] = max(worst["magnetization"],
                                     abs(observable_purity(sz) - (n + 1) / n * 2.0 ** (-n)))
    return [_exact_gate(f"purity_closed_forms_{k}", v, 0.0) for k, v in worst.items()]


def _static_family():
    sys15 = SpinSystem(15)
    sz = collective_spin(sys15, "z")
    v = np.zeros(16)
    v[0] = 1.0
    return {"Sz": sz, "Sz2": sz.power(2), "Sz6": sz.power(6), "projector": HermitianOperator(np.outer(v, v))}


def gate_static(seed, n=2000, gamma=0.2):
    gates = []
    for j, (label, A) in enumerate(_static_family().items()):
        shifted = build_report(A).shifted
        est = haar_average_delta_sq(shifted, gamma, n, seed.child(j))
        gates.append(GateResult(f"static_delta_sq_{label}", abs(est.mean - est.analytic) <= SIGMA * est.stderr,
                                est.mean, est.analytic, SIGMA * est.stderr))
        gates.append(GateResult(f"static_delta_mean_{label}", abs(est.mean_delta) <= SIGMA * est.mean_delta_stderr,
                                est.mean_delta, 0.0, SIGMA * est.mean_delta_stderr))
        rel = relative_delta(A, gamma) ** 2 * build_report(A).haar_mean ** 2
        gates.append(_exact_gate(f"relative_from_purity_{label}", rel, analytic_delta_sq(shifted, gamma),
                                 tol=1e-12 * max(1.0, rel)))
    A2 = HermitianOperator(np.diag([0.0, 2.0]))
    est = haar_average_delta_sq(A2, gamma, n, seed.child(99))
    ok = np.isfinite(est.analytic) and abs(est.mean - est.analytic) <= SIGMA * est.stderr
    gates.append(GateResult("static_d2_edge", bool(ok), est.mean, est.analytic, SIGMA * est.stderr, "d=2"))
    return gates


def gate_mixed(seed, n=10_000):
    gates = []
    v = np.zeros(16)
    v[0] = 1.0
    proj = HermitianOperator(np.outer(v, v))
    sx = collective_spin(SpinSystem(15), "x")
    for i, gamma in enumerate((0.05, 0.1, 0.3)):
        for kind, tag in (("depolarizing", "mixed_depolarizing"), ("orthogonal-mixture", "mixed_orthogonal")):
            for j, (label, A) in enumerate((("projector", proj), ("Sx", sx))):
                est = mixed_relative_error_mc(A, gamma, n, seed.child(i, j, len(tag)), kind)
                gates.append(GateResult(f"{tag}_{label}_g{gamma}", abs(est.value - est.analytic) <= SIGMA * est.stderr,
                                        est.value, est.analytic, SIGMA * est.stderr))
    return gates


def gate_goe_f(seed, n=100_000, sampler=goe_matrix, taus=(0.5, 1.0, 1.5)):
    """Empirical f(tau) from GOE diagonals in the LMG eigenbasis against exp(-tau^2).

    ``sampler(rng, d)`` can be swapped to inject a faulty convention.
    """
    H = lmg_hamiltonian(LmgParams(15, 0.4))
    u = H.eigenvectors
    d = H.dim
    rng = seed.generator()
    diags = np.empty((n, d))
    chunk = 5000
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        vs = np.array([sampler(rng, d) for _ in range(m)])
        diags[start:start + m] = np.einsum("in,sij,jn->sn", u.conj(), vs, u).real
    gates = []
    for tau in taus:
        s = np.abs(np.exp(-1j * tau * diags).sum(axis=1)) ** 2
        per_draw = (s - d) / (d * (d - 1))
        gates.append(_sigma_gate(f"goe_f_tau{tau}", per_draw, float(np.exp(-tau**2))))
    f0 = characteristic_f(PerturbationModel("goe", 0.01), np.array([0.0, 2.0]))
    gates.append(_exact_gate("goe_f_bounds", float(f0[0]), 1.0, detail=f"f(2)={f0[1]:.3g}"))
    return gates


def gate_first_order_diagonal(seed):
    """For V diagonal in the eigenbasis of H the first-order formulas are exact in expectation."""
    system = SpinSystem(8)
    H = lmg_hamiltonian(LmgParams(8, 1.5))
    psi = stretched_state(system, "x", -1)
    model = PerturbationModel("diagonal", 0.05)
    sx = collective_spin(system, "x")
    scen = DynamicsScenario(H, psi, model, uniform_grid(40, 40), 400, seed, (build_report(sx, H, "Sx"),))
    es = error_series(scen)["Sx"]
    inf = infidelity_series(scen)
    gates = []
    for k in (10, 20, 40):
        tag = f"t{scen.times[k]:g}"
        se = max(es.delta_stderr[k], 1e-12)
        gates.append(GateResult(f"first_order_diagonal_delta_{tag}", abs(es.delta[k] - es.analytic_delta[k]) <= SIGMA * se,
                                es.delta[k], es.analytic_delta[k], SIGMA * se))
        se = max(inf.exact_stderr[k], 1e-12)
        gates.append(GateResult(f"first_order_diagonal_infidelity_{tag}",
                                abs(inf.exact[k] - inf.analytic[k]) <= SIGMA * se, inf.exact[k], inf.analytic[k],
                                SIGMA * se))
    return gates


def long_time_quadrature(A, H, psi0, t_max=1000.0, n_steps=100_000):
    """E(A, t_max)^2 from the f -> 0 error series <A(t)> - Tr(rho_D A)."""
    times = uniform_grid(t_max, n_steps)
    exp_t = expectation_series(A, evolve_series(H, psi0, times))
    pops = diagonal_ensemble(H, psi0).populations
    delta = exp_t - float(np.dot(pops, eigenbasis_diagonal(A, H)))
    return float(cumulative_series(times, delta)[-1] ** 2)


def lmg8_observables():
    system = SpinSystem(8)
    sx = collective_spin(system, "x")
    return {"Sx": sx, "Sx6": sx.power(6), "proj_m0": sx_projector(system, 0)}


def gate_long_time():
    system = SpinSystem(8)
    H = lmg_hamiltonian(LmgParams(8, 1.5))
    psi = stretched_state(system, "x", -1)
    gates = []
    for label, A in lmg8_observables().items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateSpectrumWarning)
            exact = asymptotic_error(A, H, psi)
        quad = long_time_quadrature(A, H, psi)
        rel = abs(quad - exact.squared) / exact.squared
        gates.append(GateResult(f"long_time_double_sum_{label}", rel <= 0.05 and not exact.gap_collision, quad,
                                exact.squared, 0.05 * exact.squared, f"relative={rel:.3g}"))
    return gates


def gate_haar_plateau_identity(seed, n=20_000):
    """Haar mean of the double sum equals (TrA_s/d)^2 times the squared Haar plateau."""
    H = lmg_hamiltonian(LmgParams(15, 0.4))
    sx = collective_spin(SpinSystem(15), "x")
    report = build_report(sx, H)
    u = H.eigenvectors
    a = u.conj().T @ report.shifted.matrix @ u
    off = np.abs(a) ** 2
    np.fill_diagonal(off, 0.0)
    psi = haar_state_batch(seed, H.dim, n)
    p = np.abs(psi @ u.conj()) ** 2
    samples = np.einsum("sn,nm,sm->s", p, off, p)
    d = H.dim
    expected = (report.haar_mean**2) * d / (d + 1) * (report.purity - report.diag_purity)
    return [_sigma_gate("haar_plateau_identity_Sx", samples, expected)]


def gate_diag_purity_commuting():
    system = SpinSystem(15)
    H = lmg_hamiltonian(LmgParams(15, 1.0, 1e-9))  # field-dominated, essentially diagonal
    H = HermitianOperator(np.diag(np.diag(H.matrix).real))
    report = build_report(collective_spin(system, "z").power(2), H)
    return [_exact_gate("diag_purity_commuting_Sz2", report.diag_purity, report.purity)]


def gate_cumulative_sine():
    times = uniform_grid(2000.0, 200_000)
    e = cumulative_series(times, np.sin(1.3 * times))[-1]
    return [GateResult("cumulative_sine", abs(e - 1 / math.sqrt(2)) <= 2e-3, e, 1 / math.sqrt(2), 2e-3)]


def gate_fit_lambda():
    times = uniform_grid(300, 300)
    data = infidelity_law(times, 0.01, 0.17)
    fit = fit_lambda(times, data, 0.17)
    return [_exact_gate("fit_lambda_synthetic", fit.strength, 0.01, tol=1e-6)]


def gate_variation_distance():
    return [_exact_gate("variation_distance", variation_distance([0.5, 0.5], [0.75, 0.25]), 0.25, tol=1e-15)]


def run_validate(seed=1234, goe_sampler=goe_matrix, quick=False):
    """Run every gate; ``quick`` trims the large Monte-Carlo sample counts."""
    root = SeedSpec(int(seed), (7,))
    scale = 10 if quick else 1
    gates = []
    gates += gate_haar_moments(root.child(0), n=100_000 // scale)
    gates += gate_haar_ipr(root.child(1), n=10_000 // scale * (2 if quick else 1))
    gates += gate_purity_closed_forms()
    gates += gate_static(root.child(2))
    gates += gate_mixed(root.child(3), n=10_000 // (2 if quick else 1))
    gates += gate_goe_f(root.child(4), n=100_000 // scale, sampler=goe_sampler)
    gates += gate_first_order_diagonal(root.child(5))
    gates += gate_long_time()
    gates += gate_haar_plateau_identity(root.child(6))
    gates += gate_diag_purity_commuting()
    gates += gate_cumulative_sine()
    gates += gate_fit_lambda()
    gates += gate_variation_distance()
    return ValidationReport(gates)

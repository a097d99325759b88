"""Execute scenario configs and turn the results into CSV tables."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dynamics import GAP_COLLISION_TOL, fit_lambda, run_ensemble, spectral_flags, uniform_grid
from ..ensembles import PerturbationModel, SeedSpec, StateEnsemble
from ..exceptions import ConfigError, DegenerateSpectrumWarning
from ..metrics import build_report
from ..spins import LmgParams, SpinSystem, TimParams, lmg_hamiltonian, observable_family, stretched_state, tim_hamiltonian
from ..static import haar_average_delta_sq, mixed_relative_error_mc, relative_delta
from .config import ScenarioConfig, validate_config
from .tables import AGGREGATE_STATE, Manifest, ResultTable

# stream roots under the master seed
STATE_STREAM = 0
PERTURBATION_STREAM = 1
STATIC_STREAM = 2
GRID_TOLERANCE = 0.005
ROW_TARGET = 1000


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    tables: list
    manifest: Manifest
    summary: dict = field(default_factory=dict)

    def table(self, name):
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def write(self, directory=None):
        out = Path(directory or self.config.output_dir or Path("out") / self.config.scenario_id)
        paths = [t.write(out) for t in self.tables]
        paths.append(self.manifest.write(out))
        return paths


def build_system(cfg):
    return SpinSystem(cfg.particles, cfg.representation)


def build_hamiltonian(cfg, system=None):
    system = system or build_system(cfg)
    if cfg.model == "lmg":
        return lmg_hamiltonian(LmgParams(cfg.particles, cfg.field * cfg.coupling, cfg.coupling), system)
    return tim_hamiltonian(TimParams(cfg.particles, cfg.field * cfg.coupling, cfg.coupling))


def build_observables(cfg, system, hamiltonian=None):
    reports = []
    for spec in cfg.observables:
        try:
            op = observable_family(spec.kind, system, **spec.params)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc), field=f"observables.{spec.label}") from None
        reports.append(build_report(op, hamiltonian, spec.label))
    return reports


def build_states(cfg, system):
    if cfg.state_kind == "product":
        return [stretched_state(system, cfg.state_axis, cfg.state_sign)]
    ensemble = StateEnsemble(cfg.state_kind, cfg.state_count)
    return ensemble.sample(SeedSpec(cfg.seed, (STATE_STREAM,)), system)


def build_perturbation(cfg):
    return PerturbationModel(cfg.perturbation, cfg.strength, cfg.distribution, cfg.scale)


def _stride(cfg):
    if cfg.output_stride > 1:
        return cfg.output_stride
    return max(1, cfg.n_steps // ROW_TARGET)


def run_scenario(cfg, threads=1):
    """Run one scenario; returns tables in a fixed order plus a manifest."""
    validate_config(cfg)
    manifest = Manifest(cfg.scenario_id)
    start = time.perf_counter()
    if cfg.kind == "dynamics":
        result = _run_dynamics(cfg, manifest, threads)
    elif cfg.kind == "static":
        result = _run_static(cfg, manifest)
    else:
        result = _run_purity(cfg, manifest)
    manifest.timing["total"] = time.perf_counter() - start
    return result


def _provenance(cfg, state_index=AGGREGATE_STATE, instances=None):
    return {
        "scenario_id": cfg.scenario_id,
        "master_seed": cfg.seed,
        "state_index": state_index,
        "n_instances": cfg.instances if instances is None else instances,
    }


def _run_dynamics(cfg, manifest, threads):
    system = build_system(cfg)
    H = build_hamiltonian(cfg, system)
    reports = build_observables(cfg, system, H)
    states = build_states(cfg, system)
    model = build_perturbation(cfg)
    times = uniform_grid(cfg.t_max * 1.0, cfg.n_steps)
    flags = spectral_flags(H, cfg.t_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpectrumWarning)
        run = run_ensemble(H, states, model, times, reports, cfg.instances, SeedSpec(cfg.seed, (PERTURBATION_STREAM,)),
                           system=system, workers=max(1, int(threads or 1)),
                           keep_series=cfg.per_state_series or len(states) == 1)
    stride = _stride(cfg)
    idx = np.arange(0, times.size, stride)
    if idx[-1] != times.size - 1:
        idx = np.append(idx, times.size - 1)

    cumulative = ResultTable("cumulative", [
        "observable", "purity", "diag_purity", "time", "cumulative_rel", "cumulative_rel_stderr",
        "prediction_long_time", "prediction_finite_time", "f"])
    summary = ResultTable("summary", [
        "observable", "description", "dim", "purity", "diag_purity", "modified_purity", "haar_mean", "n_states",
        "t_max", "plateau", "plateau_stderr", "prediction_long_time", "zscore_long_time",
        "prediction_finite_time", "zscore_finite_time", "prediction_single_state", "grid_change",
        "grid_converged", "degenerate", "gap_collision", "gaps_resolved", "approximate"])
    described = {o.label: o.describe() for o in cfg.observables}
    plateaus = {}
    for report in reports:
        res = run[report.label]
        rel, err, pred_t = res.relative, res.relative_stderr, res.finite_time_prediction
        for k in idx:
            cumulative.add(**_provenance(cfg), observable=report.label, purity=report.purity,
                           diag_purity=report.diag_purity, time=times[k], cumulative_rel=rel[k],
                           cumulative_rel_stderr=err[k], prediction_long_time=res.asymptotic_haar,
                           prediction_finite_time=pred_t[k], f=res.f_grid[k])
        se = res.plateau_stderr
        z_long = (res.plateau - res.asymptotic_haar) / se if se > 0 else 0.0
        z_fin = (res.plateau - pred_t[-1]) / se if se > 0 else 0.0
        change = res.grid_change
        summary.add(**_provenance(cfg), observable=report.label, description=described[report.label],
                    dim=report.dim, purity=report.purity, diag_purity=report.diag_purity,
                    modified_purity=report.modified_purity, haar_mean=report.haar_mean, n_states=len(states),
                    t_max=cfg.t_max, plateau=res.plateau, plateau_stderr=se,
                    prediction_long_time=res.asymptotic_haar, zscore_long_time=z_long,
                    prediction_finite_time=pred_t[-1], zscore_finite_time=z_fin,
                    prediction_single_state=res.single_state_prediction, grid_change=change,
                    grid_converged=change < GRID_TOLERANCE, degenerate=flags["degenerate"],
                    gap_collision=flags["gap_collision"], gaps_resolved=flags["resolved"],
                    approximate=res.approximate)
        plateaus[report.label] = (report.purity, report.modified_purity, res.plateau, se, res.asymptotic_haar,
                                  pred_t[-1])
        if change >= GRID_TOLERANCE:
            manifest.note(f"{report.label}: halving the time step changes E(t_max) by {change:.2%}; refine the grid")
    tables = [summary, cumulative]

    infid = ResultTable("infidelity", ["time", "infidelity", "infidelity_stderr", "analytic", "s0"])
    for s in range(len(states)):
        law = (1 - run.f_grid) * (1 - run.s0[s])
        for k in idx:
            infid.add(**_provenance(cfg, s), time=times[k], infidelity=run.infidelity[s, k],
                      infidelity_stderr=run.infidelity_stderr[s, k], analytic=law[k], s0=run.s0[s])
    tables.append(infid)

    if len(states) == 1 or cfg.per_state_series:
        series = ResultTable("series", ["observable", "time", "delta", "delta_stderr", "analytic_delta",
                                        "cumulative", "cumulative_rel", "asymptotic_single", "asymptotic_haar"])
        for report in reports:
            for s, row in enumerate(run[report.label].per_state):
                for k in idx:
                    series.add(**_provenance(cfg, s), observable=report.label, time=times[k], delta=row.delta[k],
                               delta_stderr=row.delta_stderr[k], analytic_delta=row.analytic_delta[k],
                               cumulative=row.cumulative[k], cumulative_rel=row.cumulative_rel[k],
                               asymptotic_single=row.asymptotic_single, asymptotic_haar=row.asymptotic_haar)
        tables.append(series)
        manifest.describe("series", "time [1/coupling]", "delta, cumulative",
                          "per-state error series; state_index identifies the initial state")

    if len(states) == 1 and cfg.perturbation == "goe":
        fit = fit_lambda(times, run.infidelity[0], run.s0[0])
        lam = ResultTable("lambda_fit", ["lambda_true", "lambda_fit", "residual", "s0", "note"])
        lam.add(**_provenance(cfg, 0), lambda_true=cfg.strength, lambda_fit=fit.strength, residual=fit.residual,
                s0=run.s0[0], note=fit.note or "ok")
        tables.append(lam)
        manifest.describe("lambda_fit", "-", "lambda", "least-squares fit of the GOE infidelity law")

    manifest.describe("summary", "observable", "plateau of the relative cumulative error",
                      "long-time and finite-time predictions with z-scores")
    manifest.describe("cumulative", "time [1/coupling]", "cumulative_rel",
                      "state-averaged relative cumulative error, state_index=-1")
    manifest.describe("infidelity", "time [1/coupling]", "infidelity", "exact mean over instances and analytic law")
    if cfg.t_max > 300 and cfg.model == "lmg":
        manifest.note("evolution horizon is longer than the roughly 300/coupling of the reference traces, "
                      "so the plateaus settle")
    if flags["gap_collision"]:
        manifest.note(f"spectrum has a degeneracy or gap collision below {GAP_COLLISION_TOL:g}; "
                      "long-time formulas are reported but not asserted")
    if model.is_approximate:
        manifest.note("local-field diagonal elements are correlated; first-order predictions are approximate")
    return ScenarioResult(cfg, tables, manifest, {"plateaus": plateaus, "flags": flags, "run": run})


def _run_static(cfg, manifest):
    system = build_system(cfg)
    reports = build_observables(cfg, system)
    seed = SeedSpec(cfg.seed, (STATIC_STREAM,))
    table = ResultTable("static", [
        "observable", "particles", "dim", "gamma", "purity", "empirical_mean", "empirical_stderr",
        "analytic_value", "mean_delta", "mean_delta_stderr", "relative_analytic", "relative_empirical"])
    for j, report in enumerate(reports):
        est = haar_average_delta_sq(report.shifted, cfg.gamma, cfg.samples, seed.child(j))
        table.add(**_provenance(cfg, instances=cfg.samples), observable=report.label, particles=cfg.particles,
                  dim=report.dim, gamma=cfg.gamma, purity=report.purity, empirical_mean=est.mean,
                  empirical_stderr=est.stderr, analytic_value=est.analytic, mean_delta=est.mean_delta,
                  mean_delta_stderr=est.mean_delta_stderr, relative_analytic=relative_delta(report.original, cfg.gamma),
                  relative_empirical=float(np.sqrt(est.mean)) / report.haar_mean)
    tables = [table]
    manifest.describe("static", "observable", "mean delta^2", "Haar Monte-Carlo against the closed form")
    if cfg.mixed_kind:
        mixed = ResultTable("mixed", ["observable", "dim", "gamma", "kind", "relative_empirical",
                                      "relative_stderr", "relative_analytic"])
        for j, report in enumerate(reports):
            est = mixed_relative_error_mc(report.original, cfg.gamma, cfg.samples, seed.child(len(reports) + j),
                                          cfg.mixed_kind)
            mixed.add(**_provenance(cfg, instances=cfg.samples), observable=report.label, dim=report.dim,
                      gamma=cfg.gamma, kind=cfg.mixed_kind, relative_empirical=est.value,
                      relative_stderr=est.stderr, relative_analytic=est.analytic)
        tables.append(mixed)
        manifest.describe("mixed", "observable", "relative error", f"{cfg.mixed_kind} noise")
    return ScenarioResult(cfg, tables, manifest)


def _run_purity(cfg, manifest):
    system = build_system(cfg)
    H = build_hamiltonian(cfg, system)
    table = ResultTable("purity", ["observable", "description", "representation", "dim", "purity",
                                   "diag_purity", "modified_purity"])
    specs = cfg.observables
    for spec in specs:
        for representation in _purity_representations(cfg, spec):
            sysr = SpinSystem(cfg.particles, representation)
            Hr = H if representation == cfg.representation else build_hamiltonian(cfg, sysr)
            op = observable_family(spec.kind, sysr, **spec.params)
            report = build_report(op, Hr, spec.label)
            table.add(**_provenance(cfg, instances=0), observable=spec.label, description=spec.describe(),
                      representation=representation, dim=report.dim, purity=report.purity,
                      diag_purity=report.diag_purity, modified_purity=report.modified_purity)
    manifest.describe("purity", "observable", "purity", "observable purity and Hamiltonian-dependent diagonal purity")
    return ScenarioResult(cfg, [table], manifest)


def _purity_representations(cfg, spec):
    reps = [cfg.representation]
    # collective-spin powers are reported in both representations when the full space is small enough
    if spec.kind == "spin-power" and cfg.model == "lmg" and cfg.particles <= 12:
        reps.append("full" if cfg.representation == "symmetric" else "symmetric")
    return reps


@dataclass
class SweepResult:
    config: ScenarioConfig
    tables: list
    manifest: Manifest
    failures: list
    points: list

    def write(self, directory=None):
        out = Path(directory or self.config.output_dir or Path("out") / self.config.scenario_id)
        paths = [t.write(out) for t in self.tables]
        paths.append(self.manifest.write(out))
        return paths


def run_sweep(cfg, threads=1):
    """Run ``cfg`` once per value of its sweep parameter.

    Points that fail are recorded in a ``sweep_failures`` table and the sweep
    carries on; per-point wall-clock times go to the manifest.
    """
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] section", field="sweep")
    values = cfg.sweep.values
    if len(values) > cfg.sweep.budget:
        raise ConfigError(f"grid has {len(values)} points, budget is {cfg.sweep.budget}", field="sweep.budget")
    manifest = Manifest(cfg.scenario_id)
    merged = {}
    failures = ResultTable("sweep_failures", ["sweep_parameter", "sweep_value", "error"])
    points = []
    if not values:
        warnings.warn("empty sweep grid; nothing to run", UserWarning, stacklevel=2)
        manifest.note("empty sweep grid")
    start = time.perf_counter()
    for value in values:
        t0 = time.perf_counter()
        extra = {"sweep_parameter": cfg.sweep.parameter, "sweep_value": value}
        try:
            point_cfg = cfg.override(cfg.sweep.parameter, value)
            result = run_scenario(point_cfg, threads)
        except Exception as exc:  # isolate the point, keep sweeping
            failures.add(**_provenance(cfg, instances=cfg.instances), sweep_parameter=cfg.sweep.parameter,
                         sweep_value=value, error=f"{type(exc).__name__}: {exc}")
            manifest.note(f"point {cfg.sweep.parameter}={value} failed: {type(exc).__name__}: {exc}")
            continue
        finally:
            manifest.timing[f"{cfg.sweep.parameter}={value}"] = time.perf_counter() - t0
        points.append((value, result))
        for table in result.tables:
            if table.name not in merged:
                merged[table.name] = ResultTable(table.name, table.columns + list(extra))
            merged[table.name].extend(table, **extra)
        for entry in result.manifest.entries:
            if entry not in manifest.entries:
                manifest.entries.append(entry)
        for text in result.manifest.notes:
            manifest.note(f"{cfg.sweep.parameter}={value}: {text}")
    manifest.timing["total"] = time.perf_counter() - start
    tables = list(merged.values()) + [failures]
    return SweepResult(cfg, tables, manifest, failures.rows, points)

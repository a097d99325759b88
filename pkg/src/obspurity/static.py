"""Static error model: an ideal pure state against a perturbed one, averaged
over Haar-random states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import SeedSpec, _rng, haar_state_batch, haar_unitaries
from .exceptions import DimensionError
from .metrics import observable_purity, shift_spectrum
from .operators import PureState, expectation, expectation_series

DEFAULT_GAMMA = 0.2


@dataclass(frozen=True)
class PerturbedStatePair:
    """|psi_sim> = N(gamma) (|psi> + gamma |psi_perp>) with <psi|psi_perp> = 0."""

    ideal: PureState
    companion: PureState
    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.ideal.dim != self.companion.dim:
            raise DimensionError("ideal and companion states differ in dimension")
        if abs(self.ideal.overlap(self.companion)) > 1e-12:
            raise ValueError("companion state is not orthogonal to the ideal state")

    @property
    def normalizer(self):
        return 1.0 / np.sqrt(1.0 + self.gamma**2)

    @property
    def simulated(self):
        v = self.normalizer * (self.ideal.amplitudes + self.gamma * self.companion.amplitudes)
        return PureState.normalized(v)


def delta(A, pair):
    """<psi|A|psi> - <psi_sim|A|psi_sim>."""
    if A.dim != pair.ideal.dim:
        raise DimensionError(f"dimension mismatch: {A.dim} vs {pair.ideal.dim}")
    return expectation(A, pair.ideal) - expectation(A, pair.simulated)


def delta_expanded(A, pair):
    """The same error written through <A>, <A>_perp and Re<psi_perp|A|psi>."""
    g = pair.gamma
    a = pair.ideal.amplitudes
    b = pair.companion.amplitudes
    m = A.matrix
    diff = np.vdot(a, m @ a).real - np.vdot(b, m @ b).real
    cross = np.vdot(b, m @ a).real
    return (g**2 * diff - 2 * g * cross) / (1 + g**2)


def _delta_batch(m, psi, perp, gamma):
    """Vectorized delta over rows of ``psi`` and ``perp``."""
    n2 = 1.0 / (1.0 + gamma**2)
    mp = psi @ m.T
    mq = perp @ m.T
    a = np.einsum("si,si->s", psi.conj(), mp).real
    b = np.einsum("si,si->s", perp.conj(), mq).real
    cross = np.einsum("si,si->s", perp.conj(), mp).real
    return n2 * (gamma**2 * (a - b) - 2 * gamma * cross)


def analytic_delta_sq(A, gamma):
    """Haar average of delta(A)^2:
    2 gamma^2 N^2 / (d^2 - 1) * (Tr A^2 - (Tr A)^2 / d).
    """
    d = A.dim
    m = A.matrix
    tr = np.trace(m).real
    tr2 = np.sum(np.abs(m) ** 2)
    return float(2 * gamma**2 / (1 + gamma**2) / (d**2 - 1) * (tr2 - tr**2 / d))


def relative_delta(A, gamma):
    """sqrt(2 d^2/(d^2 - 1) * gamma^2/(1 + gamma^2) * (eta(A) - 1/d))."""
    d = A.dim
    eta = observable_purity(A)
    return float(np.sqrt(2 * d**2 / (d**2 - 1) * gamma**2 / (1 + gamma**2) * max(eta - 1 / d, 0.0)))


@dataclass(frozen=True)
class StaticEstimate:
    mean: float
    stderr: float
    analytic: float
    mean_delta: float
    mean_delta_stderr: float
    n_samples: int

    @property
    def zscore(self):
        return (self.mean - self.analytic) / self.stderr if self.stderr > 0 else 0.0


def _haar_pairs(seed, d, n_samples):
    """psi = U|a_0>, psi_perp = U|a_1> for Haar U, batched."""
    u = haar_unitaries(seed, d, n_samples)
    return u[:, :, 0], u[:, :, 1]


def static_samples(A, gamma, n_samples, seed):
    """Per-draw delta(A) values for jointly Haar-random (psi, psi_perp)."""
    if A.dim < 2:
        raise ValueError("need d >= 2")
    psi, perp = _haar_pairs(seed, A.dim, n_samples)
    return _delta_batch(A.matrix, psi, perp, gamma)


def haar_average_delta_sq(A, gamma, n_samples, seed):
    """Monte-Carlo mean of delta(A)^2 with its standard error and the closed form."""
    if n_samples < 100:
        raise ValueError("use at least 100 samples")
    deltas = static_samples(A, gamma, n_samples, seed)
    sq = deltas**2
    return StaticEstimate(
        mean=float(sq.mean()),
        stderr=float(sq.std(ddof=1) / np.sqrt(n_samples)),
        analytic=analytic_delta_sq(A, gamma),
        mean_delta=float(deltas.mean()),
        mean_delta_stderr=float(deltas.std(ddof=1) / np.sqrt(n_samples)),
        n_samples=n_samples,
    )


@dataclass(frozen=True)
class MixedNoiseSpec:
    """``depolarizing``: (1-g)|psi><psi| + g I/d.
    ``orthogonal-mixture``: (1-g)|psi><psi| + g |psi_perp><psi_perp|.
    """

    kind: str
    gamma: float

    def __post_init__(self):
        if self.kind not in ("depolarizing", "orthogonal-mixture"):
            raise ValueError(f"unknown mixed noise model {self.kind!r}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    def density(self, psi, companion=None):
        a = psi.amplitudes
        rho = (1 - self.gamma) * np.outer(a, a.conj())
        if self.kind == "depolarizing":
            return rho + self.gamma * np.eye(psi.dim) / psi.dim
        if companion is None:
            raise ValueError("orthogonal-mixture noise needs the companion state")
        b = companion.amplitudes
        return rho + self.gamma * np.outer(b, b.conj())


def mixed_delta(A, psi, spec, companion=None):
    """<A> - Tr(rho_sim A) for the chosen mixed-state noise model."""
    rho = spec.density(psi, companion)
    return expectation(A, psi) - float(np.real(np.sum(rho.T * A.matrix)))


def mixed_relative_error(A, gamma, kind="depolarizing"):
    """Closed-form Haar-averaged relative error for mixed-state noise.

    depolarizing: sqrt(d/(d+1) gamma^2 (eta - 1/d));
    orthogonal-mixture: sqrt(2 d^2/(d^2-1) gamma^2 (eta - 1/d)).
    """
    MixedNoiseSpec(kind, gamma)
    d = A.dim
    excess = max(observable_purity(A) - 1 / d, 0.0)
    if kind == "depolarizing":
        return float(np.sqrt(d / (d + 1) * gamma**2 * excess))
    return float(np.sqrt(2 * d**2 / (d**2 - 1) * gamma**2 * excess))


@dataclass(frozen=True)
class RelativeEstimate:
    value: float
    stderr: float
    analytic: float
    n_samples: int

    @property
    def zscore(self):
        return (self.value - self.analytic) / self.stderr if self.stderr > 0 else 0.0


def mixed_relative_error_mc(A, gamma, n_samples, seed, kind="depolarizing"):
    """Monte-Carlo relative error sqrt(mean delta^2) / (Tr A_s / d).

    The standard error follows from the delta method on the mean of delta^2.
    """
    MixedNoiseSpec(kind, gamma)
    shifted, _, _ = shift_spectrum(A)
    d = A.dim
    m = shifted.matrix
    if kind == "depolarizing":
        psi = haar_state_batch(seed, d, n_samples)
        exp_a = expectation_series(shifted, psi)
        deltas = gamma * (exp_a - np.trace(m).real / d)
    else:
        psi, perp = _haar_pairs(seed, d, n_samples)
        deltas = gamma * (expectation_series(shifted, psi) - expectation_series(shifted, perp))
    return _relative(deltas**2, np.trace(m).real / d, mixed_relative_error(A, gamma, kind))


def _relative(sq, mean_expectation, analytic):
    n = sq.size
    msq = sq.mean()
    se_sq = sq.std(ddof=1) / np.sqrt(n)
    value = np.sqrt(msq) / mean_expectation
    stderr = se_sq / (2 * np.sqrt(msq)) / mean_expectation if msq > 0 else 0.0
    return RelativeEstimate(float(value), float(stderr), float(analytic), n)


@dataclass(frozen=True)
class VarianceRow:
    label: str
    n: int
    dim: int
    gamma: float
    mean_rel_sq: float
    mean_rel_sq_stderr: float
    std_rel_sq: float
    analytic_rel_sq: float
    purity: float


def variance_study(observables, gamma, n_samples, seed):
    """Mean and spread of delta_rel(A)^2 = delta(A)^2 / (Tr A_s/d)^2 over Haar draws.

    ``observables`` maps ``(label, N)`` to an operator; each entry is sampled
    from its own stream so rows can be recomputed independently.
    """
    if n_samples < 1000:
        raise ValueError("variance study needs at least 1000 samples")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    rows = []
    for i, ((label, n), A) in enumerate(observables.items()):
        shifted, values, _ = shift_spectrum(A)
        d = A.dim
        mean_exp = np.trace(shifted.matrix).real / d
        deltas = static_samples(shifted, gamma, n_samples, seed.child(i))
        rel_sq = deltas**2 / mean_exp**2
        rows.append(
            VarianceRow(
                label=label,
                n=n,
                dim=d,
                gamma=gamma,
                mean_rel_sq=float(rel_sq.mean()),
                mean_rel_sq_stderr=float(rel_sq.std(ddof=1) / np.sqrt(n_samples)),
                std_rel_sq=float(rel_sq.std(ddof=1)),
                analytic_rel_sq=relative_delta(A, gamma) ** 2,
                purity=float(np.sum(values**2) / np.sum(values) ** 2),
            )
        )
    return rows


def draw_pair(seed, d, gamma):
    """One jointly Haar-random PerturbedStatePair."""
    u = haar_unitaries(_rng(seed), d, 1)[0]
    return PerturbedStatePair(PureState(u[:, 0]), PureState(u[:, 1]), gamma)

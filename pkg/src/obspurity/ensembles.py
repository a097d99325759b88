"""Seeded random sources: Haar states and unitaries, spin-coherent and Dicke
states, GOE and local-field perturbations, and the characteristic function
f(tau) = |g(tau)|^2 of the diagonal perturbation elements.

Seeding is counter based: a generator is a pure function of
``(master_seed, stream_path)``, so samples do not depend on the order or the
thread in which they are drawn.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError
from .operators import HermitianOperator, PureState, evolve
from .spins import PAULI, SpinSystem, _site_operator, collective_spin, stretched_state

MIN_EMPIRICAL_SAMPLES = 100_000


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_path: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master seed must be a 64-bit unsigned integer")
        path = tuple(int(p) for p in self.stream_path)
        if any(p < 0 for p in path):
            raise ValueError("stream path entries must be non-negative")
        object.__setattr__(self, "stream_path", path)

    def child(self, *indices):
        return SeedSpec(self.master_seed, self.stream_path + tuple(indices))

    def generator(self):
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=self.stream_path)
        return np.random.Generator(np.random.PCG64(seq))


def _rng(seed):
    if isinstance(seed, SeedSpec):
        return seed.generator()
    if isinstance(seed, np.random.Generator):
        return seed
    return SeedSpec(int(seed)).generator()


def _ginibre(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def haar_unitaries(seed, d, count):
    """``count`` Haar-random d x d unitaries, shape ``(count, d, d)``.

    Ginibre draw followed by QR, with the phases of diag(R) moved into Q.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    z = _ginibre(_rng(seed), (count, d, d))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[:, np.newaxis, :]


def haar_unitary(seed, d):
    return haar_unitaries(seed, d, 1)[0]


def haar_state(seed, d):
    """Haar-random pure state: a normalized complex Gaussian vector.

    This is distributed as one column of a Haar unitary.
    """
    if d < 2:
        raise ValueError("Haar states need d >= 2")
    return PureState.normalized(_ginibre(_rng(seed), d))


def haar_state_batch(seed, d, count):
    """``count`` Haar states as rows of a ``(count, d)`` array."""
    z = _ginibre(_rng(seed), (count, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def orthogonal_companion(psi, seed):
    """Haar-random unit vector orthogonal to ``psi``."""
    if psi.dim < 2:
        raise ValueError("an orthogonal companion needs d >= 2")
    rng = _rng(seed)
    a = psi.amplitudes
    v = _ginibre(rng, psi.dim)
    for _ in range(2):  # second pass removes the rounding left by the first
        v = v - a * np.vdot(a, v)
    return PureState.normalized(v)


def random_rotation(seed):
    """Uniform rotation on SO(3) as (unit axis, angle) via a random unit quaternion."""
    q = _rng(seed).standard_normal(4)
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    angle = 2 * np.arccos(np.clip(q[0], -1.0, 1.0))
    s = np.linalg.norm(q[1:])
    axis = q[1:] / s if s > 0 else np.array([0.0, 0.0, 1.0])
    return axis, angle


def spin_coherent_state(seed, system):
    """exp(-i theta n.S) |up_x>^N with (n, theta) uniform on the rotation group."""
    if system.is_full:
        raise ValueError("spin-coherent sampling works in the symmetric subspace")
    axis, angle = random_rotation(seed)
    generator = sum(
        (float(c) * collective_spin(system, a) for c, a in zip(axis, "xyz")),
        HermitianOperator.identity(system.dim) * 0.0,
    )
    return evolve(generator, stretched_state(system, "x", +1), angle)


def dicke_state(seed, system):
    """Uniformly chosen S_z eigenstate of the symmetric subspace."""
    if system.is_full:
        raise ValueError("Dicke sampling works in the symmetric subspace")
    index = int(_rng(seed).integers(system.dim))
    return PureState.basis(system.dim, index)


@dataclass(frozen=True)
class StateEnsemble:
    """Source of initial states: ``haar``, ``spin-coherent`` or ``dicke``."""

    kind: str
    count: int

    def __post_init__(self):
        if self.kind not in ("haar", "spin-coherent", "dicke"):
            raise ValueError(f"unknown state ensemble {self.kind!r}")
        if self.count < 1:
            raise ValueError("ensemble needs at least one state")

    def sample(self, seed, system_or_dim):
        """The ``index``-th state comes from stream ``seed.child(index)``."""
        seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
        out = []
        for i in range(self.count):
            s = seed.child(i)
            if self.kind == "haar":
                d = system_or_dim.dim if isinstance(system_or_dim, SpinSystem) else int(system_or_dim)
                out.append(haar_state(s, d))
            elif self.kind == "spin-coherent":
                out.append(spin_coherent_state(s, system_or_dim))
            else:
                out.append(dicke_state(s, system_or_dim))
        return out


GOE = "goe"
LOCAL_FIELDS = "local-fields"
DIAGONAL = "diagonal"


@dataclass(frozen=True)
class PerturbationModel:
    """Random Hermitian V with strength ``strength`` (lambda).

    ``goe``: real symmetric, V_kk ~ N(0, 1), V_kl ~ N(0, 1/2).
    ``local-fields``: V = (1/2) sum_j v_j sigma_x^(j), v_j ~ N(0, 1).
    ``diagonal``: V = sum_k x_k |u_k><u_k| in the eigenbasis of the ideal
    Hamiltonian, x_k iid from ``distribution`` (``normal`` or ``uniform``,
    with ``scale`` the standard deviation or half-width).
    """

    kind: str
    strength: float
    distribution: str = "normal"
    scale: float = 1.0
    sampler: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in (GOE, LOCAL_FIELDS, DIAGONAL):
            raise ValueError(f"unknown perturbation model {self.kind!r}")
        if not self.strength >= 0:
            raise ValueError("perturbation strength must be >= 0")

    @property
    def is_approximate(self):
        """True when diagonal elements in the H eigenbasis are correlated."""
        return self.kind == LOCAL_FIELDS


def goe_matrix(rng, d):
    g = rng.standard_normal((d, d))
    return (g + g.T) / 2


def sample_perturbation(model, seed, system_or_dim, hamiltonian=None):
    """One draw of V (without the strength factor)."""
    rng = _rng(seed)
    if model.kind == GOE:
        d = system_or_dim.dim if isinstance(system_or_dim, SpinSystem) else int(system_or_dim)
        return HermitianOperator(goe_matrix(rng, d))
    if model.kind == LOCAL_FIELDS:
        if not (isinstance(system_or_dim, SpinSystem) and system_or_dim.is_full):
            raise DimensionError("local-field perturbations need a full-space spin system")
        n = system_or_dim.n
        fields = rng.standard_normal(n)
        return HermitianOperator(
            sum(0.5 * v * _site_operator(n, j, PAULI["x"]) for j, v in zip(range(1, n + 1), fields))
        )
    if hamiltonian is None:
        raise ValueError("diagonal perturbations are defined in the Hamiltonian eigenbasis; pass hamiltonian")
    x = _diagonal_draw(model, rng, hamiltonian.dim)
    u = hamiltonian.eigenvectors
    return HermitianOperator((u * x) @ u.conj().T)


def _diagonal_draw(model, rng, size):
    if model.sampler is not None:
        return np.asarray(model.sampler(rng, size), dtype=float)
    if model.distribution == "normal":
        return model.scale * rng.standard_normal(size)
    if model.distribution == "uniform":
        return rng.uniform(-model.scale, model.scale, size)
    raise ValueError(f"unknown diagonal distribution {model.distribution!r}")


@dataclass(frozen=True)
class EmpiricalF:
    tau: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    n_samples: int


def characteristic_f(model, tau, hamiltonian=None, seed=None, n_samples=MIN_EMPIRICAL_SAMPLES):
    """f(tau) = E[exp(-i (V_ll - V_mm) tau)], l != m, in the H eigenbasis.

    Closed forms: GOE exp(-tau^2); diagonal normal exp(-(scale tau)^2);
    diagonal uniform sinc(scale tau)^2. Local fields and custom samplers use
    a Monte-Carlo estimate; see :func:`empirical_f`.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    if model.kind == GOE:
        return np.exp(-(tau**2))
    if model.kind == DIAGONAL and model.sampler is None:
        if model.distribution == "normal":
            return np.exp(-((model.scale * tau) ** 2))
        if model.distribution == "uniform":
            return np.sinc(model.scale * tau / np.pi) ** 2
    if hamiltonian is None:
        raise ValueError(f"{model.kind} needs the Hamiltonian to estimate f(tau)")
    return empirical_f(model, tau, hamiltonian, seed if seed is not None else SeedSpec(0), n_samples).value


def perturbation_diagonals(model, seed, system_or_dim, hamiltonian, n_samples):
    """Samples of (V_nn) in the eigenbasis of ``hamiltonian``, shape (n_samples, d)."""
    rng = _rng(seed)
    d = hamiltonian.dim
    u = hamiltonian.eigenvectors
    if model.kind == LOCAL_FIELDS:
        n = system_or_dim.n
        # V_nn is linear in the fields: V_nn = (1/2) sum_j v_j <u_n|X_j|u_n>
        x_diag = np.array(
            [np.einsum("in,ij,jn->n", u.conj(), _site_operator(n, j, PAULI["x"]), u).real for j in range(1, n + 1)]
        )
        return 0.5 * rng.standard_normal((n_samples, n)) @ x_diag
    if model.kind == DIAGONAL:
        return np.array([_diagonal_draw(model, rng, d) for _ in range(n_samples)])
    out = np.empty((n_samples, d))
    for i in range(n_samples):
        v = goe_matrix(rng, d)
        out[i] = np.einsum("in,ij,jn->n", u.conj(), v, u).real
    return out


def empirical_f(model, tau, hamiltonian, seed, n_samples=MIN_EMPIRICAL_SAMPLES, system=None):
    """Monte-Carlo f(tau) averaged over all pairs l != m, with standard error.

    For one draw, the pair average of exp(-i (a_l - a_m) tau) is
    (|sum_n exp(-i a_n tau)|^2 - d) / (d (d - 1)).
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if system is None and model.kind == LOCAL_FIELDS:
        n = int(round(np.log2(hamiltonian.dim)))
        system = SpinSystem(n, "full")
    diags = perturbation_diagonals(model, seed, system, hamiltonian, n_samples)
    d = diags.shape[1]
    values = np.empty(tau.size)
    errors = np.empty(tau.size)
    for i, t in enumerate(tau):
        s = np.abs(np.exp(-1j * t * diags).sum(axis=1)) ** 2
        per_draw = (s - d) / (d * (d - 1))
        values[i] = per_draw.mean()
        errors[i] = per_draw.std(ddof=1) / np.sqrt(n_samples)
    return EmpiricalF(tau, values, errors, n_samples)

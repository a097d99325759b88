"""Collective-spin operators, the LMG and transverse Ising Hamiltonians, and
the observable families used to probe purity.

Conventions
-----------
* Symmetric subspace (``representation="symmetric"``, d = N + 1): basis
  ordered by descending S_z eigenvalue, m = N/2, N/2 - 1, ..., -N/2.
* Full space (``representation="full"``, d = 2**N): site 1 is the most
  significant tensor factor and |up> = (1, 0) is the sigma_z = +1 state.
  Site labels run 1..N, matching the usual chain notation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import comb

import numpy as np

from .exceptions import SizeGuardError
from .operators import HermitianOperator, PureState

MAX_FULL_SPINS = 14
MAX_SYMMETRIC_SPINS = 511

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class SpinSystem:
    n: int
    representation: str = "symmetric"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"particle count must be positive, got {self.n}")
        if self.representation == "symmetric":
            if self.n > MAX_SYMMETRIC_SPINS:
                raise SizeGuardError(f"symmetric subspace limited to N <= {MAX_SYMMETRIC_SPINS}, got {self.n}")
        elif self.representation == "full":
            if self.n > MAX_FULL_SPINS:
                raise SizeGuardError(f"full space limited to N <= {MAX_FULL_SPINS}, got {self.n}")
        else:
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def dim(self):
        return self.n + 1 if self.representation == "symmetric" else 2**self.n

    @property
    def spin(self):
        return self.n / 2

    @property
    def is_full(self):
        return self.representation == "full"


@dataclass(frozen=True)
class LmgParams:
    """H = -B S_z - (Lambda/N) S_x^2 with field B and coupling Lambda."""

    n: int
    field: float
    coupling: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("LMG needs N >= 2")
        if not self.coupling > 0:
            raise ValueError("LMG coupling must be positive")


@dataclass(frozen=True)
class TimParams:
    """Open chain H = -(h/2) sum sigma_x - (J/4) sum sigma_z sigma_z."""

    n: int
    field: float
    coupling: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("transverse Ising chain needs N >= 2")


def _check_axis(axis):
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}, got {axis!r}")


def _symmetric_spin_matrices(n):
    s = n / 2
    m = s - np.arange(n + 1)
    # <m+1|S_+|m> sits at [i, i+1] in the descending-m layout
    raising = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    sx = (raising + raising.T) / 2
    sy = (raising - raising.T) / 2j
    sz = np.diag(m).astype(complex)
    return {"x": sx, "y": sy, "z": sz}


def _site_operator(n, site, single):
    """Embed a 2x2 operator on ``site`` (1-based) of an n-spin chain."""
    left = np.eye(2 ** (site - 1))
    right = np.eye(2 ** (n - site))
    return np.kron(np.kron(left, single), right)


def collective_spin(system, axis):
    """S_axis = (1/2) sum_i sigma_axis^(i) in the chosen representation."""
    _check_axis(axis)
    if not system.is_full:
        return HermitianOperator(_symmetric_spin_matrices(system.n)[axis])
    n = system.n
    if axis == "z":
        # diagonal: (number of up spins - N/2)
        bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
        return HermitianOperator.from_diagonal(n / 2 - bits.sum(axis=1))
    total = sum(_site_operator(n, i, PAULI[axis] / 2) for i in range(1, n + 1))
    return HermitianOperator(total)


def total_spin_squared(system):
    s = [collective_spin(system, a).matrix for a in _AXES]
    return HermitianOperator(sum(x @ x for x in s))


def lmg_hamiltonian(params, system=None):
    """-B S_z - (Lambda/N) S_x^2. Defaults to the symmetric subspace."""
    system = system or SpinSystem(params.n)
    if system.n != params.n:
        raise ValueError(f"system has N={system.n}, parameters have N={params.n}")
    sz = collective_spin(system, "z").matrix
    sx = collective_spin(system, "x").matrix
    return HermitianOperator(-params.field * sz - (params.coupling / params.n) * (sx @ sx))


def lmg_pauli_sum(params):
    """Full-space LMG written directly as a sum of Pauli products (test oracle)."""
    n = params.n
    z = sum(_site_operator(n, i, PAULI["z"]) for i in range(1, n + 1))
    xs = [_site_operator(n, i, PAULI["x"]) for i in range(1, n + 1)]
    xx = sum(a @ b for a in xs for b in xs)
    return HermitianOperator(-params.field / 2 * z - params.coupling / (4 * n) * xx)


def tim_hamiltonian(params):
    n = params.n
    SpinSystem(n, "full")
    d = 2**n
    bits = (np.arange(d)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    zvals = 1 - 2 * bits  # sigma_z eigenvalue per site, site 1 first
    zz = np.sum(zvals[:, :-1] * zvals[:, 1:], axis=1)
    h = np.diag(-(params.coupling / 4) * zz).astype(complex)
    if params.field != 0:
        h = h - (params.field / 2) * sum(_site_operator(n, i, PAULI["x"]) for i in range(1, n + 1))
    return HermitianOperator(h)


def pauli_string(n, factors):
    """Tensor product of Pauli matrices on the given sites, identity elsewhere.

    ``factors`` is a mapping or sequence of ``(site, axis)`` pairs with
    1-based sites, e.g. ``[(3, "y"), (4, "y")]``.
    """
    items = list(factors.items()) if isinstance(factors, dict) else list(factors)
    SpinSystem(n, "full")
    sites = [s for s, _ in items]
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site in Pauli string: {sites}")
    on_site = {}
    for site, axis in items:
        _check_axis(axis)
        if not 1 <= site <= n:
            raise ValueError(f"site {site} outside 1..{n}")
        on_site[site] = PAULI[axis]
    factors_in_order = [on_site.get(i, np.eye(2, dtype=complex)) for i in range(1, n + 1)]
    return HermitianOperator(reduce(np.kron, factors_in_order))


def centered_sites(n, weight):
    """``weight`` consecutive sites around the chain centre, e.g. N=8, w=3 -> 3,4,5."""
    if not 1 <= weight <= n:
        raise ValueError(f"weight must be in 1..{n}")
    start = n // 2 - (weight - 1) // 2
    return list(range(start, start + weight))


def dicke_basis_index(system, m):
    """Index of the S_z = m basis vector in the symmetric layout."""
    idx = system.spin - m
    if abs(idx - round(idx)) > 1e-9 or not 0 <= round(idx) <= system.n:
        raise ValueError(f"m={m} is not in {{-N/2, ..., N/2}} for N={system.n}")
    return int(round(idx))


def stretched_state(system, axis="x", sign=+1):
    """Product state with every spin along +axis (sign=+1) or -axis."""
    _check_axis(axis)
    n = system.n
    single = {
        ("z", +1): np.array([1, 0]),
        ("z", -1): np.array([0, 1]),
        ("x", +1): np.array([1, 1]) / np.sqrt(2),
        ("x", -1): np.array([1, -1]) / np.sqrt(2),
        ("y", +1): np.array([1, 1j]) / np.sqrt(2),
        ("y", -1): np.array([1, -1j]) / np.sqrt(2),
    }[(axis, sign)].astype(complex)
    if system.is_full:
        return PureState(reduce(np.kron, [single] * n))
    # Dicke component with k down spins collects C(N, k) identical products
    k = np.arange(n + 1)
    binom = np.array([comb(n, int(j)) for j in k], dtype=float)
    amps = np.sqrt(binom) * single[0] ** (n - k) * single[1] ** k
    return PureState.normalized(amps)


def sx_projector(system, m):
    """|m_x><m_x|, the S_x eigenprojector with eigenvalue m (symmetric subspace)."""
    if system.is_full:
        raise ValueError("S_x eigenprojectors are defined in the symmetric subspace only")
    sx = collective_spin(system, "x")
    target = dicke_basis_index(system, m)
    # eigenvalues are ascending; m_x = -S first
    column = system.n - target
    vec = sx.eigenvectors[:, column]
    if abs(sx.eigenvalues[column] - m) > 1e-8:
        raise RuntimeError("S_x eigenvalue labelling failed")
    return HermitianOperator(np.outer(vec, vec.conj()))


def partition_projector(n, k):
    """|up...up><up...up| on the first k sites, identity on the remaining N - k."""
    if not 0 <= k <= n:
        raise ValueError(f"k must be in 0..{n}, got {k}")
    SpinSystem(n, "full")
    d = 2**n
    # first k sites are the k most significant bits; all up means those bits are 0
    diag = (np.arange(d) >> (n - k)) == 0 if k > 0 else np.ones(d, dtype=bool)
    return HermitianOperator.from_diagonal(diag.astype(float))


def observable_family(kind, system, **params):
    """Build a member of one of the observable families.

    kinds: ``spin-power`` (axis, power), ``sx-projector`` (m),
    ``partition-projector`` (k), ``pauli-weight`` (weight, axis, sites),
    ``pauli-string`` (factors).
    """
    if kind == "spin-power":
        axis = params.get("axis", "x")
        power = int(params.get("power", 1))
        if power < 1:
            raise ValueError("power must be >= 1")
        return collective_spin(system, axis).power(power)
    if kind == "sx-projector":
        return sx_projector(system, params["m"])
    if kind == "partition-projector":
        _require_full(system, kind)
        return partition_projector(system.n, int(params["k"]))
    if kind == "pauli-weight":
        _require_full(system, kind)
        weight = int(params["weight"])
        sites = params.get("sites") or centered_sites(system.n, weight)
        if len(sites) != weight:
            raise ValueError(f"{len(sites)} sites given for weight {weight}")
        axis = params.get("axis", "x")
        return pauli_string(system.n, [(s, axis) for s in sites])
    if kind == "pauli-string":
        _require_full(system, kind)
        return pauli_string(system.n, params["factors"])
    raise ValueError(f"unknown observable family {kind!r}")


def _require_full(system, kind):
    if not system.is_full:
        raise ValueError(f"{kind} observables need the full 2^N representation")


def tim_purity_observables(n=6):
    """The four observables of increasing purity used for the Ising chain.

    sigma_y on the middle site, sigma_y sigma_y on the two middle sites, the
    all-up projector on the first N - 1 sites, and the all-up projector.
    """
    mid = n // 2
    return {
        "A1": pauli_string(n, [(mid, "y")]),
        "A2": pauli_string(n, [(mid, "y"), (mid + 1, "y")]),
        "A3": partition_projector(n, n - 1),
        "A4": partition_projector(n, n),
    }

"""Dense Hermitian operators, pure states and unitary evolution.

Every generator in this package is Hermitian and the same Hamiltonian is
evolved to many times, so evolution goes through a cached spectral
decomposition: O(d^3) once, O(d^2) per time point.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import ConvergenceError, DimensionError, NonHermitianError, SizeGuardError

HERMITIAN_TOL = 1e-10
NORM_TOL = 1e-12
IMAG_TOL = 1e-8
# Largest dimension whose full eigendecomposition we attempt (N=12 spins).
MAX_EIG_DIM = 4096
# Components smaller than this never fix an eigenvector phase.
_PHASE_FLOOR = 1e-10


def _frozen(array):
    array.setflags(write=False)
    return array


def _check_finite(matrix, what):
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{what} contains NaN or Inf entries")


def _fix_phases(vectors):
    """Rotate each column so its first non-negligible entry is real positive."""
    first = np.argmax(np.abs(vectors) > _PHASE_FLOOR, axis=0)
    pivots = vectors[first, np.arange(vectors.shape[1])]
    phases = pivots / np.abs(pivots)
    return vectors / phases[np.newaxis, :]


class HermitianOperator:
    """Immutable dense Hermitian matrix with a lazily cached spectrum.

    The input is checked against its adjoint (max entry deviation at most
    ``HERMITIAN_TOL``) and then symmetrized exactly. Eigenvalues are
    ascending; each eigenvector has its first non-negligible component real
    and positive so decompositions are reproducible under degeneracy.
    """

    __slots__ = ("_matrix", "_eigenvalues", "_eigenvectors", "_is_diagonal")

    def __init__(self, matrix, *, tol=HERMITIAN_TOL):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
        _check_finite(m, "operator")
        deviation = float(np.max(np.abs(m - m.conj().T)))
        if deviation > tol:
            raise NonHermitianError(
                f"matrix is not Hermitian: max |A - A^dagger| entry is {deviation:.3e} (tolerance {tol:.0e})"
            )
        m = (m + m.conj().T) / 2
        self._matrix = _frozen(m)
        self._eigenvalues = None
        self._eigenvectors = None
        self._is_diagonal = None

    @classmethod
    def _trusted(cls, matrix, is_diagonal=None):
        """Wrap a matrix that is Hermitian by construction, skipping the checks."""
        op = cls.__new__(cls)
        op._matrix = _frozen(np.asarray(matrix, dtype=complex))
        op._eigenvalues = None
        op._eigenvectors = None
        op._is_diagonal = is_diagonal
        return op

    @classmethod
    def from_diagonal(cls, values):
        values = np.asarray(values)
        if np.iscomplexobj(values) and np.any(values.imag != 0):
            return cls(np.diag(values.astype(complex)))
        values = values.real.astype(float)
        _check_finite(values, "diagonal")
        return cls._trusted(np.diag(values).astype(complex), is_diagonal=True)

    @classmethod
    def identity(cls, dim):
        return cls._trusted(np.eye(dim, dtype=complex), is_diagonal=True)

    @property
    def matrix(self):
        return self._matrix

    @property
    def dim(self):
        return self._matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._matrix
        return self._matrix.astype(dtype)

    def __repr__(self):
        cached = "cached" if self._eigenvectors is not None else "lazy"
        return f"HermitianOperator(dim={self.dim}, spectrum={cached})"

    # Arithmetic closes over Hermitian operators and real scalars only.
    def __add__(self, other):
        if isinstance(other, HermitianOperator):
            _require_same_dim(self.dim, other.dim)
            return HermitianOperator._trusted(self._matrix + other._matrix)
        if np.isscalar(other) and np.isreal(other):
            c = float(np.real(other))
            m = self._matrix.copy()
            m[np.diag_indices(self.dim)] += c
            out = HermitianOperator._trusted(m, self._is_diagonal)
            # a scalar shift moves the spectrum and keeps the eigenvectors
            if self._eigenvalues is not None:
                out._eigenvalues = _frozen(self._eigenvalues + c)
            if self._eigenvectors is not None:
                out._eigenvectors = self._eigenvectors
            return out
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, scalar):
        if np.isscalar(scalar) and np.isreal(scalar):
            return HermitianOperator._trusted(float(np.real(scalar)) * self._matrix, self._is_diagonal)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def power(self, k):
        """Integer matrix power, still Hermitian."""
        if k < 0:
            raise ValueError("negative powers are not supported")
        m = np.linalg.matrix_power(self._matrix, k)
        # rounding in repeated products leaves an asymmetry that grows with the norm
        return HermitianOperator._trusted((m + m.conj().T) / 2, is_diagonal=self._is_diagonal)

    def commutator(self, other):
        """Return [self, other] as a plain complex array."""
        a, b = self._matrix, np.asarray(other)
        return a @ b - b @ a

    @property
    def is_diagonal(self):
        if self._is_diagonal is None:
            m = self._matrix
            self._is_diagonal = not np.any(m[~np.eye(self.dim, dtype=bool)])
        return self._is_diagonal

    @property
    def eigenvalues(self):
        """Ascending eigenvalues. Does not force the eigenvectors."""
        if self._eigenvalues is None:
            if self.is_diagonal:
                self._eigenvalues = _frozen(np.sort(self._matrix.diagonal().real, kind="stable"))
            else:
                self._decompose()
        return self._eigenvalues

    @property
    def eigenvectors(self):
        """Unitary matrix whose columns are the eigenvectors."""
        if self._eigenvectors is None:
            self._decompose()
        return self._eigenvectors

    @property
    def spectrum(self):
        return self.eigenvalues, self.eigenvectors

    @property
    def has_spectrum(self):
        return self._eigenvectors is not None

    def _decompose(self):
        d = self.dim
        if self.is_diagonal:
            diag = self._matrix.diagonal().real
            order = np.argsort(diag, kind="stable")
            values = diag[order]
            vectors = np.zeros((d, d), dtype=complex)
            vectors[order, np.arange(d)] = 1.0
        else:
            if d > MAX_EIG_DIM:
                raise SizeGuardError(f"eigendecomposition limited to dim <= {MAX_EIG_DIM}, got {d}")
            try:
                values, vectors = np.linalg.eigh(self._matrix)
            except np.linalg.LinAlgError as exc:
                raise ConvergenceError(
                    f"eigendecomposition of a {d}x{d} operator did not converge within the LAPACK iteration cap"
                ) from exc
            vectors = _fix_phases(vectors)
        self._eigenvalues = _frozen(np.ascontiguousarray(values))
        self._eigenvectors = _frozen(np.ascontiguousarray(vectors))


def _require_same_dim(a, b):
    if a != b:
        raise DimensionError(f"dimension mismatch: {a} vs {b}")


class PureState:
    """Unit-norm complex state vector (immutable)."""

    __slots__ = ("_amplitudes",)

    def __init__(self, amplitudes, *, tol=NORM_TOL):
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        if v.size == 0:
            raise DimensionError("state vector is empty")
        _check_finite(v, "state")
        norm_sq = float(np.vdot(v, v).real)
        if abs(norm_sq - 1.0) > tol:
            raise ValueError(f"state is not normalized: squared norm {norm_sq!r}")
        self._amplitudes = _frozen(v)

    @classmethod
    def normalized(cls, vector):
        v = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / norm)

    @classmethod
    def basis(cls, dim, index):
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v)

    @property
    def amplitudes(self):
        return self._amplitudes

    @property
    def dim(self):
        return self._amplitudes.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._amplitudes
        return self._amplitudes.astype(dtype)

    def __repr__(self):
        return f"PureState(dim={self.dim})"

    def overlap(self, other):
        """<self|other>."""
        _require_same_dim(self.dim, other.dim)
        return complex(np.vdot(self._amplitudes, other.amplitudes))

    def projector(self):
        return HermitianOperator(np.outer(self._amplitudes, self._amplitudes.conj()))


class DensityOperator:
    """Positive semidefinite, unit-trace Hermitian matrix."""

    __slots__ = ("_matrix",)

    def __init__(self, matrix, *, tol=HERMITIAN_TOL):
        op = matrix if isinstance(matrix, HermitianOperator) else HermitianOperator(matrix, tol=tol)
        tr = float(np.trace(op.matrix).real)
        if abs(tr - 1.0) > tol:
            raise ValueError(f"density operator trace is {tr!r}, expected 1")
        lowest = float(np.linalg.eigvalsh(op.matrix)[0]) if op.dim <= MAX_EIG_DIM else 0.0
        if lowest < -tol:
            raise ValueError(f"density operator has negative eigenvalue {lowest:.3e}")
        self._matrix = op.matrix

    @classmethod
    def from_state(cls, psi):
        a = np.asarray(psi.amplitudes)
        return cls(np.outer(a, a.conj()))

    @property
    def matrix(self):
        return self._matrix

    @property
    def dim(self):
        return self._matrix.shape[0]

    def purity(self):
        return float(np.sum(np.abs(self._matrix) ** 2))

    def expectation(self, op):
        _require_same_dim(self.dim, op.dim)
        return float(np.real(np.sum(self._matrix.T * np.asarray(op))))


def eigendecompose(op):
    """Return ``op`` with its spectrum computed and cached."""
    if not isinstance(op, HermitianOperator):
        op = HermitianOperator(op)
    op.eigenvectors
    return op


def _check_time(t):
    if not np.all(np.isfinite(t)):
        raise ValueError("evolution time must be finite")


def evolve(H, psi0, t):
    """Return exp(-iHt)|psi0> (hbar = 1)."""
    _require_same_dim(H.dim, psi0.dim)
    t = float(t)
    _check_time(t)
    if t == 0.0:
        return psi0
    values, vectors = H.spectrum
    coeffs = vectors.conj().T @ psi0.amplitudes
    out = vectors @ (np.exp(-1j * values * t) * coeffs)
    return PureState(out / np.linalg.norm(out))


def evolve_series(H, psi0, times):
    """Evolved amplitudes at every time, shape ``(len(times), d)``.

    ``psi0`` may also be a ``(n, d)`` batch of amplitude rows, in which case
    the result has shape ``(n, len(times), d)``.
    """
    times = np.asarray(times, dtype=float)
    _check_time(times)
    values, vectors = H.spectrum
    amps = np.asarray(psi0.amplitudes if isinstance(psi0, PureState) else psi0, dtype=complex)
    _require_same_dim(H.dim, amps.shape[-1])
    phases = np.exp(-1j * np.multiply.outer(times, values))
    coeffs = amps @ vectors.conj()
    if amps.ndim == 1:
        return (phases * coeffs) @ vectors.T
    return (coeffs[:, np.newaxis, :] * phases[np.newaxis]) @ vectors.T


def expectation(A, psi):
    """<psi|A|psi> as a real number."""
    _require_same_dim(A.dim, psi.dim)
    v = psi.amplitudes
    value = complex(np.vdot(v, A.matrix @ v))
    # Rounding in the imaginary part grows with the operator norm.
    scale = max(1.0, float(np.linalg.norm(A.matrix)))
    if abs(value.imag) > IMAG_TOL * scale:
        raise ValueError(f"expectation value has imaginary part {value.imag:.3e}; operator is corrupted")
    return value.real


def expectation_series(A, states):
    """Real expectation values of ``A`` over the trailing axis of ``states``."""
    states = np.asarray(states)
    _require_same_dim(A.dim, states.shape[-1])
    return np.einsum("...i,...i->...", states.conj(), states @ A.matrix.T).real


def matrix_apply(op, target):
    """Apply an operator to a state or multiply two operators."""
    m = np.asarray(op)
    if isinstance(target, PureState):
        _require_same_dim(m.shape[1], target.dim)
        return m @ target.amplitudes
    t = np.asarray(target)
    _require_same_dim(m.shape[1], t.shape[0])
    return m @ t


def trace(op):
    m = np.asarray(op)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"trace needs a square matrix, got shape {m.shape}")
    value = np.trace(m)
    if isinstance(op, HermitianOperator):
        return float(value.real)
    return complex(value)


def frobenius_inner(a, b):
    """Tr(a^dagger b)."""
    ma, mb = np.asarray(a), np.asarray(b)
    if ma.shape != mb.shape:
        raise DimensionError(f"shape mismatch: {ma.shape} vs {mb.shape}")
    value = np.vdot(ma, mb)
    if isinstance(a, HermitianOperator) and isinstance(b, HermitianOperator):
        return float(value.real)
    return complex(value)


def state_distance(a, b):
    """Euclidean distance between amplitude vectors, ignoring a global phase."""
    va, vb = np.asarray(a), np.asarray(b)
    ov = np.vdot(va, vb)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(va * phase - vb))


def spectral_gaps(H):
    """Sorted nearest-neighbour gaps of the spectrum."""
    return np.diff(H.eigenvalues)


def min_gap_difference(H):
    """Smallest |(E_n - E_m) - (E_p - E_q)| over distinct positive gaps."""
    E = H.eigenvalues
    d = E.size
    if d < 3:
        return math.inf
    n, m = np.triu_indices(d, 1)
    gaps = np.sort(E[m] - E[n])
    return float(np.min(np.diff(gaps)))

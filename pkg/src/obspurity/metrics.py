"""Observable purity, the diagonal ensemble, and related spectral metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSpectrumWarning, DimensionError, TrivialObservableError
from .operators import DensityOperator, HermitianOperator, spectral_gaps

DEGENERACY_TOL = 1e-10
_CLAMP_TOL = 1e-10


def _clamp_scale(values):
    return _CLAMP_TOL * max(1.0, float(np.max(np.abs(values))))


def shift_spectrum(A):
    """Return (A - E_min I, shifted eigenvalues, E_min).

    Shifted eigenvalues within 1e-10 (relative to the operator scale) of zero
    are clamped to exactly zero.
    """
    values = A.eigenvalues
    emin = float(values[0])
    shifted = values - emin
    tol = _clamp_scale(values)
    if shifted[-1] <= tol:
        raise TrivialObservableError("trivial observable: A is proportional to the identity")
    shifted = np.where(shifted <= tol, 0.0, shifted)
    return A - emin, shifted, emin


def purity_from_eigenvalues(values):
    values = np.asarray(values, dtype=float)
    return float(np.sum(values**2) / np.sum(values) ** 2)


def observable_purity(A):
    """eta(A) = Tr(rho_A^2), rho_A = A_s / Tr(A_s), A_s shifted to min eigenvalue 0."""
    _, values, _ = shift_spectrum(A)
    return purity_from_eigenvalues(values)


def eigenbasis_diagonal(A, H):
    """A_nn = <u_n|A|u_n> in the eigenbasis of H."""
    if A.dim != H.dim:
        raise DimensionError(f"dimension mismatch: {A.dim} vs {H.dim}")
    u = H.eigenvectors
    return np.einsum("in,ij,jn->n", u.conj(), A.matrix, u).real


def diagonal_purity(A_shifted, H):
    """Tr(rho_{A_D}^2) = sum A_nn^2 / (sum A_nn)^2 for an already shifted A."""
    ann = eigenbasis_diagonal(A_shifted, H)
    return float(np.sum(ann**2) / np.sum(ann) ** 2)


def is_degenerate(H, tol=DEGENERACY_TOL):
    gaps = spectral_gaps(H)
    return bool(gaps.size and gaps.min() < tol)


@dataclass(frozen=True)
class ObservableReport:
    label: str
    original: HermitianOperator
    shifted: HermitianOperator
    purity: float
    diag_purity: float | None = None
    degenerate_h: bool = False

    @property
    def dim(self):
        return self.original.dim

    @property
    def rho(self):
        m = self.shifted.matrix
        return DensityOperator(m / np.trace(m).real)

    @property
    def haar_mean(self):
        """Tr(A_s)/d, the Haar-averaged expectation of the shifted observable."""
        return float(np.trace(self.shifted.matrix).real / self.dim)

    @property
    def modified_purity(self):
        """purity - diag_purity (the Hamiltonian-dependent combination)."""
        if self.diag_purity is None:
            raise ValueError("no Hamiltonian was supplied for this report")
        return self.purity - self.diag_purity

    def row(self):
        return {
            "label": self.label,
            "purity": self.purity,
            "diag_purity": self.diag_purity if self.diag_purity is not None else float("nan"),
        }


def build_report(A, H=None, label=""):
    shifted, values, _ = shift_spectrum(A)
    report_purity = purity_from_eigenvalues(values)
    diag = None
    degenerate = False
    if H is not None:
        diag = diagonal_purity(shifted, H)
        degenerate = is_degenerate(H)
    return ObservableReport(label, A, shifted, report_purity, diag, degenerate)


@dataclass(frozen=True)
class DiagonalEnsemble:
    populations: np.ndarray
    basis: HermitianOperator

    @property
    def ipr(self):
        """Inverse participation ratio S0 = sum |b_n|^4."""
        return float(np.sum(self.populations**2))

    def density(self):
        u = self.basis.eigenvectors
        return DensityOperator((u * self.populations) @ u.conj().T)


def diagonal_ensemble(H, psi0):
    if H.dim != psi0.dim:
        raise DimensionError(f"dimension mismatch: {H.dim} vs {psi0.dim}")
    b = H.eigenvectors.conj().T @ psi0.amplitudes
    pops = np.abs(b) ** 2
    pops.setflags(write=False)
    return DiagonalEnsemble(pops, H)


def inverse_participation_ratio(H, psi0):
    return diagonal_ensemble(H, psi0).ipr


def _warn_if_degenerate(H, what):
    if is_degenerate(H):
        warnings.warn(
            f"{what}: spectral gap below {DEGENERACY_TOL:.0e}; the dephasing argument does not hold",
            DegenerateSpectrumWarning,
            stacklevel=3,
        )


def infinite_time_average(A, H, psi0):
    """Tr(rho_{psi,D} A), the long-time average of <A(t)>."""
    _warn_if_degenerate(H, "infinite_time_average")
    ens = diagonal_ensemble(H, psi0)
    return float(np.dot(ens.populations, eigenbasis_diagonal(A, H)))


def variation_distance(p, q, tol=1e-8):
    """Total variation distance (1/2) sum |p_n - q_n|."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"distributions have shapes {p.shape} and {q.shape}")
    for name, dist in (("P", p), ("Q", q)):
        if np.any(dist < -tol) or abs(dist.sum() - 1.0) > tol:
            raise ValueError(f"{name} is not a normalized probability vector (sum {dist.sum()!r})")
    p = np.clip(p, 0, None) / np.clip(p, 0, None).sum()
    q = np.clip(q, 0, None) / np.clip(q, 0, None).sum()
    return float(0.5 * np.abs(p - q).sum())

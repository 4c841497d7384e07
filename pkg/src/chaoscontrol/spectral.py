"""Quasienergy spectrum of a Floquet operator.

Eigenvalues are written ``exp(-i theta_n)`` with ``theta_n = E_n / hbar`` in
the principal branch ``(-pi, pi]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .rotor import write_columns
from .torus import Basis, WaveState

UNITARY_TOL = 1e-8


class SpectralError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    phases: np.ndarray          # theta_n = E_n / hbar
    eigenvectors: np.ndarray    # columns, position basis
    residual: float
    hbar: float | None = None

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(-1j * self.phases)

    @property
    def quasienergies(self) -> np.ndarray:
        if self.hbar is None:
            raise SpectralError("hbar unknown; only the phases are available")
        return self.hbar * self.phases

    def to_csv(self, path: str | Path, intensities: "IntensityProfile | None" = None) -> None:
        w = np.full(self.phases.size, np.nan) if intensities is None else intensities.intensities
        write_columns(path, ("theta", "intensity"), (self.phases, w))


@dataclass(frozen=True)
class IntensityProfile:
    intensities: np.ndarray


def principal_phase(theta: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    out = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    out[out == -np.pi] = np.pi
    return out


def decompose(U: np.ndarray, hbar: float | None = None) -> SpectralDecomposition:
    """Eigendecomposition of a unitary via complex Schur form.

    For a normal matrix the Schur factor is diagonal up to rounding, so the
    Schur vectors are the eigenvectors; they are orthonormal by construction,
    including inside (near-)degenerate clusters.
    """
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    if U.shape != (n, n):
        raise SpectralError(f"expected a square matrix, got shape {U.shape}")
    dev = np.max(np.abs(U.conj().T @ U - np.eye(n)))
    if dev > UNITARY_TOL:
        raise SpectralError(f"matrix is not unitary (max |U^H U - 1| = {dev:.3g})")
    try:
        T, Z = scipy.linalg.schur(U, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"Schur decomposition failed: {exc}") from exc
    lam = np.diag(T)
    phases = principal_phase(-np.angle(lam))
    lam_unit = np.exp(-1j * phases)
    residual = float(np.max(np.abs(U @ Z - Z * lam_unit[None, :])))
    if residual > UNITARY_TOL or np.max(np.abs(np.abs(lam) - 1.0)) > UNITARY_TOL:
        raise SpectralError(f"eigen-decomposition did not converge (residual {residual:.3g})")
    return SpectralDecomposition(phases, Z, residual, hbar)


def intensities(state: WaveState, dec: SpectralDecomposition) -> IntensityProfile:
    """|c_n|^2 = |<v_n|state>|^2."""
    psi = state.in_basis(Basis.POSITION).amplitudes
    if psi.size != dec.eigenvectors.shape[0]:
        raise SpectralError("state and decomposition dimensions differ")
    c = dec.eigenvectors.conj().T @ psi
    return IntensityProfile(np.abs(c) ** 2)


def autocorrelation_spectral(state: WaveState, dec: SpectralDecomposition, t: int) -> complex:
    """<state| U^t |state> = sum_n |c_n|^2 exp(-i theta_n t)."""
    if t < 0:
        raise SpectralError("t must be >= 0")
    w = intensities(state, dec).intensities
    return complex(np.sum(w * np.exp(-1j * dec.phases * t)))


def phase_alignment(intens: IntensityProfile, dec: SpectralDecomposition, t: int) -> float:
    """Intensity-weighted resultant length of the phases theta_n t on the unit circle."""
    return float(abs(np.sum(intens.intensities * np.exp(-1j * dec.phases * t))))

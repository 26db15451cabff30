"""Dense complex-matrix kernel: trace norms, Hermitian spectra, spectral clustering.

All routines are pure functions of ndarray inputs; nothing here holds state,
so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, InvalidInputError

# Relative Hermiticity tolerance applied before any spectral call.
HERMITICITY_RTOL = 1e-10


def as_matrix(m) -> np.ndarray:
    """Validate and return a finite square complex matrix."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise InvalidInputError("matrix has non-finite entries")
    return m


def operator_norm(m) -> float:
    """Spectral norm (largest singular value)."""
    return float(np.linalg.norm(np.asarray(m, dtype=complex), 2))


def hermitize(m, rtol: float = HERMITICITY_RTOL) -> tuple[np.ndarray, float]:
    """Return the Hermitian part (m + m†)/2 together with the raw asymmetry.

    The asymmetry ``|m - m†|_inf`` must stay below ``rtol * max(1, |m|_inf)``;
    beyond that the input is treated as a contract violation rather than
    floating-point drift.
    """
    m = as_matrix(m)
    asym = operator_norm(m - m.conj().T)
    scale = max(1.0, operator_norm(m))
    if asym > rtol * scale:
        raise ContractViolationError(
            f"matrix is not Hermitian within tolerance: asymmetry {asym:.3e} "
            f"exceeds {rtol:.1e} * {scale:.3e}"
        )
    return (m + m.conj().T) / 2.0, asym


def trace_norm(m) -> float:
    """Trace norm: the sum of singular values of ``m``.

    For Hermitian input this equals the sum of absolute eigenvalues.
    """
    m = as_matrix(m)
    return float(np.linalg.svd(m, compute_uv=False).sum())


def eig_hermitian(m, rtol: float = HERMITICITY_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    The input is hermitized first; asymmetry beyond ``rtol`` raises.
    Columns of the second return value are the eigenvectors.
    """
    h, _ = hermitize(m, rtol)
    evals, evecs = np.linalg.eigh(h)
    return evals, evecs


def default_gap_tol(m) -> float:
    """Scale-aware clustering tolerance, 1e-8 * max(1, |m|_inf)."""
    return 1e-8 * max(1.0, operator_norm(m))


@dataclass(frozen=True)
class SpectrumClusters:
    """Distinct eigenvalue clusters of a self-adjoint operator.

    ``levels`` are strictly ascending cluster means; ``projectors[i]`` is the
    orthogonal projector onto the span of the i-th cluster's eigenvectors.
    Eigenvalues whose adjacent gap is at most ``gap_tol`` share a cluster, so
    consecutive levels are separated by more than ``gap_tol`` by construction.
    """

    levels: np.ndarray
    projectors: tuple[np.ndarray, ...]
    gap_tol: float

    @property
    def n_clusters(self) -> int:
        return len(self.levels)

    def reconstruct(self) -> np.ndarray:
        """Sum of level * projector, for reconstruction checks."""
        out = np.zeros_like(self.projectors[0])
        for p, lev in zip(self.projectors, self.levels):
            out = out + lev * p
        return out


def cluster_spectrum(m, gap_tol: float | None = None) -> SpectrumClusters:
    """Group the spectrum of a Hermitian matrix into gap-separated clusters.

    Adjacent eigenvalues merge whenever their gap is <= ``gap_tol`` (ties
    always merge, never split). A single cluster is legal output.
    """
    if gap_tol is None:
        gap_tol = default_gap_tol(m)
    if gap_tol <= 0:
        raise InvalidInputError("gap_tol must be positive")
    evals, evecs = eig_hermitian(m)
    boundaries = [0]
    for i in range(1, len(evals)):
        if evals[i] - evals[i - 1] > gap_tol:
            boundaries.append(i)
    boundaries.append(len(evals))
    levels = []
    projectors = []
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        block = evecs[:, lo:hi]
        levels.append(float(evals[lo:hi].mean()))
        projectors.append(block @ block.conj().T)
    return SpectrumClusters(
        levels=np.asarray(levels), projectors=tuple(projectors), gap_tol=float(gap_tol)
    )


def psd_check(m, tol: float) -> tuple[bool, float]:
    """Positive-semidefiniteness test with the minimum eigenvalue as witness.

    Returns ``(lambda_min >= -tol, lambda_min)``.
    """
    evals, _ = eig_hermitian(m)
    lam_min = float(evals[0])
    return lam_min >= -tol, lam_min


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 of two PSD matrices."""
    w, v = eig_hermitian(rho)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = sqrt_rho @ as_matrix(sigma) @ sqrt_rho
    wi, _ = eig_hermitian(inner)
    return float(np.sqrt(np.clip(wi, 0.0, None)).sum() ** 2)


def subspace_leak(p_small, p_big) -> float:
    """Operator norm of (1 - P_big) P_small; zero iff range(P_small) is inside range(P_big)."""
    p_small = as_matrix(p_small)
    p_big = as_matrix(p_big)
    eye = np.eye(p_big.shape[0], dtype=complex)
    return operator_norm((eye - p_big) @ p_small)

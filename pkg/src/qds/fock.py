"""Builders for truncated Fock-space operators and special state vectors.

Conventions: a|n> = sqrt(n)|n-1> on the retained levels 0..dim-1. The top
level is wrong by construction under a-dagger, so states with weight near the
cutoff are flagged as boundary-affected by the consumers of these builders.
Every builder is deterministic: identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, TruncationTooSmallError

DEFAULT_TAIL_TOL = 1e-10

# Levels counted as truncation boundary for flagging purposes.
BOUNDARY_LEVELS = 2


@dataclass(frozen=True)
class FockTruncation:
    """Cutoff description: highest retained number state and tail budget."""

    n_max: int
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.n_max < 1:
            raise InvalidInputError("n_max must be at least 1")
        if self.tail_tol <= 0:
            raise InvalidInputError("tail_tol must be positive")

    @property
    def dim(self) -> int:
        return self.n_max + 1


def ladder(dim: int) -> np.ndarray:
    """Annihilation operator a on a dim-level truncation."""
    if dim < 2:
        raise InvalidInputError("ladder operator needs dim >= 2")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number_op(dim: int) -> np.ndarray:
    """Number operator N = a†a = diag(0..dim-1)."""
    if dim < 2:
        raise InvalidInputError("number operator needs dim >= 2")
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def coherent_tail_mass(dim: int, alpha: complex) -> float:
    """Probability mass of |alpha> beyond the cutoff, summed from n = dim upward.

    Summing the Poisson(|alpha|^2) tail directly avoids the cancellation of
    1 - (partial sum) when the tail is tiny.
    """
    lam = abs(alpha) ** 2
    if lam == 0.0:
        return 0.0
    log_term = -lam + dim * math.log(lam) - math.lgamma(dim + 1)
    term = math.exp(log_term)
    total = 0.0
    n = dim
    while term > 0.0 and n < dim + 100_000:
        total += term
        n += 1
        term *= lam / n
        if term < total * 1e-18 and n > lam:
            total += term * (n + 1) / max(n + 1 - lam, 1.0)  # geometric remainder bound
            break
    return total


def required_coherent_dim(alpha: complex, tail_tol: float) -> int:
    """Smallest dim whose coherent tail mass is at most tail_tol."""
    lam = abs(alpha) ** 2
    dim = max(2, int(lam) + 1)
    while coherent_tail_mass(dim, alpha) > tail_tol:
        dim += 1
        if dim > 100_000:
            raise InvalidInputError("no feasible truncation below 100000 levels")
    return dim


def _coherent_amplitudes(dim: int, alpha: complex) -> np.ndarray:
    # exp(-|a|^2/2) a^n / sqrt(n!), evaluated through logs for stability
    n = np.arange(dim)
    log_fact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, dim, dtype=float)))])
    mag = np.exp(-abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * log_fact)
    phase = np.exp(1j * n * np.angle(alpha))
    return mag * phase


def coherent_vector(dim: int, alpha: complex, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Normalized truncated coherent vector |alpha>.

    Raises TruncationTooSmallError, naming the required dimension, when the
    Poisson tail mass beyond the cutoff exceeds ``tail_tol``.
    """
    if dim < 2:
        raise InvalidInputError("coherent vector needs dim >= 2")
    if alpha == 0:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        return v
    tail = coherent_tail_mass(dim, alpha)
    if tail > tail_tol:
        raise TruncationTooSmallError(
            f"coherent tail mass {tail:.3e} exceeds {tail_tol:.1e} at dim {dim}; "
            f"need dim >= {required_coherent_dim(alpha, tail_tol)}",
            required_dim=required_coherent_dim(alpha, tail_tol),
        )
    amps = _coherent_amplitudes(dim, alpha)
    return amps / np.linalg.norm(amps)


def cat_vectors(
    dim: int, alpha: complex, tail_tol: float = DEFAULT_TAIL_TOL
) -> tuple[np.ndarray, np.ndarray | None]:
    """Even and odd cat vectors spanning the truncated kernel of a^2 - alpha^2.

    The even (odd) vector keeps the even-n (odd-n) coherent amplitudes of
    |alpha>, renormalized; the pair is orthonormal by parity. For alpha = 0
    the odd combination degenerates, so ``(|0>, None)`` is returned.
    """
    if dim < 2:
        raise InvalidInputError("cat vectors need dim >= 2")
    if alpha == 0:
        even = np.zeros(dim, dtype=complex)
        even[0] = 1.0
        return even, None
    # the same Poisson tail bounds both +alpha and -alpha
    tail = coherent_tail_mass(dim, alpha)
    if tail > tail_tol:
        raise TruncationTooSmallError(
            f"cat tail mass {tail:.3e} exceeds {tail_tol:.1e} at dim {dim}; "
            f"need dim >= {required_coherent_dim(alpha, tail_tol)}",
            required_dim=required_coherent_dim(alpha, tail_tol),
        )
    amps = _coherent_amplitudes(dim, alpha)
    even = amps.copy()
    even[1::2] = 0.0
    odd = amps.copy()
    odd[0::2] = 0.0
    return even / np.linalg.norm(even), odd / np.linalg.norm(odd)


@dataclass(frozen=True)
class Quadratures:
    """Quadrature pair with the convention that produced it recorded."""

    q: np.ndarray
    p: np.ndarray
    convention: str


QUADRATURE_CONVENTIONS = ("a+ad", "symmetric")


def quadratures(dim: int, convention: str = "a+ad") -> Quadratures:
    """Quadrature operators q and p for the chosen scaling convention.

    "a+ad": q = a + a†, p = -i(a - a†), giving [q, p] = 2i on interior levels.
    "symmetric": the same pair divided by sqrt(2).
    """
    if convention not in QUADRATURE_CONVENTIONS:
        raise InvalidInputError(
            f"unknown quadrature convention {convention!r}; choose from {QUADRATURE_CONVENTIONS}"
        )
    a = ladder(dim)
    ad = a.conj().T
    q = a + ad
    p = -1j * (a - ad)
    if convention == "symmetric":
        q = q / math.sqrt(2.0)
        p = p / math.sqrt(2.0)
    return Quadratures(q=q, p=p, convention=convention)


def state_boundary_mass(rho: np.ndarray, levels: int = BOUNDARY_LEVELS) -> float:
    """Population of a density matrix on the top ``levels`` Fock levels."""
    d = rho.shape[0]
    k = min(levels, d)
    return float(np.trace(rho[d - k :, d - k :]).real)


def operator_boundary_mass(op: np.ndarray, levels: int = BOUNDARY_LEVELS) -> float:
    """Fraction of an operator's Frobenius weight on rows/columns at the cutoff."""
    d = op.shape[0]
    k = min(levels, d)
    total = float(np.linalg.norm(op)) ** 2
    if total == 0.0:
        return 0.0
    interior = float(np.linalg.norm(op[: d - k, : d - k])) ** 2
    return (total - interior) / total

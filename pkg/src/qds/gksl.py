"""GKSL generators, superoperator assembly, and stationary structure.

The adjoint generator acts on observables,

    L(X) = i[H, X] + sum_k (Lk† X Lk - (Lk†Lk X + X Lk†Lk)/2),

and the predual generator drives the master equation for states,

    Lstar(rho) = -i[H, rho] + sum_k (Lk rho Lk† - (Lk†Lk rho + rho Lk†Lk)/2).

The two are trace-dual: tr(X Lstar(rho)) = tr(L(X) rho). The superoperator is
the matrix of Lstar in the column-stacked (column-major) vectorization, so
vec(A rho B) = (B^T kron A) vec(rho).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolationError, InvalidInputError, ResourceLimitError
from .fock import operator_boundary_mass
from .opalg import as_matrix, hermitize, operator_norm, trace_norm

# Superoperators above this dimension (dim^2 = 4096) are out of scope.
MAX_SUPEROP_DIM = 64

# Internal seed for the construction self-test; independent of user seeds so
# that construction stays deterministic.
_SELF_TEST_SEED = 0xC0FFEE
_SELF_TEST_STATES = 20

_BOUNDARY_MASS_FLAG = 1e-6


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(m, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


def _readonly(m: np.ndarray) -> np.ndarray:
    out = np.array(m, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Hamiltonian plus coupling operators on a declared Hilbert dimension.

    Instances are immutable (matrices are stored read-only) and compare by
    identity, which lets derived superoperators be cached per model.
    """

    dim: int
    hamiltonian: np.ndarray
    couplings: tuple[np.ndarray, ...] = ()
    label: str = ""

    def __post_init__(self):
        h = as_matrix(self.hamiltonian)
        if h.shape[0] != self.dim:
            raise InvalidInputError(
                f"hamiltonian dim {h.shape[0]} does not match declared dim {self.dim}"
            )
        hermitize(h)  # raises beyond tolerance
        ls = tuple(_readonly(as_matrix(l)) for l in self.couplings)
        for l in ls:
            if l.shape[0] != self.dim:
                raise InvalidInputError("coupling dimension mismatch")
        object.__setattr__(self, "hamiltonian", _readonly(h))
        object.__setattr__(self, "couplings", ls)


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, positive-semidefinite, unit-trace matrix with validity tolerances."""

    matrix: np.ndarray
    psd_tol: float = 1e-9
    trace_tol: float = 1e-9

    def __post_init__(self):
        m = as_matrix(self.matrix)
        h, _ = hermitize(m)  # Hermiticity within 1e-10 of scale
        lam_min = float(np.linalg.eigvalsh(h)[0])
        if lam_min < -self.psd_tol:
            raise ContractViolationError(
                f"density operator has eigenvalue {lam_min:.3e} below -psd_tol"
            )
        tr = float(np.trace(h).real)
        if abs(tr - 1.0) > self.trace_tol:
            raise ContractViolationError(f"density operator trace {tr!r} is not 1 within tolerance")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, psi: np.ndarray, **kw) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex)
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise InvalidInputError("cannot build a state from the zero vector")
        psi = psi / nrm
        return cls(np.outer(psi, psi.conj()), **kw)

    @classmethod
    def maximally_mixed(cls, dim: int, **kw) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim, **kw)


def _as_state_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.matrix
    return as_matrix(rho)


def adjoint_generator(model: SystemModel, x) -> np.ndarray:
    """Apply the adjoint (Heisenberg-picture) generator to an observable."""
    x = as_matrix(x)
    if x.shape[0] != model.dim:
        raise InvalidInputError("observable dimension does not match the model")
    h = model.hamiltonian
    out = 1j * (h @ x - x @ h)
    for l in model.couplings:
        ldl = l.conj().T @ l
        out = out + l.conj().T @ x @ l - 0.5 * (ldl @ x + x @ ldl)
    return out


def predual_generator(model: SystemModel, rho) -> np.ndarray:
    """Apply the predual (master-equation) generator to a state."""
    r = _as_state_matrix(rho)
    if r.shape[0] != model.dim:
        raise InvalidInputError("state dimension does not match the model")
    h = model.hamiltonian
    out = -1j * (h @ r - r @ h)
    for l in model.couplings:
        ldl = l.conj().T @ l
        out = out + l @ r @ l.conj().T - 0.5 * (ldl @ r + r @ ldl)
    return out


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Matrix form of the predual generator on column-stacked states."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_propagators", {})

    def apply(self, rho) -> np.ndarray:
        return unvec(self.matrix @ vec(_as_state_matrix(rho)), self.dim)

    def propagator(self, t: float) -> np.ndarray:
        """exp(t * matrix), the flow map on vectorized states (cached per t)."""
        key = float(t)
        cache = self._propagators
        if key not in cache:
            cache[key] = sla.expm(key * self.matrix)
        return cache[key]


def _random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real


def superoperator(model: SystemModel, self_test: bool = True) -> Superoperator:
    """Assemble the dense superoperator of the predual generator.

    A construction self-test compares the matrix action against the direct
    generator on random states; deviation beyond 1e-12 of the superoperator's
    entry scale is a construction bug and raises. Results are cached per
    model instance.
    """
    if self_test:
        return _superoperator_cached(model)
    return _superoperator_build(model, self_test=False)


@functools.lru_cache(maxsize=64)
def _superoperator_cached(model: SystemModel) -> Superoperator:
    return _superoperator_build(model, self_test=True)


def _superoperator_build(model: SystemModel, self_test: bool) -> Superoperator:
    d = model.dim
    if d > MAX_SUPEROP_DIM:
        raise ResourceLimitError(
            f"dim {d} exceeds the dense superoperator cap {MAX_SUPEROP_DIM}"
        )
    eye = np.eye(d, dtype=complex)
    h = model.hamiltonian
    s = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for l in model.couplings:
        ldl = l.conj().T @ l
        s = s + np.kron(l.conj(), l) - 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
    sup = Superoperator(dim=d, matrix=_readonly(s))
    if self_test:
        rng = np.random.default_rng(_SELF_TEST_SEED)
        scale = max(1.0, float(np.abs(s).max()))
        for _ in range(_SELF_TEST_STATES):
            rho = _random_density(rng, d)
            gap = np.abs(sup.apply(rho) - predual_generator(model, rho)).max()
            if gap > 1e-12 * scale:
                raise ContractViolationError(
                    f"superoperator self-test failed: action gap {gap:.3e}"
                )
    return sup


@dataclass(frozen=True)
class StationarySet:
    """Hermitian basis of the stationary operator space with its support.

    ``basis`` spans ker(Lstar) intersected with the Hermitian matrices,
    orthonormal in the Hilbert-Schmidt inner product. ``support_projector``
    projects onto the range of the summed positive parts of the basis.
    ``density_states`` are genuine stationary density operators extracted as
    normalized positive/negative parts of basis elements (positive parts of
    fixed points of a positive trace-preserving semigroup are again fixed).
    ``boundary_flags`` marks basis elements with more than 1e-6 of their
    weight on the top two Fock levels, the signature of a truncation-induced
    pseudo-kernel.
    """

    basis: tuple[np.ndarray, ...]
    support_projector: np.ndarray
    null_tol: float
    residuals: tuple[float, ...]
    density_states: tuple[np.ndarray, ...]
    boundary_flags: tuple[bool, ...]
    singular_values: np.ndarray = field(repr=False, default=None)

    @property
    def dimension(self) -> int:
        """Real dimension of the Hermitian stationary operator space."""
        return len(self.basis)

    @property
    def support_rank(self) -> int:
        return int(round(np.trace(self.support_projector).real))

    @property
    def has_density_state(self) -> bool:
        return len(self.density_states) > 0


def _hermitian_orthonormalize(candidates: list[np.ndarray], tol: float = 1e-8) -> list[np.ndarray]:
    # Gram-Schmidt over the real vector space of Hermitian matrices.
    basis: list[np.ndarray] = []
    for x in candidates:
        y = x.copy()
        for b in basis:
            y = y - np.trace(b @ y).real * b
        nrm = float(np.linalg.norm(y))
        if nrm > tol:
            basis.append(y / nrm)
    return basis


def _positive_part(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    pos = w > 0.0
    if not pos.any():
        return np.zeros_like(h)
    return (v[:, pos] * w[pos]) @ v[:, pos].conj().T


def stationary_states(
    model: SystemModel,
    null_tol: float | None = None,
    support_tol: float = 1e-8,
) -> StationarySet:
    """Hermitian null-space basis of the superoperator plus support projector.

    ``null_tol`` defaults to 1e-8 times the largest singular value; singular
    vectors below it count as stationary directions. An empty set is reported
    honestly, never fabricated.
    """
    sup = superoperator(model)
    d = model.dim
    _, sv, vh = np.linalg.svd(sup.matrix)
    sigma_max = float(sv[0]) if len(sv) else 0.0
    if null_tol is None:
        null_tol = 1e-8 * max(sigma_max, 1e-300)
    null_vectors = vh[sv <= null_tol].conj()

    candidates: list[np.ndarray] = []
    for row in null_vectors:
        b = unvec(row, d)
        candidates.append((b + b.conj().T) / 2.0)
        candidates.append((b - b.conj().T) / 2.0j)
    basis = _hermitian_orthonormalize(candidates)

    residuals = tuple(trace_norm(predual_generator(model, b)) for b in basis)
    flags = tuple(operator_boundary_mass(b) > _BOUNDARY_MASS_FLAG for b in basis)

    if basis:
        # positive parts of +-B together span the support of B; null vectors
        # come with arbitrary sign, so both orientations are needed
        pos_sum = np.zeros((d, d), dtype=complex)
        for b in basis:
            pos_sum += _positive_part(b) + _positive_part(-b)
        w, v = np.linalg.eigh((pos_sum + pos_sum.conj().T) / 2.0)
        keep = w > support_tol
        support = v[:, keep] @ v[:, keep].conj().T
    else:
        support = np.zeros((d, d), dtype=complex)

    # residual budget for extracted states: the SVD threshold maps to trace
    # norm through at most sqrt(d), with slack for the part extraction
    state_tol = 100.0 * np.sqrt(d) * max(null_tol, 1e-14)
    states: list[np.ndarray] = []
    for b in basis:
        for part in (_positive_part(b), _positive_part(-b)):
            tr = float(np.trace(part).real)
            if tr <= 1e-8:
                continue
            cand = part / tr
            if trace_norm(predual_generator(model, cand)) > state_tol:
                continue
            if all(trace_norm(cand - s) > 1e-8 for s in states):
                states.append(cand)

    return StationarySet(
        basis=tuple(basis),
        support_projector=support,
        null_tol=float(null_tol),
        residuals=residuals,
        density_states=tuple(states),
        boundary_flags=flags,
        singular_values=sv,
    )


def spectral_gap(model: SystemModel, null_tol: float | None = None) -> float:
    """Negated largest real part among decaying superoperator eigenvalues.

    Returns 0 when no eigenvalue has real part below -null_tol (purely
    unitary or trivial dynamics).
    """
    sup = superoperator(model)
    sv = np.linalg.svd(sup.matrix, compute_uv=False)
    sigma_max = float(sv[0]) if len(sv) else 0.0
    if null_tol is None:
        null_tol = 1e-8 * max(sigma_max, 1e-300)
    evals = np.linalg.eigvals(sup.matrix)
    decaying = evals.real[evals.real < -null_tol]
    if decaying.size == 0:
        return 0.0
    return float(-decaying.max())


def propagator_choi(model: SystemModel, t: float) -> np.ndarray:
    """Choi matrix of exp(t * Lstar); PSD iff the propagator is completely positive."""
    d = model.dim
    p = superoperator(model).propagator(t)
    # p[i + d*j, k + d*l] = <i| Phi(E_kl) |j>; Choi[(k,i),(l,j)] = that entry
    p4 = p.reshape(d, d, d, d)
    choi = p4.transpose(3, 1, 2, 0).reshape(d * d, d * d)
    return (choi + choi.conj().T) / 2.0

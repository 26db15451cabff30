import hypothesis
import numpy as np
import pytest

from qds import DEFAULT_SEED
from qds.fock import cat_vectors, coherent_vector, ladder, number_op
from qds.gksl import SystemModel, stationary_states

hypothesis.settings.register_profile(
    "suite", max_examples=25, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("suite")

FULL_DIM = 40


# ---------------------------------------------------------------------------
# model builders shared across the suite
# ---------------------------------------------------------------------------

def displaced_model(dim: int, alpha: complex = 1.0, kappa: float = 1.0) -> SystemModel:
    """Damped oscillator stabilizing the coherent state at alpha; V = H."""
    a = ladder(dim)
    b = a - alpha * np.eye(dim, dtype=complex)
    h = b.conj().T @ b
    return SystemModel(
        dim=dim, hamiltonian=h, couplings=(np.sqrt(kappa) * b,), label=f"displaced({alpha})"
    )


def quadratic_candidate_model(dim: int) -> SystemModel:
    """Plain damping with H = N; paired with the candidate V = N^2 - N."""
    a = ladder(dim)
    return SystemModel(dim=dim, hamiltonian=number_op(dim), couplings=(a,), label="damping")


def two_photon_model(dim: int, alpha: complex = 2.0) -> SystemModel:
    """Two-photon loss stabilizing the cat span of alpha; V = L†L."""
    a = ladder(dim)
    l = a @ a - alpha**2 * np.eye(dim, dtype=complex)
    return SystemModel(
        dim=dim, hamiltonian=np.zeros((dim, dim), dtype=complex), couplings=(l,),
        label=f"two-photon({alpha})",
    )


def quadratic_v(dim: int) -> np.ndarray:
    n = number_op(dim)
    return n @ n - n


def cat_span_projector(dim: int, alpha: complex) -> np.ndarray:
    even, odd = cat_vectors(dim, alpha)
    p = np.outer(even, even.conj())
    if odd is not None:
        p = p + np.outer(odd, odd.conj())
    return p


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# session-scoped heavy fixtures (dim-40 stationary analyses are shared)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(DEFAULT_SEED)


@pytest.fixture(scope="session")
def ex1_model():
    return displaced_model(FULL_DIM, alpha=1.0, kappa=1.0)


@pytest.fixture(scope="session")
def ex2_model():
    return quadratic_candidate_model(FULL_DIM)


@pytest.fixture(scope="session")
def ex3_model():
    return two_photon_model(FULL_DIM, alpha=2.0)


@pytest.fixture(scope="session")
def ex1_stationary(ex1_model):
    return stationary_states(ex1_model)


@pytest.fixture(scope="session")
def ex2_stationary(ex2_model):
    return stationary_states(ex2_model)


@pytest.fixture(scope="session")
def ex3_stationary(ex3_model):
    return stationary_states(ex3_model)


@pytest.fixture(scope="session")
def coherent_target():
    return coherent_vector(FULL_DIM, 1.0)

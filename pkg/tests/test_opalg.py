import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import haar_unitary, random_density, random_unit
from qds.errors import ContractViolationError, InvalidInputError
from qds.opalg import (
    cluster_spectrum,
    default_gap_tol,
    eig_hermitian,
    fidelity,
    hermitize,
    operator_norm,
    psd_check,
    trace_norm,
)


def proj(v):
    return np.outer(v, v.conj())


def test_trace_norm_orthogonal_pure_states():
    e0 = np.eye(2)[:, 0].astype(complex)
    e1 = np.eye(2)[:, 1].astype(complex)
    assert trace_norm(proj(e0) - proj(e1)) == pytest.approx(2.0, abs=1e-12)


def test_trace_norm_of_density_operator_is_one(rng):
    for dim in (2, 5, 9):
        assert trace_norm(random_density(rng, dim)) == pytest.approx(1.0, abs=1e-12)


def test_trace_norm_half_overlap_pair():
    # |<psi|phi>| = 1/sqrt(2) gives 2 sqrt(1 - 1/2) = sqrt(2)
    psi = np.array([1.0, 0.0], dtype=complex)
    phi = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    assert trace_norm(proj(psi) - proj(phi)) == pytest.approx(np.sqrt(2), abs=1e-12)


def test_pure_state_distance_identity_500_pairs(rng):
    worst = 0.0
    for _ in range(500):
        dim = int(rng.integers(2, 8))
        psi, phi = random_unit(rng, dim), random_unit(rng, dim)
        lhs = trace_norm(proj(psi) - proj(phi))
        rhs = 2.0 * np.sqrt(max(0.0, 1.0 - abs(np.vdot(psi, phi)) ** 2))
        worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-10


def test_trace_norm_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        trace_norm(np.array([[np.nan, 0], [0, 1]], dtype=complex))
    with pytest.raises(InvalidInputError):
        trace_norm(np.ones((2, 3), dtype=complex))


@given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
def test_trace_norm_dominates_trace(dim, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    assert trace_norm(m) >= abs(np.trace(m)) - 1e-10
    psd = m @ m.conj().T
    assert trace_norm(psd) == pytest.approx(np.trace(psd).real, rel=1e-10)


def test_eig_hermitian_identity_and_sorting():
    evals, _ = eig_hermitian(np.eye(3, dtype=complex))
    assert np.allclose(evals, [1, 1, 1])
    evals, _ = eig_hermitian(np.diag([2.0, -1.0, 0.0]).astype(complex))
    assert np.allclose(evals, [-1, 0, 2])


def test_eig_hermitian_number_operator():
    n = np.diag(np.arange(5, dtype=float)).astype(complex)
    evals, vecs = eig_hermitian(n)
    assert np.allclose(evals, np.arange(5))
    resid = np.abs(n @ vecs - vecs * evals).max()
    assert resid <= 1e-9 * operator_norm(n)


def test_eig_hermitian_rejects_asymmetric():
    with pytest.raises(ContractViolationError):
        eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))


def test_hermitize_reports_asymmetry():
    m = np.array([[1.0, 1e-12], [0.0, 2.0]], dtype=complex)
    h, asym = hermitize(m)
    assert asym <= 1e-11
    assert np.allclose(h, h.conj().T)


def test_cluster_spectrum_number_operator():
    n = np.diag(np.arange(4, dtype=float)).astype(complex)
    clusters = cluster_spectrum(n, 1e-8)
    assert np.allclose(clusters.levels, [0, 1, 2, 3])
    for p in clusters.projectors:
        assert np.trace(p).real == pytest.approx(1.0, abs=1e-10)


def test_cluster_spectrum_identity_single_cluster():
    clusters = cluster_spectrum(np.eye(4, dtype=complex), 1e-6)
    assert clusters.n_clusters == 1
    assert clusters.levels[0] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(clusters.projectors[0], np.eye(4))


def test_cluster_spectrum_quadratic_number_candidate():
    # N^2 - N at five levels: 0, 0, 2, 6, 12 with a rank-2 ground cluster
    n = np.arange(5, dtype=float)
    v = np.diag(n * n - n).astype(complex)
    clusters = cluster_spectrum(v, 1e-8)
    assert np.allclose(clusters.levels, [0, 2, 6, 12])
    p0 = clusters.projectors[0]
    assert np.trace(p0).real == pytest.approx(2.0, abs=1e-10)
    span = np.zeros((5, 5), dtype=complex)
    span[0, 0] = span[1, 1] = 1.0
    assert operator_norm(p0 - span) <= 1e-10


def test_cluster_projectors_resolve_identity(rng):
    for _ in range(10):
        dim = int(rng.integers(2, 8))
        u = haar_unitary(rng, dim)
        levels = np.sort(rng.standard_normal(dim) * 2)
        m = (u * levels) @ u.conj().T
        clusters = cluster_spectrum(m)
        total = sum(clusters.projectors)
        assert operator_norm(total - np.eye(dim)) <= 1e-10
        for i, p in enumerate(clusters.projectors):
            for j, q in enumerate(clusters.projectors):
                expect = p if i == j else np.zeros_like(p)
                assert operator_norm(p @ q - expect) <= 1e-10


def test_cluster_reconstruction_bound(rng):
    for _ in range(10):
        dim = int(rng.integers(3, 9))
        u = haar_unitary(rng, dim)
        levels = np.cumsum(rng.uniform(0.0, 1.0, dim))
        m = (u * levels) @ u.conj().T
        gap_tol = 0.5  # coarse on purpose so clusters actually merge
        clusters = cluster_spectrum(m, gap_tol)
        resid = operator_norm(m - clusters.reconstruct())
        assert resid <= dim * gap_tol + 1e-9 * operator_norm(m)


def test_cluster_levels_separated_by_gap_tol(rng):
    for _ in range(10):
        dim = int(rng.integers(3, 9))
        m = np.diag(np.sort(rng.uniform(0, 3, dim))).astype(complex)
        gap_tol = 0.3
        clusters = cluster_spectrum(m, gap_tol)
        if clusters.n_clusters > 1:
            assert np.diff(clusters.levels).min() > gap_tol


def test_default_gap_tol_scale_aware():
    assert default_gap_tol(np.eye(2, dtype=complex)) == pytest.approx(1e-8)
    assert default_gap_tol(100 * np.eye(2, dtype=complex)) == pytest.approx(1e-6)


def test_psd_check_pure_state():
    ok, witness = psd_check(np.diag([1.0, 0.0]).astype(complex), 1e-12)
    assert ok and witness == pytest.approx(0.0, abs=1e-12)


def test_psd_check_small_negative():
    ok, witness = psd_check(np.diag([1.0, -1e-6]).astype(complex), 1e-9)
    assert not ok
    assert witness == pytest.approx(-1e-6, abs=1e-12)


def test_fidelity_pure_states(rng):
    psi, phi = random_unit(rng, 4), random_unit(rng, 4)
    f = fidelity(proj(psi), proj(phi))
    assert f == pytest.approx(abs(np.vdot(psi, phi)) ** 2, abs=1e-10)
    assert fidelity(proj(psi), proj(psi)) == pytest.approx(1.0, abs=1e-10)

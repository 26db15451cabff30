"""Stability certificates from a candidate Lyapunov operator.

The certificate chain: the ground set of a self-adjoint candidate V (lowest
spectral cluster projector P0, levels p0 < p1, constant kappa = (p1-p0)/4),
a strict-minimum check comparing P0 against the stationary support, and the
operator-level sufficient tests

    -L(V) >= 0                        -> Lyapunov stable
    ker L(V) inside range(P0)         -> globally asymptotically stable
    L(V) <= -gamma (V - p0)           -> globally exponentially stable.

Trace inequalities over all states are decided at operator level because
tr(M rho) <= 0 for every state iff M <= 0. Verdicts are sufficient-condition
certificates, never claims of necessity. Quantitative distance brackets to
the ground set come from a support-leak lower bound and a spectral-gap upper
bound kappa d^2 <= tr((V - p0) rho).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import DEFAULT_SEED
from .errors import (
    DegenerateGroundSetError,
    InvalidInputError,
    ResourceLimitError,
)
from .gksl import SystemModel, _as_state_matrix, adjoint_generator, stationary_states, StationarySet
from .opalg import (
    as_matrix,
    cluster_spectrum,
    hermitize,
    operator_norm,
    trace_norm,
)

SUPPORT_MATCH_TOL = 1e-7
KERNEL_INCLUSION_TOL = 1e-7
_BISECTION_ITERS = 40


@dataclass(frozen=True)
class GroundSet:
    """Lowest spectral cluster of a certifying operator.

    ``p0`` and ``p1`` are the two lowest distinct levels; ``kappa`` is the
    distance-bracket constant (p1 - p0)/4, i.e. p1/4 after shifting p0 to 0.
    """

    projector: np.ndarray
    p0: float
    p1: float
    kappa: float

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.projector).real))


def ground_set(a, gap_tol: float | None = None) -> GroundSet:
    """Ground set of a self-adjoint operator with at least two spectral clusters."""
    clusters = cluster_spectrum(a, gap_tol)
    if clusters.n_clusters < 2:
        raise DegenerateGroundSetError(
            "operator has a single spectral cluster; every state is a ground state "
            "and no strict minimum is possible"
        )
    p0 = float(clusters.levels[0])
    p1 = float(clusters.levels[1])
    return GroundSet(projector=clusters.projectors[0], p0=p0, p1=p1, kappa=(p1 - p0) / 4.0)


@dataclass(frozen=True)
class StrictMinimumReport:
    """Outcome of comparing the ground projector with the stationary support."""

    passed: bool
    ground_rank: int
    stationary_rank: int
    projector_gap: float
    stationary: StationarySet = field(repr=False, default=None)


def strict_minimum_check(
    model: SystemModel,
    a,
    gap_tol: float | None = None,
    null_tol: float | None = None,
    stationary: StationarySet | None = None,
) -> StrictMinimumReport:
    """Test whether the stationary support equals the ground projector of ``a``.

    Equality of the two projectors is necessary for the strict-minimum
    condition (the stationary set must consist of ground states of ``a``) and
    certifies it when every state on the ground projector is stationary. Both
    ranks are reported either way.
    """
    gs = ground_set(a, gap_tol)
    ss = stationary if stationary is not None else stationary_states(model, null_tol)
    gap = operator_norm(ss.support_projector - gs.projector)
    return StrictMinimumReport(
        passed=gap <= SUPPORT_MATCH_TOL,
        ground_rank=gs.rank,
        stationary_rank=ss.support_rank,
        projector_gap=float(gap),
        stationary=ss,
    )


_VERDICT_ORDER = ("inconclusive", "lyapunov", "global_asymptotic", "global_exponential")


@dataclass(frozen=True)
class StabilityReport:
    """Certificate verdict with numerical witnesses.

    ``gamma`` is a certified lower bound on the exponential rate (0 unless the
    exponential branch holds); ``zeta`` restores the offset gamma * p0 hidden
    by the internal shift of V to p0 = 0.
    """

    verdict: str
    gamma: float
    zeta: float
    witnesses: dict
    caveats: tuple[str, ...] = ()

    def __post_init__(self):
        if self.verdict not in _VERDICT_ORDER:
            raise InvalidInputError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "global_exponential" and not self.gamma > 0:
            raise InvalidInputError("exponential verdict requires gamma > 0")

    @property
    def is_lyapunov_stable(self) -> bool:
        return _VERDICT_ORDER.index(self.verdict) >= 1

    @property
    def is_asymptotically_stable(self) -> bool:
        return _VERDICT_ORDER.index(self.verdict) >= 2

    @property
    def is_exponentially_stable(self) -> bool:
        return _VERDICT_ORDER.index(self.verdict) >= 3


def _interior_compress(m: np.ndarray, boundary_levels: int) -> np.ndarray:
    if boundary_levels <= 0:
        return m
    k = m.shape[0] - boundary_levels
    if k < 2:
        raise InvalidInputError("boundary_levels leaves no interior")
    return m[:k, :k]


def _embed_interior(vectors: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros((dim, vectors.shape[1]), dtype=complex)
    out[: vectors.shape[0], :] = vectors
    return out


def classify_stability(
    model: SystemModel,
    v,
    gap_tol: float | None = None,
    null_tol: float | None = None,
    psd_tol: float = 1e-9,
    boundary_levels: int = 0,
    stationary: StationarySet | None = None,
) -> StabilityReport:
    """Classify the stability of the stationary set certified by candidate V.

    ``boundary_levels > 0`` evaluates the operator inequalities on the
    compression that drops the top Fock levels, where truncated ladder
    products are wrong by construction; the policy is recorded as a caveat.
    A failed strict-minimum check forces the verdict inconclusive.
    """
    vmat, _ = hermitize(as_matrix(v))
    if vmat.shape[0] != model.dim:
        raise InvalidInputError("candidate dimension does not match the model")

    smc = strict_minimum_check(model, vmat, gap_tol, null_tol, stationary)
    gs = ground_set(vmat, gap_tol)
    lv = adjoint_generator(model, vmat)
    lv = (lv + lv.conj().T) / 2.0

    neg_lv = _interior_compress(-lv, boundary_levels)
    v_c = _interior_compress(vmat, boundary_levels)
    eye_c = np.eye(neg_lv.shape[0], dtype=complex)

    w, vecs = np.linalg.eigh(neg_lv)
    scale = max(1.0, float(abs(w[-1])), float(abs(w[0])))
    lam_min = float(w[0])
    psd_ok = lam_min >= -psd_tol * scale

    # kernel of L(V) inside the compression, embedded back into the full space
    kernel_cut = 1e-7 * scale
    kernel = vecs[:, np.abs(w) <= kernel_cut]
    kernel_full = _embed_interior(kernel, model.dim)
    if kernel.shape[1]:
        inclusion_gap = float(
            operator_norm((np.eye(model.dim) - gs.projector) @ kernel_full)
        )
    else:
        inclusion_gap = 0.0
    kernel_ok = inclusion_gap <= KERNEL_INCLUSION_TOL

    caveats: list[str] = []
    if boundary_levels > 0:
        caveats.append(
            f"operator inequalities evaluated on the truncation interior "
            f"(top {boundary_levels} Fock levels excluded)"
        )
    caveats.append("verdicts are sufficient-condition certificates, not necessity claims")

    witnesses = {
        "neg_generator_min_eigenvalue": lam_min,
        "kernel_dimension": int(kernel.shape[1]),
        "kernel_inclusion_gap": inclusion_gap,
        "strict_minimum_passed": smc.passed,
        "ground_rank": smc.ground_rank,
        "stationary_rank": smc.stationary_rank,
        "support_projector_gap": smc.projector_gap,
        "p0": gs.p0,
        "p1": gs.p1,
        "kappa": gs.kappa,
        "boundary_levels": boundary_levels,
    }

    if not smc.passed:
        caveats.append(
            "strict-minimum condition failed: stationary support does not match the "
            "ground projector, so the ground-set machinery does not apply"
        )
        return StabilityReport(
            verdict="inconclusive", gamma=0.0, zeta=0.0, witnesses=witnesses, caveats=tuple(caveats)
        )
    if not psd_ok:
        caveats.append("-L(V) is not positive semidefinite within tolerance")
        return StabilityReport(
            verdict="inconclusive", gamma=0.0, zeta=0.0, witnesses=witnesses, caveats=tuple(caveats)
        )

    # exponential branch: largest gamma with -L(V) - gamma (V - p0) >= 0,
    # certified by bisection on PSD feasibility
    shifted = v_c - gs.p0 * eye_c

    def feasible(gamma: float) -> bool:
        m = neg_lv - gamma * shifted
        wm = np.linalg.eigvalsh(m)
        return wm[0] >= -psd_tol * max(1.0, abs(wm[-1]), abs(wm[0]))

    gamma = 0.0
    if feasible(1e-9):
        lo, hi = 1e-9, 1.0
        while feasible(hi) and hi < 1e9:
            lo, hi = hi, hi * 2.0
        for _ in range(_BISECTION_ITERS):
            mid = (lo + hi) / 2.0
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        gamma = lo
    witnesses["gamma"] = gamma

    if gamma > 0.0 and kernel_ok:
        return StabilityReport(
            verdict="global_exponential",
            gamma=gamma,
            zeta=gamma * gs.p0,
            witnesses=witnesses,
            caveats=tuple(caveats),
        )
    if kernel_ok:
        return StabilityReport(
            verdict="global_asymptotic", gamma=0.0, zeta=0.0,
            witnesses=witnesses, caveats=tuple(caveats),
        )
    caveats.append("ker L(V) leaks outside the ground projector; only Eq.-level stability holds")
    return StabilityReport(
        verdict="lyapunov", gamma=0.0, zeta=0.0, witnesses=witnesses, caveats=tuple(caveats)
    )


@dataclass(frozen=True)
class DistanceBracket:
    """Two-sided bound on the trace-norm distance from a state to the ground set."""

    lower: float
    upper: float
    lower_method: str
    upper_method: str

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise InvalidInputError("bracket lower bound exceeds upper bound")

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def distance_bracket(rho, gs: GroundSet, a) -> DistanceBracket:
    """Bracket the distance d(rho, states supported on P0).

    Lower bound: 2 tr((1-P0) rho), the support-leak witness. Upper bounds:
    sqrt((tr(A rho) - p0)/kappa) from the spectral gap, the projected state
    |rho - P0 rho P0 / tr|_1 when the overlap is not negligible, and the
    trace-distance range cap 2.
    """
    r = _as_state_matrix(rho)
    a = as_matrix(a)
    p0_proj = gs.projector
    expect_a = float(np.trace(a @ r).real)
    if expect_a < gs.p0 - 1e-10:
        raise InvalidInputError(
            f"tr(A rho) = {expect_a!r} below the ground level {gs.p0!r}; "
            "the state does not belong to this operator's bracket"
        )
    eye = np.eye(r.shape[0], dtype=complex)
    lower = max(0.0, 2.0 * float(np.trace((eye - p0_proj) @ r).real))

    candidates: list[tuple[float, str]] = [(2.0, "range-cap")]
    gap = max(0.0, expect_a - gs.p0)
    candidates.append((float(np.sqrt(gap / gs.kappa)), "spectral-gap"))
    overlap = float(np.trace(p0_proj @ r @ p0_proj).real)
    if overlap >= 1e-12:
        projected = p0_proj @ r @ p0_proj / overlap
        candidates.append((trace_norm(r - projected), "projection"))
    upper, upper_method = min(candidates, key=lambda c: c[0])
    if lower > upper + 1e-9:
        raise InvalidInputError(
            f"inconsistent bracket [{lower}, {upper}]; wrong pairing of state and operator"
        )
    return DistanceBracket(
        lower=lower,
        upper=max(upper, lower),
        lower_method="support-leak",
        upper_method=upper_method,
    )


def brute_force_distance(
    rho,
    p0_projector,
    budget: int = 32,
    seed: int = DEFAULT_SEED,
    maxfev: int | None = None,
) -> float:
    """Minimize |rho - sigma|_1 over states sigma supported on the projector.

    Derivative-free local search (Nelder-Mead) over a Cholesky-style
    parameterization, from a deterministic compression start plus ``budget``
    random starts. The objective is convex in sigma, so local minima are
    global; the random starts guard the parameterization. Exhaustive-search
    grade: supports rank at most 3.
    """
    r = _as_state_matrix(rho)
    p = as_matrix(p0_projector)
    w, vecs = np.linalg.eigh((p + p.conj().T) / 2.0)
    cols = vecs[:, w > 0.5]
    rank = cols.shape[1]
    if rank == 0:
        raise InvalidInputError("projector has rank zero")
    if rank > 3:
        raise ResourceLimitError(f"oracle supports rank <= 3, got {rank}")
    if rank == 1:
        sigma = np.outer(cols[:, 0], cols[:, 0].conj())
        return trace_norm(r - sigma)

    n_par = rank * rank
    tril_r, tril_c = np.tril_indices(rank, k=-1)

    def unpack(x: np.ndarray) -> np.ndarray:
        t = np.zeros((rank, rank), dtype=complex)
        t[np.diag_indices(rank)] = x[:rank]
        n_off = len(tril_r)
        t[tril_r, tril_c] = x[rank : rank + n_off] + 1j * x[rank + n_off :]
        return t

    def objective(x: np.ndarray) -> float:
        t = unpack(x)
        tau = t @ t.conj().T
        tr = float(np.trace(tau).real)
        if tr <= 1e-300:
            return 2.0
        sigma = cols @ (tau / tr) @ cols.conj().T
        return float(np.abs(np.linalg.eigvalsh(r - sigma)).sum())

    rng = np.random.default_rng(seed)
    starts: list[np.ndarray] = []
    comp = cols.conj().T @ r @ cols
    comp = (comp + comp.conj().T) / 2.0
    tr_comp = float(np.trace(comp).real)
    if tr_comp > 1e-12:
        # Cholesky of the (ridged) compression makes the projected state an
        # exact starting point in this parameterization
        tc = np.linalg.cholesky(comp / tr_comp + 1e-12 * np.eye(rank))
        x0 = np.zeros(n_par)
        x0[:rank] = np.diag(tc).real
        off = tc[tril_r, tril_c]
        x0[rank : rank + len(tril_r)] = off.real
        x0[rank + len(tril_r) :] = off.imag
        starts.append(x0)
    else:
        starts.append(np.concatenate([np.ones(rank), np.zeros(n_par - rank)]))
    for _ in range(budget):
        starts.append(rng.standard_normal(n_par))

    fev = maxfev if maxfev is not None else 400 * n_par
    best = np.inf
    best_x = starts[0]
    for x0 in starts:
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options=dict(xatol=1e-9, fatol=1e-12, maxfev=fev),
        )
        if float(res.fun) < best:
            best = float(res.fun)
            best_x = res.x
    # one polishing restart; a fresh simplex around the best point sharpens
    # the last digits that a collapsed simplex leaves behind
    res = minimize(
        objective,
        best_x,
        method="Nelder-Mead",
        options=dict(xatol=1e-10, fatol=1e-13, maxfev=fev),
    )
    return min(best, float(res.fun))

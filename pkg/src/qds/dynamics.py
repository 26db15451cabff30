"""Propagation of the master equation and observable-trajectory extraction.

The default propagator applies the exact flow exp(t * Lstar) built from the
dense superoperator; an adaptive embedded Runge-Kutta path exists for
cross-validation. States are hermitized after every step, trace drift is
logged and never silently repaired, and positivity is checked against a
-1e-7 floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InvalidInputError, PropagationError, StiffnessError
from .fock import state_boundary_mass
from .gksl import (
    DensityOperator,
    SystemModel,
    _as_state_matrix,
    adjoint_generator,
    predual_generator,
    superoperator,
    unvec,
    vec,
)
from .opalg import hermitize, operator_norm

PSD_FLOOR = -1e-7
TRACE_FAIL = 1e-6
BOUNDARY_POP_FLAG = 1e-6


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered states of one propagation run.

    ``states`` has shape (len(times), dim, dim); each entry is hermitized and
    validated (eigenvalues above -1e-7, trace within logged drift of one).
    ``boundary_flags`` marks samples with more than 1e-6 population on the top
    two Fock levels, where truncation artifacts start to matter.
    """

    model: SystemModel
    times: np.ndarray
    states: np.ndarray
    method: str
    trace_drift: np.ndarray = field(repr=False)
    min_eigenvalue: float
    boundary_flags: np.ndarray = field(repr=False)
    dt: float | None = None
    rel_tol: float | None = None

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def state(self, i: int) -> np.ndarray:
        return self.states[i]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _validate_states(model: SystemModel, times, raw_states, method, dt=None, rel_tol=None) -> Trajectory:
    times = np.asarray(times, dtype=float)
    states = []
    drift = []
    flags = []
    min_eig = np.inf
    for t, x in zip(times, raw_states):
        h = (x + x.conj().T) / 2.0
        tr = float(np.trace(h).real)
        drift.append(abs(tr - 1.0))
        if abs(tr - 1.0) > TRACE_FAIL:
            raise PropagationError(
                f"trace drift {abs(tr - 1.0):.3e} at t={t:g} exceeds {TRACE_FAIL:.0e}; "
                "the truncation is too small for this run"
            )
        lam = float(np.linalg.eigvalsh(h)[0])
        min_eig = min(min_eig, lam)
        if lam < PSD_FLOOR:
            raise PropagationError(
                f"positivity lost at t={t:g}: min eigenvalue {lam:.3e} below {PSD_FLOOR:.0e}"
            )
        flags.append(state_boundary_mass(h) > BOUNDARY_POP_FLAG)
        states.append(h)
    return Trajectory(
        model=model,
        times=times,
        states=np.asarray(states),
        method=method,
        trace_drift=np.asarray(drift),
        min_eigenvalue=float(min_eig),
        boundary_flags=np.asarray(flags),
        dt=dt,
        rel_tol=rel_tol,
    )


def propagate_expm(model: SystemModel, rho0, times) -> Trajectory:
    """Propagate with the exact flow map exp(dt * superoperator) step by step.

    ``times`` must be strictly increasing with times[0] >= 0. Uniform grids
    reuse a single step propagator.
    """
    rho0 = rho0 if isinstance(rho0, DensityOperator) else DensityOperator(rho0)
    if rho0.dim != model.dim:
        raise InvalidInputError("initial state dimension does not match the model")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise InvalidInputError("times must be a non-empty 1-d array")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise InvalidInputError("times must be strictly increasing with times[0] >= 0")

    sup = superoperator(model)
    v = vec(rho0.matrix)
    raw = []
    if times[0] == 0.0:
        raw.append(unvec(v, model.dim))
        rest = np.diff(times)
    else:
        rest = np.diff(np.concatenate([[0.0], times]))

    uniform = len(rest) > 0 and np.allclose(rest, rest[0], rtol=1e-12, atol=1e-15)
    if uniform:
        step = sup.propagator(float(rest[0]))
        for _ in rest:
            v = step @ v
            raw.append(unvec(v, model.dim))
    else:
        for dt in rest:
            v = sup.propagator(float(dt)) @ v
            raw.append(unvec(v, model.dim))
    dt_meta = float(rest[0]) if uniform and len(rest) else None
    return _validate_states(model, times, raw, method="expm", dt=dt_meta)


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def propagate_rk(model: SystemModel, rho0, t_end: float, rel_tol: float) -> Trajectory:
    """Adaptive embedded Runge-Kutta integration of the master equation.

    The local error is controlled per unit time, so the end-to-end deviation
    from the exact flow stays near ``rel_tol``. Steps whose hermitized result
    dips below the -1e-7 positivity floor are rejected and halved; step
    underflow below 1e-12 raises a stiffness error naming the time.
    """
    if not (1e-12 <= rel_tol <= 1e-3):
        raise InvalidInputError("rel_tol must lie in [1e-12, 1e-3]")
    if t_end <= 0:
        raise InvalidInputError("t_end must be positive")
    rho0 = rho0 if isinstance(rho0, DensityOperator) else DensityOperator(rho0)
    if rho0.dim != model.dim:
        raise InvalidInputError("initial state dimension does not match the model")

    gen_scale = operator_norm(model.hamiltonian) + sum(
        operator_norm(l) ** 2 for l in model.couplings
    )
    dt = min(t_end, 0.1 / max(gen_scale, 1.0))
    t = 0.0
    y = rho0.matrix.astype(complex)
    times = [0.0]
    raw = [y]
    while t < t_end:
        dt = min(dt, t_end - t)
        if dt < 1e-12:
            raise StiffnessError(f"step size underflow at t={t:g}", time=t)
        k = []
        for i in range(7):
            yi = y
            for aij, kj in zip(_DP_A[i], k):
                yi = yi + dt * aij * kj
            k.append(predual_generator(model, yi))
        y5 = y + dt * sum(b * kj for b, kj in zip(_DP_B5, k))
        y4 = y + dt * sum(b * kj for b, kj in zip(_DP_B4, k))
        err = float(np.linalg.norm(y5 - y4)) / max(1.0, float(np.linalg.norm(y5)))
        tol_step = rel_tol * dt / max(t_end, 1.0)
        if err > tol_step:
            dt *= max(0.2, 0.9 * (tol_step / err) ** 0.2)
            continue
        cand = (y5 + y5.conj().T) / 2.0
        lam = float(np.linalg.eigvalsh(cand)[0])
        if lam < PSD_FLOOR:
            dt *= 0.5
            continue
        t += dt
        y = cand
        times.append(t)
        raw.append(y)
        if err > 0:
            dt *= min(5.0, max(0.2, 0.9 * (tol_step / err) ** 0.2))
        else:
            dt *= 5.0
    return _validate_states(model, times, raw, method="rk", rel_tol=rel_tol)


def expectations(traj: Trajectory, observables: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Series tr(A rho_t) for each named observable.

    Hermitian observables give real series; residual imaginary parts above
    1e-10 are treated as an error. Non-Hermitian observables give complex
    series.
    """
    out: dict[str, np.ndarray] = {}
    for name, a in observables.items():
        a = np.asarray(a, dtype=complex)
        if a.shape != (traj.dim, traj.dim):
            raise InvalidInputError(f"observable {name!r} has wrong shape {a.shape}")
        series = np.einsum("ij,tji->t", a, traj.states)
        is_herm = operator_norm(a - a.conj().T) <= 1e-10 * max(1.0, operator_norm(a))
        if is_herm:
            worst = float(np.abs(series.imag).max())
            if worst > 1e-10:
                raise PropagationError(
                    f"Hermitian observable {name!r} produced imaginary part {worst:.3e}"
                )
            out[name] = series.real
        else:
            out[name] = series
    return out


def drift_residual(traj: Trajectory, x) -> np.ndarray:
    """Check d/dt tr(X rho_t) against tr(L(X) rho_t) on a uniform grid.

    Returns the absolute gap between the central difference of the observable
    series and the generator pairing at every interior sample. The finite
    difference carries an O(dt^2) truncation error of its own.
    """
    if len(traj) < 3:
        raise InvalidInputError("drift residual needs at least 3 samples")
    dts = np.diff(traj.times)
    dt = dts[0]
    if not np.allclose(dts, dt, rtol=1e-9, atol=1e-12):
        raise InvalidInputError("drift residual needs uniformly spaced samples")
    x = np.asarray(x, dtype=complex)
    series = np.einsum("ij,tji->t", x, traj.states)
    lx = adjoint_generator(traj.model, x)
    paired = np.einsum("ij,tji->t", lx, traj.states)
    fd = (series[2:] - series[:-2]) / (2.0 * dt)
    return np.abs(fd - paired[1:-1])


def apply_flow(model: SystemModel, operator: np.ndarray, t: float) -> np.ndarray:
    """Apply exp(t * Lstar) to an arbitrary operator (not necessarily a state).

    Useful for contractivity checks on differences of states.
    """
    sup = superoperator(model)
    return unvec(sup.propagator(t) @ vec(operator), model.dim)

"""Scenario documents: JSON descriptions of a model, its states, and a run.

Operators are lists of terms ``{"coeff": [re, im], "ops": [tokens]}`` with
tokens in {"a", "ad", "n", "id"}; the token matrices multiply left to right,
so ["ad", "a", "ad"] means the product a† a a†. Complex scalars are
two-element [re, im] arrays throughout. Initial and reference states are
named constructors: number, coherent, cat, or an explicit matrix.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field

import numpy as np

from . import DEFAULT_SEED
from .errors import QdsError, ScenarioError
from .fock import cat_vectors, coherent_vector, ladder, number_op
from .gksl import DensityOperator, SystemModel

OP_TOKENS = ("a", "ad", "n", "id")

DEFAULT_TOLERANCES = {
    "psd_tol": 1e-9,
    "gap_tol": None,
    "null_tol": None,
    "boundary_levels": 2,
    "tail_tol": 1e-10,
}


@dataclass(frozen=True)
class Scenario:
    """Fully validated scenario: every expression expanded to a matrix."""

    name: str
    dim: int
    tail_tol: float
    seed: int
    hamiltonian: np.ndarray
    couplings: tuple[np.ndarray, ...]
    lyapunov_candidates: dict[str, np.ndarray]
    observables: dict[str, np.ndarray]
    initial_states: tuple[tuple[str, DensityOperator], ...]
    reference_states: tuple[tuple[str, np.ndarray], ...]
    times: np.ndarray
    tolerances: dict
    info: dict = field(default_factory=dict)

    @functools.cached_property
    def model(self) -> SystemModel:
        return SystemModel(
            dim=self.dim,
            hamiltonian=self.hamiltonian,
            couplings=self.couplings,
            label=self.name,
        )

    @property
    def lyapunov(self) -> np.ndarray:
        """The first (primary) Lyapunov candidate."""
        return next(iter(self.lyapunov_candidates.values()))


def _complex_scalar(value, path: str) -> complex:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ScenarioError(f"{path}: complex scalars are [re, im] pairs, got {value!r}", path=path)
    re, im = value
    if not all(isinstance(x, (int, float)) for x in (re, im)):
        raise ScenarioError(f"{path}: complex parts must be numbers", path=path)
    return complex(re, im)


def _fmt_c(z: complex) -> str:
    if z.imag == 0:
        return f"{z.real:g}"
    return f"{z.real:g}{z.imag:+g}j"


def _token_matrices(dim: int) -> dict[str, np.ndarray]:
    a = ladder(dim)
    return {"a": a, "ad": a.conj().T, "n": number_op(dim), "id": np.eye(dim, dtype=complex)}


def expand_operator(terms, dim: int, path: str = "operator") -> np.ndarray:
    """Expand a term list into a dim x dim matrix (empty list means zero)."""
    if not isinstance(terms, list):
        raise ScenarioError(f"{path}: expected a list of terms", path=path)
    toks = _token_matrices(dim)
    out = np.zeros((dim, dim), dtype=complex)
    for i, term in enumerate(terms):
        tpath = f"{path}[{i}]"
        if not isinstance(term, dict) or "coeff" not in term or "ops" not in term:
            raise ScenarioError(f"{tpath}: terms need 'coeff' and 'ops'", path=tpath)
        coeff = _complex_scalar(term["coeff"], f"{tpath}.coeff")
        prod = np.eye(dim, dtype=complex)
        for j, tok in enumerate(term["ops"]):
            if tok not in toks:
                raise ScenarioError(
                    f"{tpath}.ops[{j}]: unknown symbol {tok!r}; tokens are {OP_TOKENS}",
                    path=f"{tpath}.ops[{j}]",
                )
            prod = prod @ toks[tok]
        out = out + coeff * prod
    return out


def _build_state(spec, dim: int, tail_tol: float, path: str) -> tuple[str, DensityOperator]:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ScenarioError(f"{path}: states need a 'type' field", path=path)
    kind = spec["type"]
    name = spec.get("name")
    if kind == "number":
        n = spec.get("n")
        if not isinstance(n, int) or not (0 <= n < dim):
            raise ScenarioError(f"{path}: number state needs integer 0 <= n < dim", path=path)
        v = np.zeros(dim, dtype=complex)
        v[n] = 1.0
        return name or f"n{n}", DensityOperator.from_vector(v)
    if kind == "coherent":
        alpha = _complex_scalar(spec.get("alpha", [0, 0]), f"{path}.alpha")
        v = coherent_vector(dim, alpha, tail_tol)
        return name or f"coh({_fmt_c(alpha)})", DensityOperator.from_vector(v)
    if kind == "cat":
        alpha = _complex_scalar(spec.get("alpha", [0, 0]), f"{path}.alpha")
        parity = spec.get("parity", "even")
        even, odd = cat_vectors(dim, alpha, tail_tol)
        if parity == "even":
            return name or f"cat+({_fmt_c(alpha)})", DensityOperator.from_vector(even)
        if parity == "odd":
            if odd is None:
                raise ScenarioError(f"{path}: odd cat degenerates at alpha = 0", path=path)
            return name or f"cat-({_fmt_c(alpha)})", DensityOperator.from_vector(odd)
        raise ScenarioError(f"{path}: parity must be 'even' or 'odd'", path=path)
    if kind == "matrix":
        data = spec.get("data")
        try:
            rows = [[_complex_scalar(x, f"{path}.data") for x in row] for row in data]
        except TypeError as exc:
            raise ScenarioError(f"{path}: matrix data must be nested [re, im] pairs", path=path) from exc
        m = np.asarray(rows, dtype=complex)
        if m.shape != (dim, dim):
            raise ScenarioError(
                f"{path}: matrix state has shape {m.shape}, scenario dim is {dim}", path=path
            )
        return name or "matrix", DensityOperator(m)
    raise ScenarioError(f"{path}: unknown state type {kind!r}", path=path)


def _build_vector(spec, dim: int, tail_tol: float, path: str) -> tuple[str, np.ndarray]:
    name, state = _build_state(spec, dim, tail_tol, path)
    w, vecs = np.linalg.eigh(state.matrix)
    if w[-1] < 1.0 - 1e-9:
        raise ScenarioError(f"{path}: reference states must be pure", path=path)
    return name, vecs[:, -1]


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate a scenario document.

    Syntax errors carry the line and column from the JSON decoder; semantic
    errors carry the JSON path of the offending field.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"scenario syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            line=exc.lineno,
            column=exc.colno,
        ) from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")

    name = raw.get("name", "scenario")
    dim = raw.get("dim")
    if not isinstance(dim, int) or dim < 2:
        raise ScenarioError("dim: must be an integer >= 2", path="dim")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(raw.get("tolerances", {}))
    tail_tol = float(raw.get("tail_tol", tolerances["tail_tol"]))
    seed = int(raw.get("seed", DEFAULT_SEED))

    hamiltonian = expand_operator(raw.get("hamiltonian", []), dim, "hamiltonian")
    couplings = tuple(
        expand_operator(terms, dim, f"couplings[{i}]")
        for i, terms in enumerate(raw.get("couplings", []))
    )
    lyapunov = {
        str(k): expand_operator(v, dim, f"lyapunov.{k}")
        for k, v in raw.get("lyapunov", {}).items()
    }
    observables = {
        str(k): expand_operator(v, dim, f"observables.{k}")
        for k, v in raw.get("observables", {}).items()
    }
    initial = tuple(
        _build_state(s, dim, tail_tol, f"initial_states[{i}]")
        for i, s in enumerate(raw.get("initial_states", []))
    )
    reference = tuple(
        _build_vector(s, dim, tail_tol, f"reference_states[{i}]")
        for i, s in enumerate(raw.get("reference_states", []))
    )

    grid = raw.get("grid", {"start": 0.0, "stop": 8.0, "steps": 801})
    try:
        times = np.linspace(float(grid["start"]), float(grid["stop"]), int(grid["steps"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError("grid: needs numeric start/stop and integer steps", path="grid") from exc
    if len(times) < 1 or times[0] < 0 or (len(times) > 1 and times[1] <= times[0]):
        raise ScenarioError("grid: times must be ascending from t >= 0", path="grid")

    scenario = Scenario(
        name=str(name),
        dim=dim,
        tail_tol=tail_tol,
        seed=seed,
        hamiltonian=hamiltonian,
        couplings=couplings,
        lyapunov_candidates=lyapunov,
        observables=observables,
        initial_states=initial,
        reference_states=reference,
        times=times,
        tolerances=tolerances,
        info=raw.get("info", {}),
    )
    try:
        scenario.model  # a scenario must define a valid system model
    except QdsError as exc:
        raise ScenarioError(f"scenario does not define a valid model: {exc}") from exc
    return scenario


def scenario_with_overrides(
    text: str, seed: int | None = None, grid: tuple[float, float, int] | None = None,
    dim: int | None = None,
) -> Scenario:
    """Re-parse a scenario with command-line overrides applied to the raw document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"scenario syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            line=exc.lineno,
            column=exc.colno,
        ) from exc
    if seed is not None:
        raw["seed"] = seed
    if dim is not None:
        raw["dim"] = dim
    if grid is not None:
        raw["grid"] = {"start": grid[0], "stop": grid[1], "steps": grid[2]}
    return parse_scenario(json.dumps(raw))

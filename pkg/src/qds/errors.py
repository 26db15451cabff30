"""Exception types shared across the toolkit."""


class QdsError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(QdsError, ValueError):
    """Malformed or out-of-contract input: non-finite entries, bad shapes, bad ranges."""


class ContractViolationError(QdsError, ValueError):
    """Numerical precondition violated, e.g. Hermiticity or positivity beyond tolerance."""


class TruncationTooSmallError(QdsError, ValueError):
    """Fock-space cutoff too small to hold the requested state."""

    def __init__(self, message, required_dim=None):
        super().__init__(message)
        self.required_dim = required_dim


class ResourceLimitError(QdsError):
    """Problem size exceeds what a routine is built for."""


class StiffnessError(QdsError, RuntimeError):
    """Adaptive integrator step size underflowed."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class PropagationError(QdsError, RuntimeError):
    """A propagated state lost trace or positivity beyond the allowed drift."""


class DegenerateGroundSetError(QdsError, ValueError):
    """Operator has a single spectral cluster; every state is a ground state."""


class ScenarioError(QdsError, ValueError):
    """Scenario document cannot be parsed or validated."""

    def __init__(self, message, line=None, column=None, path=None):
        super().__init__(message)
        self.line = line
        self.column = column
        self.path = path

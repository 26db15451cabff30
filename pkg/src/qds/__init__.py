"""Numerical stability analysis for quantum dynamical semigroups.

The toolkit simulates GKSL master equations on truncated Fock spaces, finds
invariant density operators, and evaluates Lyapunov and invariance-principle
stability certificates with quantitative trace-norm distance brackets.
"""

__version__ = "0.1.0"

# Default seed for every randomized routine in the package.
DEFAULT_SEED = 0x5EED

from .gksl import DensityOperator, SystemModel  # noqa: E402,F401

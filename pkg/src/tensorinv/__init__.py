"""Exact tensor invariants of two-degree-of-freedom Hamiltonian flows.

Modules
-------
funcalg
    Ring of generalized polynomials ``q^a p^b r^e rho^m exp(l.q)`` over Q(sqrt(d)).
tensor
    Tensor fields on R^4 with Lie derivatives, Schouten brackets and forms.
systems
    Registered Hamiltonians with their known invariants and exact checks.
invariance
    Ansatz-based solver for ``L_X P' = 0`` and Jacobi analysis of the result.
integrate
    Fixed-step integrators with tangent maps and drift diagnostics.
cli
    ``verify``, ``solve``, ``integrate`` and ``report`` commands.
"""

from .funcalg import (
    ConfigurationError,
    GeneralizedFunction,
    SingularityError,
    exp_linear,
    p1,
    p2,
    parse,
    q1,
    q2,
    r,
    rho_power,
)
from .integrate import IntegratorConfig, fd_lie_check, integrate_with_tangent, step
from .invariance import AnsatzSpec, jacobi_analysis, solve
from .systems import SYSTEM_NAMES, SystemDef, build_system, run_checks
from .tensor import (
    CANONICAL,
    ContractViolation,
    TensorField,
    bivector,
    lie_derivative,
    schouten_bracket,
    two_form,
    vector,
    wedge,
)

__all__ = [
    "AnsatzSpec",
    "CANONICAL",
    "ConfigurationError",
    "ContractViolation",
    "GeneralizedFunction",
    "IntegratorConfig",
    "SYSTEM_NAMES",
    "SingularityError",
    "SystemDef",
    "TensorField",
    "bivector",
    "build_system",
    "exp_linear",
    "fd_lie_check",
    "integrate_with_tangent",
    "jacobi_analysis",
    "lie_derivative",
    "p1",
    "p2",
    "parse",
    "q1",
    "q2",
    "r",
    "rho_power",
    "run_checks",
    "schouten_bracket",
    "solve",
    "step",
    "two_form",
    "vector",
    "wedge",
]

__version__ = "0.1.0"

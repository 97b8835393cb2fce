"""Toolkit for sum-of-submodular energies: exact minimization by
submodular flow, and large-margin structured learning of the clique
potentials with a cutting-plane solver."""

from .energy import (
    K_MAX,
    CliqueFunction,
    SoSEnergy,
    brute_force_minimize,
    evaluate,
    is_submodular,
    shift_to_nonnegative,
)
from .flow import MinCutResult, minimize

__version__ = "0.1.0"

__all__ = [
    "K_MAX",
    "CliqueFunction",
    "SoSEnergy",
    "evaluate",
    "is_submodular",
    "brute_force_minimize",
    "shift_to_nonnegative",
    "minimize",
    "MinCutResult",
    "__version__",
]

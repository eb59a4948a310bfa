"""selfsim: numerics for parametrised self-similar measures.

Construction and decomposition of self-similar measures into random infinite
convolutions, Fourier decay estimation with certified tails, Erdos-Kahane
digit counting, transversality certification on parameter intervals, and
absolute-continuity diagnostics for projections of planar systems.
"""

__version__ = "0.1.0"

from .errors import CapExceededError, ConfigError, DegenerateModelError
from .ifs_core import IFS, Similitude, compose_at_zero, delta_n, similarity_dimension
from .measures import AtomicMeasure, atomic, convolve_atomic, dirac, scale_push

__all__ = [
    "__version__",
    "AtomicMeasure",
    "CapExceededError",
    "ConfigError",
    "DegenerateModelError",
    "IFS",
    "Similitude",
    "atomic",
    "compose_at_zero",
    "convolve_atomic",
    "delta_n",
    "dirac",
    "scale_push",
    "similarity_dimension",
]

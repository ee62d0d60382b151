"""Self-expressive sparse subspace clustering toolkit.

Pipeline: solve an l1 self-expression program for the coefficient matrix
(``solver``), turn it into a similarity graph and spectral segmentation
(``spectral``), check the geometric recovery conditions (``theory``), and
reproduce the synthetic angle/density benchmark (``synth``). ``dataio``
holds the file formats and projections, ``cli`` the command-line front
end.
"""

from .core import (
    ClusteringResult,
    CoefficientMatrix,
    DataMatrix,
    ProblemSpec,
    SubspaceArrangement,
    Variant,
    normalize_unit_columns,
    validate,
)
from .solver import AdmmConfig, SolveDiagnostics, SolveResult, solve

__all__ = [
    "AdmmConfig",
    "ClusteringResult",
    "CoefficientMatrix",
    "DataMatrix",
    "ProblemSpec",
    "SolveDiagnostics",
    "SolveResult",
    "SubspaceArrangement",
    "Variant",
    "normalize_unit_columns",
    "solve",
    "validate",
]

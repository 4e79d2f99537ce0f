"""Pseudospectra of low-rank matrices through 2r x 2r eigenproblems."""

from .errors import (
    CapExceededError,
    ConvergenceError,
    DerivativeUndefinedError,
    EigensolveError,
    IrregularPencilError,
    LowpsError,
    NotStableError,
    ParseError,
    PreconditionError,
)
from .grid import GridSpec
from .lowrank import (
    EigenPair,
    Gram,
    LowRankFactors,
    ReducedMatrix,
    build_reduced,
    dmu_domega,
    dmu_dphi,
    mu,
    mu_many,
    mu_via_gep,
    mu_via_qep,
    power_norms,
    transient_constants,
)
from .boundary import (
    CircleIntersections,
    LineIntersections,
    StabilityReport,
    circle_intersections,
    distance_to_instability,
    kreiss_continuous,
    kreiss_discrete,
    kreiss_transient_bounds,
    line_intersections,
    pseudospectral_abscissa,
    pseudospectral_radius,
)

__version__ = "0.1.0"

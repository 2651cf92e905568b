"""fpplab: a desk-scale laboratory for critical first-passage percolation on
the square lattice and for exact analysis of independent nonnegative sums
conditioned to be small.

Subpackage map:

* ``lattice``     -- geometry: vertices, edges, boxes, annuli, paths,
                     circuits, duality, weight configurations
* ``weights``     -- parametric edge-weight laws (atoms + uniform pieces),
                     exact quantiles, criticality classification, sampling
* ``passage``     -- first-passage metric (multi-source shortest paths with
                     deterministic geodesics)
* ``circuits``    -- zero-weight circuit detection/extraction and the
                     annulus-indexed decomposition of boundary passage times
* ``percolation`` -- Bernoulli-percolation estimators: crossings, finite-size
                     correlation length, four-arm events, the window-edge
                     detector
* ``conditional`` -- rare-event rejection sampling for conditioned weight
                     ensembles and product-measure factorization checks
* ``condsum``     -- exact rational engine for sums conditioned to be small:
                     conditional laws, resampling bound, parity limits
* ``partitions``  -- exact integer-partition counting and the related
                     sandwich/criteria instruments
* ``cli``         -- the ``fpplab`` command line front door
"""

__version__ = "0.1.0"

from .errors import (
    ConfigValidationError,
    EmptyConditioningError,
    GridOverflowError,
    RareConditioningError,
    UndecidableTailError,
)

__all__ = [
    "__version__",
    "ConfigValidationError",
    "EmptyConditioningError",
    "GridOverflowError",
    "RareConditioningError",
    "UndecidableTailError",
]

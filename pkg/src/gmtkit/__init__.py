"""gmtkit: a numerical toolkit for measure-theoretic real analysis.

Modules
-------
grids       uniform-lattice scalar samples and boolean masks
measures    finite atomic signed/vector measures and their decompositions
hausdorff   premeasures, box-counting dimension, IFS attractors
pointwise   derivatives, densities, approximate limits, Lebesgue points
smoothing   mollifiers, mollification, weak-derivative certification
sobolev_bv  Sobolev norms, embedding checks, BV variation and perimeter
area        linear/parametric area formulas, multiplicity, substitution
cli         batch front end (JSON/CSV reports, SVG plots)
"""

__version__ = "0.1.0"

from . import area, hausdorff, measures, pointwise, smoothing, sobolev_bv
from .grids import GridFunction, RasterSet

__all__ = [
    "GridFunction",
    "RasterSet",
    "area",
    "hausdorff",
    "measures",
    "pointwise",
    "smoothing",
    "sobolev_bv",
    "__version__",
]

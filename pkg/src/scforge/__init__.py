"""scforge: discrete-class deformations of rank-two hypersurfaces from conjugate-net seeds.

The pipeline builds a hypersurface with a unique infinitesimal bending from a
seed of solutions of a second-order linear PDE, integrates the bending, forms
the family f_t = f + tT and certifies numerically that f_t and f_-t are a
non-congruent isometric pair outside the continuous class.

Modules, in pipeline order: :mod:`expr`, :mod:`grid`, :mod:`seed`,
:mod:`surfgeo`, :mod:`classify`, :mod:`hyper`, :mod:`bending`, :mod:`family`;
:mod:`config`, :mod:`pipeline`, :mod:`report` and :mod:`cli` form the user
surface.
"""

__version__ = "0.1.0"

from .config import RunConfig, load as load_config
from .errors import ScforgeError
from .grid import Field, Grid2
from .pipeline import run_grid
from .thresholds import DEFAULT as DEFAULT_THRESHOLDS, Thresholds

__all__ = ["__version__", "Grid2", "Field", "Thresholds", "DEFAULT_THRESHOLDS", "RunConfig", "load_config",
           "run_grid", "ScforgeError"]

"""ranktwo: birth-death chain analytics and rank-2 martingale simulation.

A simulation and exact-analytics toolkit for projection martingales
dZ = P(n) dW confined near surfaces, their embedded radial walks, and the
comparison birth-death chains that control absorption and occupation-time
growth.  Hot loops run in a compiled extension when available, with a
bit-identical pure-Python fallback.
"""

from ._engine import HAVE_COMPILED
from . import chain, coupling, envelope, geometry, martingale, pathstats

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "chain",
    "coupling",
    "envelope",
    "geometry",
    "martingale",
    "pathstats",
]

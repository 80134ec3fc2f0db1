"""Water diffusion with freeze-thaw in a visco-elasto-plastic porous solid.

Coupled mass / momentum / energy / phase system with Preisach capillary
hysteresis and elastoplastic hysteresis, solved by semi-implicit time
stepping with built-in structural diagnostics: energy ledger, dissipation
signs, phase confinement, temperature floor, and cut-off activity.
"""

__version__ = "0.1.0"

from . import hysteresis, materials, meshing, plasticity, scenario, solver

__all__ = [
    "__version__",
    "hysteresis",
    "materials",
    "meshing",
    "plasticity",
    "scenario",
    "solver",
]

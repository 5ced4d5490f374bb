"""
bousci - convex-integration laboratory for the 3D Boussinesq equation

Pseudo-spectral fields on the periodic box, the Mikado family, windowed
solvers and the stage-by-stage iteration with its diagnostics.
"""

__version__ = "0.1.0"

from bousci.core.config_manager import ConfigManager
from bousci.core.errors import BousciError

__all__ = ["ConfigManager", "BousciError", "__version__"]

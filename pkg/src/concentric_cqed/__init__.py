"""Near-concentric cavity QED toolkit: geometry, loss budget, spectra, fits, photon traces."""

from .budget import LossBudget, cooperativity
from .fitting import FitResult, least_squares
from .geometry import AtomModel, CavityGeometry, ideal_coupling, mode_properties
from .spectra import CoupledSystem, Spectrum, reflection, transmission
from .trace import PhotonTrace, TraceConfig

__all__ = [
    "AtomModel",
    "CavityGeometry",
    "CoupledSystem",
    "FitResult",
    "LossBudget",
    "PhotonTrace",
    "Spectrum",
    "TraceConfig",
    "cooperativity",
    "ideal_coupling",
    "least_squares",
    "mode_properties",
    "reflection",
    "transmission",
]

__version__ = "0.1.0"

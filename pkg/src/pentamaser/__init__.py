"""Simulation and analysis toolkit for a room-temperature pentacene maser.

Submodules
----------
spin        triplet spin Hamiltonian, energy levels and transitions
geometry    crystal mounting and doping-site frames
spectra     field-swept trEPR spectra and rotation patterns
pump        optical pumping and inverted-spin bookkeeping
dynamics    Maxwell-Bloch cavity/spin-ensemble dynamics
metrics     closed-form maser figures of merit
fitting     least-squares estimators for characterisation data
config      YAML run configuration
cli         command-line front end
"""

__version__ = "0.1.0"

from .errors import NumericalError, PentamaserError, ValidationError  # noqa: E402
from .spin import SpinSystem, energy_levels  # noqa: E402

__all__ = ["__version__", "PentamaserError", "ValidationError", "NumericalError", "SpinSystem", "energy_levels"]

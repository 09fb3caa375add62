"""Pseudo-spectral simulator and verification harness for the 3D primitive
equations with horizontal viscosity and vertical diffusivity."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .spectral import Grid, SpectralField3D, HorizontalField, forward, inverse, transform
from .state import Params, State, make_initial_data, project_symmetry, project_barotropic
from .dynamics import BlowUpError, Integrator, rhs, run, step, map_half_full
from .monitors import MonitorRecord, GronwallInstance, gronwall_bound, monitor_report

__all__ = [
    "Grid", "SpectralField3D", "HorizontalField", "forward", "inverse", "transform",
    "Params", "State", "make_initial_data", "project_symmetry", "project_barotropic",
    "BlowUpError", "Integrator", "rhs", "run", "step", "map_half_full",
    "MonitorRecord", "GronwallInstance", "gronwall_bound", "monitor_report",
]

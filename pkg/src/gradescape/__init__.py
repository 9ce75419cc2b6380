"""gradescape: noise-perturbed gradient-flow simulation and scaling experiments."""

__version__ = "0.1.0"

from . import experiments, flow, landscape, saddle_analysis, sde  # noqa: F401

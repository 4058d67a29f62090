"""Exit measures of critical (1+beta)-stable branching Brownian motion in the unit ball."""
from .branching_sim import SimConfig, Trajectory, ValidationError, run_replica, run_replicas
from .io import tool_version

__all__ = ["SimConfig", "Trajectory", "ValidationError", "run_replica", "run_replicas"]
__version__ = tool_version()

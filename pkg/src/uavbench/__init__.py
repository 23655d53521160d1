"""Closed-loop benchmark harness and ground-drone bridge for short-range,
language-conditioned UAV flight tasks."""

from uavbench.errors import HarnessError, Timeout

__all__ = ["HarnessError", "Timeout"]
__version__ = "0.1.0"

"""Trace-driven simulator for scheduling analytic applications composed of
core and elastic components, with flexible, rigid and malleable schedulers
and a catalog of size-based sorting policies."""

from .domain import (
    Assignment,
    ClusterSpec,
    RequestRejected,
    RequestSpec,
    ResourceVector,
    RunState,
    SimulationError,
    ValidationError,
    fits,
)
from .engine import SimResult, advance_progress, next_departure, run
from .policy import PolicyId, SortKey, order, parse_policy, sort_key
from .schedulers import make_scheduler
from .workload import WorkloadSpec, default_spec, generate, read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "ClusterSpec",
    "PolicyId",
    "RequestRejected",
    "RequestSpec",
    "ResourceVector",
    "RunState",
    "SimResult",
    "SimulationError",
    "SortKey",
    "ValidationError",
    "WorkloadSpec",
    "advance_progress",
    "default_spec",
    "fits",
    "generate",
    "make_scheduler",
    "next_departure",
    "order",
    "parse_policy",
    "read_trace",
    "run",
    "sort_key",
    "write_trace",
    "__version__",
]

"""Core value types: resources, requests, execution state, cluster, assignments.

All quantities live in an aggregate two-dimensional resource pool
(fractional CPU cores, RAM megabytes).  There is no per-machine placement:
the cluster is one pool and the scheduler's output is a virtual assignment
of whole components to requests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Absolute tolerance for all fractional resource/time comparisons.  Integer
# valued instances stay exact; this only absorbs binary-float dust.
EPS = 1e-9

APP_CLASSES = ("batch_elastic", "batch_rigid", "interactive")


class ValidationError(ValueError):
    """Malformed input: request fields, trace rows, distributions, config."""


class RequestRejected(Exception):
    """A request whose core components can never fit the cluster."""

    def __init__(self, request_id: int, reason: str):
        self.request_id = request_id
        self.reason = reason
        super().__init__(f"request {request_id} rejected: {reason}")


class InvariantViolation(RuntimeError):
    """Internal state broke a documented invariant (always a bug)."""


class SimulationError(RuntimeError):
    """A simulation cannot make progress (e.g. a permanently blocked request)."""


@dataclass(frozen=True, slots=True)
class ResourceVector:
    """A two-dimensional resource quantity: cpu cores and RAM in MB."""

    cpu: float
    ram: float

    def validate(self) -> "ResourceVector":
        if not (math.isfinite(self.cpu) and math.isfinite(self.ram)):
            raise ValidationError(f"resource vector must be finite, got {self}")
        if self.cpu < 0 or self.ram < 0:
            raise ValidationError(f"resource vector must be non-negative, got {self}")
        return self

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu + other.cpu, self.ram + other.ram)

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu - other.cpu, self.ram - other.ram)

    def scale(self, k: float) -> "ResourceVector":
        return ResourceVector(self.cpu * k, self.ram * k)


def fits(demand: ResourceVector, capacity: ResourceVector) -> bool:
    """Component-wise containment; an exact fit counts as fitting."""
    return demand.cpu <= capacity.cpu + EPS and demand.ram <= capacity.ram + EPS


@dataclass(frozen=True, slots=True)
class RequestSpec:
    """An analytic application request as read from a trace or generator.

    A request needs ``n_core`` core components to produce any work and can
    additionally use up to ``n_elastic`` elastic components; every component
    of one request has the same per-component demand.
    """

    id: int
    submit_time: float
    app_class: str
    n_core: int
    n_elastic: int
    per_component: ResourceVector
    nominal_runtime: float
    priority_class: int = 0

    def validate(self) -> "RequestSpec":
        if self.id < 0:
            raise ValidationError(f"request id must be >= 0, got {self.id}")
        if not math.isfinite(self.submit_time) or self.submit_time < 0:
            raise ValidationError(f"request {self.id}: bad submit_time {self.submit_time}")
        if self.app_class not in APP_CLASSES:
            raise ValidationError(f"request {self.id}: unknown class {self.app_class!r}")
        if self.n_core < 1:
            raise ValidationError(f"request {self.id}: n_core must be >= 1")
        if self.n_elastic < 0:
            raise ValidationError(f"request {self.id}: n_elastic must be >= 0")
        if self.app_class == "batch_rigid" and self.n_elastic != 0:
            raise ValidationError(f"request {self.id}: batch_rigid must have n_elastic = 0")
        if not math.isfinite(self.nominal_runtime) or self.nominal_runtime <= 0:
            raise ValidationError(f"request {self.id}: nominal_runtime must be > 0")
        self.per_component.validate()
        return self

    @property
    def total_components(self) -> int:
        return self.n_core + self.n_elastic

    @property
    def total_work(self) -> float:
        """Work in component-seconds: runtime times component count."""
        return self.nominal_runtime * self.total_components

    def core_demand(self) -> ResourceVector:
        return self.per_component.scale(self.n_core)

    def full_demand(self) -> ResourceVector:
        return self.per_component.scale(self.total_components)


@dataclass(slots=True)
class RunState:
    """Mutable execution record for one request.

    Progress is measured in component-seconds and advances at a rate equal
    to the number of allocated components (cores plus granted elastic).
    """

    request_id: int
    n_core: int
    n_elastic: int
    total_work: float
    progress: float = 0.0
    granted_elastic: int = 0
    last_update: float = 0.0
    start_time: float | None = None
    finish_time: float | None = None

    @property
    def rate(self) -> int:
        return self.n_core + self.granted_elastic

    @property
    def remaining_work(self) -> float:
        return self.total_work - self.progress


@dataclass(frozen=True, slots=True)
class ClusterSpec:
    """A homogeneous cluster modeled as one aggregate resource pool."""

    n_machines: int
    per_machine: ResourceVector

    def validate(self) -> "ClusterSpec":
        if self.n_machines < 1:
            raise ValidationError(f"n_machines must be >= 1, got {self.n_machines}")
        self.per_machine.validate()
        total = self.total()
        if total.cpu <= 0 or total.ram <= 0:
            raise ValidationError("cluster capacity must be positive in both dimensions")
        return self

    def total(self) -> ResourceVector:
        return self.per_machine.scale(self.n_machines)


@dataclass(frozen=True, slots=True)
class Assignment:
    """Virtual assignment: granted elastic count per serving request.

    ``allocated`` is the aggregate resource footprint of the serving set,
    cores included; it always fits the cluster capacity.
    """

    granted: dict[int, int] = field(default_factory=dict)
    allocated: ResourceVector = ResourceVector(0.0, 0.0)

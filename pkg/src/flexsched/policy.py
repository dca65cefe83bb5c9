"""Sorting disciplines for the waiting line and the serving set.

Five families (fifo, sjf, srpt1, srpt2, hrrn), each computable with a
one-, two- or three-dimensional notion of request size:

  * 1d uses time only (runtime, remaining runtime, response ratio),
  * 2d multiplies by the number of requested services,
  * 3d multiplies by the summed cpu*ram footprint of those services.

srpt2 differs from srpt1 only by counting services not yet scheduled
(requested minus currently granted elastic) instead of all requested ones.
Priority class always dominates the size value; ties fall back to arrival
time and then request id, so any two keys compare deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import EPS, RequestSpec, RunState, ValidationError

FAMILIES = ("fifo", "sjf", "srpt1", "srpt2", "hrrn")
DIMS = (1, 2, 3)


@dataclass(frozen=True, slots=True)
class PolicyId:
    """A sorting policy: family plus size dimensionality (fifo ignores it)."""

    family: str
    dim: int = 1

    def validate(self) -> "PolicyId":
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown policy family {self.family!r}")
        if self.dim not in DIMS:
            raise ValidationError(f"policy dimensionality must be 1, 2 or 3, got {self.dim}")
        return self

    @property
    def name(self) -> str:
        return "fifo" if self.family == "fifo" else f"{self.family}-{self.dim}d"

    @property
    def largest_first(self) -> bool:
        """hrrn serves the highest response ratio first; the rest smallest-first."""
        return self.family == "hrrn"


def parse_policy(name: str) -> PolicyId:
    """Parse a config string like ``sjf``, ``srpt1-2d`` or ``hrrn-3d``."""
    text = name.strip().lower()
    dim = 1
    for suffix, d in (("-1d", 1), ("-2d", 2), ("-3d", 3)):
        if text.endswith(suffix):
            text, dim = text[: -len(suffix)], d
            break
    if text == "fifo":
        dim = 1
    return PolicyId(text, dim).validate()


@dataclass(frozen=True, slots=True)
class SortKey:
    """Comparable priority of one request under one policy at one instant."""

    class_rank: int
    value: float
    arrival: float
    id: int
    largest_first: bool = False

    def ordering(self) -> tuple:
        """Tuple whose ascending order is the service order."""
        v = -self.value if self.largest_first else self.value
        return (-self.class_rank, v, self.arrival, self.id)

    def __lt__(self, other: "SortKey") -> bool:
        return self.ordering() < other.ordering()


def _size_factors(policy: PolicyId, req: RequestSpec, unscheduled: int) -> tuple[float, float]:
    """(requested-services size, yet-to-be-scheduled size) for the policy dim."""
    if policy.dim == 1:
        return 1.0, 1.0
    if policy.dim == 2:
        return float(req.total_components), float(unscheduled)
    per = req.per_component.cpu * req.per_component.ram
    return req.total_components * per, unscheduled * per


def policy_value(policy: PolicyId, req: RequestSpec, run: RunState | None, now: float) -> float:
    """The raw size value of one request under a policy.

    Pass ``run`` only while the request is being served: remaining runtime
    then shrinks with progress, the unscheduled-service count shrinks with
    grants, and the wait time stays frozen at the admission instant.
    """
    if policy.family == "fifo":
        return req.submit_time
    if run is not None and run.start_time is not None:
        remaining = run.remaining_work / req.total_components
        unscheduled = req.total_components - run.granted_elastic
        wait = run.start_time - req.submit_time
    else:
        remaining = req.nominal_runtime
        unscheduled = req.total_components
        wait = now - req.submit_time
        if wait < -EPS:
            raise ValidationError(
                f"request {req.id}: wait time is negative (now={now} < submit={req.submit_time})"
            )
        wait = max(wait, 0.0)
    size, unsched_size = _size_factors(policy, req, unscheduled)
    family = policy.family
    if family == "sjf":
        return req.nominal_runtime * size
    if family == "srpt1":
        return remaining * size
    if family == "srpt2":
        return remaining * unsched_size
    return (1.0 + wait / req.nominal_runtime) * size  # hrrn


def sort_key(policy: PolicyId, req: RequestSpec, run: RunState | None, now: float) -> SortKey:
    return SortKey(
        class_rank=req.priority_class,
        value=policy_value(policy, req, run, now),
        arrival=req.submit_time,
        id=req.id,
        largest_first=policy.largest_first,
    )


def key_tuple(policy: PolicyId, req: RequestSpec, run: RunState | None, now: float) -> tuple:
    """Fast path equivalent to ``sort_key(...).ordering()``."""
    v = policy_value(policy, req, run, now)
    if policy.largest_first:
        v = -v
    return (-req.priority_class, v, req.submit_time, req.id)


def order(
    policy: PolicyId,
    requests: list[RequestSpec],
    states: dict[int, RunState] | None,
    now: float,
) -> list[RequestSpec]:
    """Stable total service order; ``states`` maps the serving requests."""
    states = states or {}
    return sorted(requests, key=lambda r: key_tuple(policy, r, states.get(r.id), now))


def static_queue_key(policy: PolicyId) -> bool:
    """Whether a queued (never-served) request's key is independent of time."""
    return policy.family != "hrrn"


def hrrn_coefficients(policy: PolicyId, req: RequestSpec) -> tuple[float, float]:
    """(size, slope) so that a queued hrrn value is size + slope * wait."""
    size, _ = _size_factors(policy, req, req.total_components)
    return size, size / req.nominal_runtime

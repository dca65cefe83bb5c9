"""Deterministic trace-driven discrete-event simulation loop.

Events are (time, kind, request id, stamp) tuples popped from a binary
heap: departures outrank arrivals at equal times so freed resources are
visible to a simultaneous arrival, and same-time same-kind events are
processed in request-id order.  Each scheduled departure is stamped with
the grant revision it was computed under: when grants change, a fresh
stamped event supersedes the old one, which is simply skipped when popped.
Two runs over identical inputs produce byte-identical results.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .domain import (
    ClusterSpec,
    InvariantViolation,
    RequestRejected,
    RequestSpec,
    RunState,
    SimulationError,
)
from .policy import PolicyId, parse_policy
from .schedulers import Scheduler, make_scheduler

_DEPARTURE = 0
_ARRIVAL = 1


def conservation_tolerance(total_work: float) -> float:
    # 1e-9 absolute, plus headroom for float accumulation on large work values
    return 1e-9 + 1e-12 * total_work


def advance_progress(states: Iterable[RunState], t_from: float, t_to: float,
                     tol: float | None = None) -> None:
    """Integrate work for serving requests over an interval of constant grants."""
    dt = t_to - t_from
    if dt < 0:
        raise InvariantViolation(f"time ran backwards: {t_from} -> {t_to}")
    if dt == 0:
        return
    for run in states:
        run.progress += (run.n_core + run.granted_elastic) * dt
        run.last_update = t_to
        limit = tol if tol is not None else conservation_tolerance(run.total_work)
        if run.progress > run.total_work + limit:
            raise InvariantViolation(
                f"request {run.request_id} progressed past its total work "
                f"({run.progress} > {run.total_work})"
            )


def next_departure(run: RunState, now: float) -> float:
    """When the request finishes if its grant stays unchanged from now on.

    Remaining work is clamped at zero: piecewise progress accumulation can
    overshoot the total by a few ulps, and a departure must never be
    scheduled before now.
    """
    remaining = run.total_work - run.progress
    if remaining <= 0.0:
        return now
    return now + remaining / (run.n_core + run.granted_elastic)


@dataclass(frozen=True, slots=True)
class AppRecord:
    """Completion record of one request."""

    id: int
    app_class: str
    priority_class: int
    n_core: int
    n_elastic: int
    nominal_runtime: float
    submit: float
    start: float
    finish: float


@dataclass(slots=True)
class TimeSeries:
    """Piecewise-constant samples taken after every processed event."""

    times: list[float] = field(default_factory=list)
    cpu_frac: list[float] = field(default_factory=list)
    ram_frac: list[float] = field(default_factory=list)
    pending: list[int] = field(default_factory=list)
    running: list[int] = field(default_factory=list)

    def append(self, t: float, cpu: float, ram: float, pending: int, running: int) -> None:
        self.times.append(t)
        self.cpu_frac.append(cpu)
        self.ram_frac.append(ram)
        self.pending.append(pending)
        self.running.append(running)


@dataclass(slots=True)
class SimResult:
    scheduler: str
    policy: str
    preemption: bool
    cluster: ClusterSpec
    seed: int | None
    records: list[AppRecord]
    rejected: list[tuple[int, str]]
    series: TimeSeries
    makespan: float
    first_event: float = 0.0

    def finish_times(self) -> dict[int, float]:
        return {r.id: r.finish for r in self.records}

    def to_canonical(self) -> str:
        """Stable text serialization used for byte-identity checks."""
        lines = [
            f"scheduler={self.scheduler} policy={self.policy} "
            f"preemption={self.preemption} seed={self.seed!r} makespan={self.makespan!r}"
        ]
        for r in self.records:
            lines.append(
                f"{r.id},{r.app_class},{r.priority_class},{r.n_core},{r.n_elastic},"
                f"{r.nominal_runtime!r},{r.submit!r},{r.start!r},{r.finish!r}"
            )
        for rid, reason in self.rejected:
            lines.append(f"rejected,{rid},{reason}")
        s = self.series
        for i, t in enumerate(s.times):
            lines.append(
                f"{t!r},{s.cpu_frac[i]!r},{s.ram_frac[i]!r},{s.pending[i]},{s.running[i]}"
            )
        return "\n".join(lines) + "\n"


def run(
    requests: list[RequestSpec],
    cluster: ClusterSpec,
    scheduler: str = "flexible",
    policy: PolicyId | str = "fifo",
    preemption: bool = False,
    seed: int | None = None,
    strict_conservation: bool = False,
    check_invariants: bool = False,
    event_hook: Callable[[float, Scheduler], None] | None = None,
) -> SimResult:
    """Simulate a request list to completion and return the full result.

    ``strict_conservation`` pins the work-conservation check to the 1e-9
    absolute tolerance instead of the scale-aware default.  ``event_hook``
    is called as hook(now, scheduler) after every processed event.
    """
    if isinstance(policy, str):
        policy = parse_policy(policy)
    sched = make_scheduler(scheduler, cluster, policy, preemption)
    total = cluster.total()

    by_id = {}
    for req in requests:
        req.validate()
        if req.id in by_id:
            raise InvariantViolation(f"duplicate request id {req.id} in workload")
        by_id[req.id] = req

    heap: list[tuple[float, int, int, int]] = []
    for req in requests:
        heap.append((req.submit_time, _ARRIVAL, req.id, 0))
    heapq.heapify(heap)

    stamps: dict[int, int] = {}  # latest departure stamp per serving request
    records: list[AppRecord] = []
    rejected: list[tuple[int, str]] = []
    series = TimeSeries()
    states = sched.states
    last_t = 0.0
    first_event: float | None = None
    next_stamp = 0

    def reschedule(prev_grants: dict[int, int], now: float) -> None:
        nonlocal next_stamp
        for rid in sched.serving:
            run = states[rid]
            if rid in prev_grants and prev_grants[rid] == run.granted_elastic:
                continue  # pending departure event still valid
            next_stamp += 1
            stamps[rid] = next_stamp
            heapq.heappush(heap, (next_departure(run, now), _DEPARTURE, rid, next_stamp))

    while heap:
        t, kind, rid, stamp = heapq.heappop(heap)
        if kind == _DEPARTURE and stamps.get(rid) != stamp:
            continue  # superseded by a later grant change
        serving_states = [states[r] for r in sched.serving]
        tol = 1e-9 if strict_conservation else None
        advance_progress(serving_states, last_t, t, tol=tol)
        last_t = t
        if first_event is None:
            first_event = t
        prev_grants = {r: states[r].granted_elastic for r in sched.serving}
        if kind == _ARRIVAL:
            try:
                sched.on_arrival(by_id[rid], t)
            except RequestRejected as exc:
                rejected.append((rid, exc.reason))
        else:
            run = states[rid]
            residual = run.progress - run.total_work
            limit = 1e-9 if strict_conservation else conservation_tolerance(run.total_work)
            if abs(residual) > limit:
                raise InvariantViolation(
                    f"request {rid} departing with progress residual {residual}"
                )
            run.progress = run.total_work
            stamps.pop(rid, None)
            sched.on_departure(rid, t)
            req = by_id[rid]
            records.append(
                AppRecord(
                    id=rid,
                    app_class=req.app_class,
                    priority_class=req.priority_class,
                    n_core=req.n_core,
                    n_elastic=req.n_elastic,
                    nominal_runtime=req.nominal_runtime,
                    submit=req.submit_time,
                    start=run.start_time,
                    finish=t,
                )
            )
        reschedule(prev_grants, t)
        series.append(
            t,
            sched.allocated.cpu / total.cpu,
            sched.allocated.ram / total.ram,
            sched.pending_count(),
            len(sched.serving),
        )
        if check_invariants:
            sched.check_invariants()
        if event_hook is not None:
            event_hook(t, sched)

    if len(records) + len(rejected) != len(requests):
        done = {r.id for r in records} | {rid for rid, _ in rejected}
        blocked = sorted(rid for rid in by_id if rid not in done)
        raise SimulationError(
            f"schedule cannot make progress: requests {blocked[:10]} never finished "
            f"(first blocked: {blocked[0]})"
        )

    makespan = last_t
    if not series.times or series.times[0] > 0.0:
        series.times.insert(0, 0.0)
        series.cpu_frac.insert(0, 0.0)
        series.ram_frac.insert(0, 0.0)
        series.pending.insert(0, 0)
        series.running.insert(0, 0)

    records.sort(key=lambda r: r.id)
    return SimResult(
        scheduler=scheduler,
        policy=policy.name,
        preemption=preemption,
        cluster=cluster,
        seed=seed,
        records=records,
        rejected=rejected,
        series=series,
        makespan=makespan,
        first_event=first_event if first_event is not None else 0.0,
    )

"""Event-driven schedulers: flexible (with optional preemption), rigid, malleable.

All three share the same shell: requests wait in a policy-ordered line L,
serving requests live in the set S, and every arrival or departure may
trigger the scheduler's allocation procedure.  They differ in what that
procedure does:

  * flexible  - admits a request as soon as its core components fit and
    redistributes all elastic grants from scratch in policy order at every
    event; grants can shrink.  With preemption enabled, a request that
    outranks the worst serving request can claim resources held by elastic
    components immediately, or park in a high-priority line W that is
    drained before L at departures.
  * rigid     - allocates a request's full demand at once, head-of-line,
    no backfilling; grants never change while a request runs.
  * malleable - grows grants in policy order when resources free up (never
    shrinks them), then admits queued requests whose cores fit, blocking at
    the first one that does not.

On an arrival, allocation is attempted only when the arriving request lands
at the head of L and its entry demand (core for flexible/malleable, full
demand for rigid) fits the currently free pool; departures always trigger
allocation.  This uniform gate is what makes the three schedulers produce
identical schedules on workloads without elastic components.
"""

from __future__ import annotations

import bisect

from .domain import (
    EPS,
    Assignment,
    ClusterSpec,
    InvariantViolation,
    RequestRejected,
    RequestSpec,
    ResourceVector,
    RunState,
    ValidationError,
    fits,
)
from .policy import PolicyId, hrrn_coefficients, key_tuple, static_queue_key

SCHEDULER_NAMES = ("flexible", "rigid", "malleable")


class WaitingLine:
    """A policy-ordered line of request ids.

    For fifo/sjf/srpt a queued request's key never changes, so the line is
    kept sorted by insertion.  hrrn keys grow with waiting time, so the line
    is re-sorted lazily whenever it is read at a new instant.
    """

    __slots__ = ("_policy", "_static", "_items", "_dirty", "_now")

    def __init__(self, policy: PolicyId):
        self._policy = policy
        self._static = static_queue_key(policy)
        # static: sorted [(key_tuple, rid)]; dynamic: [(rank, size, slope, submit, rid)]
        self._items: list[tuple] = []
        self._dirty = False
        self._now: float | None = None

    def __len__(self) -> int:
        return len(self._items)

    def insert(self, req: RequestSpec, now: float) -> None:
        if self._static:
            bisect.insort(self._items, (key_tuple(self._policy, req, None, now), req.id))
        else:
            size, slope = hrrn_coefficients(self._policy, req)
            self._items.append((req.priority_class, size, slope, req.submit_time, req.id))
            self._dirty = True

    def _refresh(self, now: float) -> None:
        if self._dirty or self._now != now:
            self._items.sort(
                key=lambda e: (
                    -e[0],
                    -(e[1] + e[2] * (now - e[3])) if now > e[3] else -e[1],
                    e[3],
                    e[4],
                )
            )
            self._dirty = False
            self._now = now

    def head(self, now: float) -> int | None:
        if not self._items:
            return None
        if not self._static:
            self._refresh(now)
        return self._items[0][-1]

    def pop_head(self, now: float) -> int:
        if not self._static:
            self._refresh(now)
        return self._items.pop(0)[-1]

    def ids(self) -> list[int]:
        return [e[-1] for e in self._items]


class Scheduler:
    """Shared state machine: request registry, lines, free-pool accounting."""

    name = "base"

    def __init__(self, cluster: ClusterSpec, policy: PolicyId, preemption: bool = False):
        cluster.validate()
        policy.validate()
        self.cluster = cluster
        self.policy = policy
        self.preemption = preemption
        total = cluster.total()
        self._tc = total.cpu
        self._tr = total.ram
        self._alloc_c = 0.0
        self._alloc_r = 0.0
        self.requests: dict[int, RequestSpec] = {}
        self.states: dict[int, RunState] = {}
        self.serving: list[int] = []
        self.waiting = WaitingLine(policy)
        self.priority_waiting = WaitingLine(policy)
        # (core_cpu, core_ram, per_cpu, per_ram, full_cpu, full_ram) per request
        self._cache: dict[int, tuple[float, float, float, float, float, float]] = {}

    # -- public views -------------------------------------------------------

    @property
    def free(self) -> ResourceVector:
        return ResourceVector(self._tc - self._alloc_c, self._tr - self._alloc_r)

    @property
    def allocated(self) -> ResourceVector:
        return ResourceVector(self._alloc_c, self._alloc_r)

    def waiting_ids(self) -> list[int]:
        return self.waiting.ids()

    def priority_waiting_ids(self) -> list[int]:
        return self.priority_waiting.ids()

    def pending_count(self) -> int:
        return len(self.waiting) + len(self.priority_waiting)

    # -- event handlers ------------------------------------------------------

    def on_arrival(self, req: RequestSpec, now: float) -> Assignment:
        self._register(req, now)
        if self._try_preempt(req, now):
            return self._snapshot()
        self.waiting.insert(req, now)
        if self.waiting.head(now) == req.id:
            ec, er = self._entry_demand(req.id)
            if ec <= self._tc - self._alloc_c + EPS and er <= self._tr - self._alloc_r + EPS:
                self._allocate(now)
        return self._snapshot()

    def on_departure(self, rid: int, now: float) -> Assignment:
        if rid not in self.states or rid not in self.serving:
            raise InvariantViolation(f"departure of request {rid} which is not in service")
        run = self.states[rid]
        run.finish_time = now
        self.serving.remove(rid)
        self._post_departure(now)
        self._allocate(now)
        return self._snapshot()

    # -- hooks implemented per scheduler --------------------------------------

    def _entry_demand(self, rid: int) -> tuple[float, float]:
        """Resources a queued request needs before it can enter service."""
        cc, cr, _, _, _, _ = self._cache[rid]
        return cc, cr

    def _try_preempt(self, req: RequestSpec, now: float) -> bool:
        return False

    def _post_departure(self, now: float) -> None:
        pass

    def _allocate(self, now: float) -> None:
        raise NotImplementedError

    # -- internals -------------------------------------------------------------

    def _register(self, req: RequestSpec, now: float) -> RunState:
        if req.id in self.requests:
            raise ValidationError(f"duplicate request id {req.id}")
        req.validate()
        if not fits(req.core_demand(), self.cluster.total()):
            raise RequestRejected(req.id, "core demand exceeds cluster capacity")
        run = RunState(
            request_id=req.id,
            n_core=req.n_core,
            n_elastic=req.n_elastic,
            total_work=req.total_work,
            last_update=now,
        )
        self.requests[req.id] = req
        self.states[req.id] = run
        per = req.per_component
        self._cache[req.id] = (
            per.cpu * req.n_core,
            per.ram * req.n_core,
            per.cpu,
            per.ram,
            per.cpu * req.total_components,
            per.ram * req.total_components,
        )
        return run

    def _admit(self, rid: int, now: float) -> None:
        run = self.states[rid]
        if run.start_time is None:
            run.start_time = now
        self.serving.append(rid)

    def _serving_order(self, now: float) -> list[int]:
        policy, reqs, states = self.policy, self.requests, self.states
        return sorted(
            self.serving, key=lambda rid: key_tuple(policy, reqs[rid], states[rid], now)
        )

    def _snapshot(self) -> Assignment:
        granted = {rid: self.states[rid].granted_elastic for rid in self.serving}
        return Assignment(granted, ResourceVector(self._alloc_c, self._alloc_r))

    def check_invariants(self) -> None:
        """Cheap self-check of the documented state invariants."""
        s, l, w = set(self.serving), set(self.waiting.ids()), set(self.priority_waiting.ids())
        if (s & l) or (s & w) or (l & w):
            raise InvariantViolation("serving/waiting lines are not disjoint")
        if w and not (self.preemption and self.name == "flexible"):
            raise InvariantViolation("priority waiting line used outside preemptive mode")
        ac = ar = cc_sum = cr_sum = 0.0
        for rid in self.serving:
            run = self.states[rid]
            if run.start_time is None or run.finish_time is not None:
                raise InvariantViolation(f"request {rid} serving with bad start/finish")
            if not (0 <= run.granted_elastic <= run.n_elastic):
                raise InvariantViolation(f"request {rid} granted {run.granted_elastic}")
            cc, cr, pc, pr, _, _ = self._cache[rid]
            ac += cc + run.granted_elastic * pc
            ar += cr + run.granted_elastic * pr
            cc_sum += cc
            cr_sum += cr
        if ac > self._tc + EPS or ar > self._tr + EPS:
            raise InvariantViolation(f"allocation ({ac}, {ar}) exceeds capacity")
        if cc_sum > self._tc + EPS or cr_sum > self._tr + EPS:
            raise InvariantViolation("core components of serving set exceed capacity")
        if abs(ac - self._alloc_c) > 1e-6 or abs(ar - self._alloc_r) > 1e-6:
            raise InvariantViolation("allocation accounting drifted")


class FlexibleScheduler(Scheduler):
    """Admit on core fit, then redistribute every elastic grant in policy order."""

    name = "flexible"

    def _allocate(self, now: float) -> None:
        cache = self._cache
        sum_core_c = sum_core_r = sum_full_c = sum_full_r = 0.0
        for rid in self.serving:
            cc, cr, _, _, fc, fr = cache[rid]
            sum_core_c += cc
            sum_core_r += cr
            sum_full_c += fc
            sum_full_r += fr
        # Admission: pull the head of L while the serving set cannot saturate
        # the pool in any dimension and the head's cores fit beside the others.
        while len(self.waiting):
            if not (sum_full_c < self._tc - EPS and sum_full_r < self._tr - EPS):
                break
            hid = self.waiting.head(now)
            cc, cr, _, _, fc, fr = cache[hid]
            if sum_core_c + cc <= self._tc + EPS and sum_core_r + cr <= self._tr + EPS:
                self.waiting.pop_head(now)
                self._admit(hid, now)
                sum_core_c += cc
                sum_core_r += cr
                sum_full_c += fc
                sum_full_r += fr
            else:
                break
        # Grants: recomputed from scratch, cascading in policy order, so a
        # previously served request may lose elastic components.
        avail_c = self._tc - sum_core_c
        avail_r = self._tr - sum_core_r
        states = self.states
        for rid in self._serving_order(now):
            run = states[rid]
            g = run.n_elastic
            if g:
                _, _, pc, pr, _, _ = cache[rid]
                if pc > 0.0:
                    g = min(g, int((avail_c + EPS) / pc))
                if pr > 0.0:
                    g = min(g, int((avail_r + EPS) / pr))
                if g > 0:
                    avail_c -= g * pc
                    avail_r -= g * pr
                else:
                    g = 0
            run.granted_elastic = g
        self._alloc_c = self._tc - avail_c
        self._alloc_r = self._tr - avail_r

    def _try_preempt(self, req: RequestSpec, now: float) -> bool:
        if not self.preemption or not self.serving:
            return False
        # The gate compares priority classes only: preemption exists so that
        # high-priority (interactive) arrivals can claim resources held by
        # elastic components; requests of the same class never preempt each
        # other regardless of their size under the sorting policy.
        reqs = self.requests
        tail_rank = min(reqs[rid].priority_class for rid in self.serving)
        if req.priority_class <= tail_rank:
            return False
        # Only free resources plus currently granted elastic components are
        # physically reclaimable for the newcomer's cores.
        reclaim_c = self._tc - self._alloc_c
        reclaim_r = self._tr - self._alloc_r
        for rid in self.serving:
            g = self.states[rid].granted_elastic
            if g:
                _, _, pc, pr, _, _ = self._cache[rid]
                reclaim_c += g * pc
                reclaim_r += g * pr
        cc, cr, _, _, _, _ = self._cache[req.id]
        if cc <= reclaim_c + EPS and cr <= reclaim_r + EPS:
            self._admit(req.id, now)
            self._allocate(now)
        else:
            self.priority_waiting.insert(req, now)
        return True

    def _post_departure(self, now: float) -> None:
        if not self.preemption or not len(self.priority_waiting):
            return
        sum_core_c = sum_core_r = 0.0
        for rid in self.serving:
            cc, cr, _, _, _, _ = self._cache[rid]
            sum_core_c += cc
            sum_core_r += cr
        while len(self.priority_waiting):
            hid = self.priority_waiting.head(now)
            cc, cr, _, _, _, _ = self._cache[hid]
            if sum_core_c + cc <= self._tc + EPS and sum_core_r + cr <= self._tr + EPS:
                self.priority_waiting.pop_head(now)
                self._admit(hid, now)
                sum_core_c += cc
                sum_core_r += cr
            else:
                break


class RigidScheduler(Scheduler):
    """Full demand at once, head-of-line, no backfill, grants never change."""

    name = "rigid"

    def _entry_demand(self, rid: int) -> tuple[float, float]:
        _, _, _, _, fc, fr = self._cache[rid]
        return fc, fr

    def _allocate(self, now: float) -> None:
        while len(self.waiting):
            hid = self.waiting.head(now)
            _, _, _, _, fc, fr = self._cache[hid]
            if fc <= self._tc - self._alloc_c + EPS and fr <= self._tr - self._alloc_r + EPS:
                self.waiting.pop_head(now)
                self._admit(hid, now)
                run = self.states[hid]
                run.granted_elastic = run.n_elastic
                self._alloc_c += fc
                self._alloc_r += fr
            else:
                break

    def on_departure(self, rid: int, now: float) -> Assignment:
        if rid in self.serving:
            _, _, _, _, fc, fr = self._cache[rid]
            self._alloc_c -= fc
            self._alloc_r -= fr
        return super().on_departure(rid, now)


class MalleableScheduler(Scheduler):
    """Grow grants in policy order, then admit while cores fit; never shrink."""

    name = "malleable"

    def _allocate(self, now: float) -> None:
        cache, states = self._cache, self.states
        free_c = self._tc - self._alloc_c
        free_r = self._tr - self._alloc_r
        # Extend existing grants before any new admission.
        for rid in self._serving_order(now):
            run = states[rid]
            room = run.n_elastic - run.granted_elastic
            if room:
                _, _, pc, pr, _, _ = cache[rid]
                if pc > 0.0:
                    room = min(room, int((free_c + EPS) / pc))
                if pr > 0.0:
                    room = min(room, int((free_r + EPS) / pr))
                if room > 0:
                    run.granted_elastic += room
                    free_c -= room * pc
                    free_r -= room * pr
        while len(self.waiting):
            hid = self.waiting.head(now)
            cc, cr, pc, pr, _, _ = cache[hid]
            if cc <= free_c + EPS and cr <= free_r + EPS:
                self.waiting.pop_head(now)
                self._admit(hid, now)
                run = states[hid]
                free_c -= cc
                free_r -= cr
                g = run.n_elastic
                if g:
                    if pc > 0.0:
                        g = min(g, int((free_c + EPS) / pc))
                    if pr > 0.0:
                        g = min(g, int((free_r + EPS) / pr))
                    g = max(g, 0)
                    free_c -= g * pc
                    free_r -= g * pr
                run.granted_elastic = g
            else:
                break
        self._alloc_c = self._tc - free_c
        self._alloc_r = self._tr - free_r

    def on_departure(self, rid: int, now: float) -> Assignment:
        if rid in self.serving:
            cc, cr, pc, pr, _, _ = self._cache[rid]
            g = self.states[rid].granted_elastic
            self._alloc_c -= cc + g * pc
            self._alloc_r -= cr + g * pr
        return super().on_departure(rid, now)


def make_scheduler(
    name: str, cluster: ClusterSpec, policy: PolicyId, preemption: bool = False
) -> Scheduler:
    if name not in SCHEDULER_NAMES:
        raise ValidationError(f"unknown scheduler {name!r}, expected one of {SCHEDULER_NAMES}")
    if preemption and name != "flexible":
        raise ValidationError("the preemption flag is only valid with the flexible scheduler")
    cls = {"flexible": FlexibleScheduler, "rigid": RigidScheduler, "malleable": MalleableScheduler}
    return cls[name](cluster, policy, preemption)

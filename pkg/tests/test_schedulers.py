import itertools

import pytest
from hypothesis import given, settings, strategies as st

from flexsched.domain import (
    ClusterSpec,
    InvariantViolation,
    RequestRejected,
    ResourceVector,
    ValidationError,
    fits,
)
from flexsched.policy import parse_policy
from flexsched.schedulers import make_scheduler

from conftest import tiny_request
from oracle import simulate as oracle_simulate

FIFO = parse_policy("fifo")


def grants(sched):
    return {rid: sched.states[rid].granted_elastic for rid in sched.serving}


# -- hand-traced steps of the 4-request instance (flexible) ---------------------


def test_flexible_first_arrival_gets_full_grant(cluster10, tiny4):
    s = make_scheduler("flexible", cluster10, FIFO)
    s.on_arrival(tiny4[0], 0.0)
    assert grants(s) == {1: 4}
    assert s.free == ResourceVector(3.0, 3.0)


def test_flexible_admission_stops_at_saturation(cluster10, tiny4):
    s = make_scheduler("flexible", cluster10, FIFO)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    # A keeps its 4 elastic grants, B runs core-only, C and D queue
    assert s.serving == [1, 2]
    assert grants(s) == {1: 4, 2: 0}
    assert s.waiting_ids() == [3, 4]
    assert s.free == ResourceVector(0.0, 0.0)


def _advance(sched, t0, t1):
    for rid in sched.serving:
        run = sched.states[rid]
        run.progress += run.rate * (t1 - t0)


def test_flexible_departure_admits_and_regrants(cluster10, tiny4):
    s = make_scheduler("flexible", cluster10, FIFO)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    _advance(s, 0.0, 10.0)
    s.states[1].progress = s.states[1].total_work
    s.on_departure(1, 10.0)
    # C admitted; grants cascade in arrival order: B first
    assert s.serving == [2, 3]
    assert grants(s) == {2: 2, 3: 2}

    _advance(s, 10.0, 14.0)
    s.states[2].progress = s.states[2].total_work
    s.on_departure(2, 14.0)
    # D admitted core-only; C's grant goes to 4 (one unit reclaimed for D's cores)
    assert s.serving == [3, 4]
    assert grants(s) == {3: 4, 4: 0}


def test_flexible_last_departure_empties_everything(cluster10):
    s = make_scheduler("flexible", cluster10, FIFO)
    req = tiny_request(1, 4)
    s.on_arrival(req, 0.0)
    s.states[1].progress = s.states[1].total_work
    s.on_departure(1, 10.0)
    assert s.serving == [] and s.waiting_ids() == [] and s.priority_waiting_ids() == []
    assert s.free == cluster10.total()


def test_preemptive_interactive_arrival_reclaims_elastic(cluster10, tiny4):
    s = make_scheduler("flexible", cluster10, FIFO, preemption=True)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    _advance(s, 0.0, 5.0)
    hi = tiny_request(9, 0, n_core=3, runtime=2.0, submit=5.0,
                      app_class="interactive", priority=1)
    s.on_arrival(hi, 5.0)
    # free pool is empty but A's 4 granted elastic units are reclaimable
    assert 9 in s.serving
    assert grants(s) == {1: 1, 2: 0, 9: 0}


def test_preemptive_overflow_parks_in_priority_line(cluster10, tiny4):
    s = make_scheduler("flexible", cluster10, FIFO, preemption=True)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    big = tiny_request(9, 0, n_core=7, runtime=2.0, submit=1.0,
                       app_class="interactive", priority=1)
    s.on_arrival(big, 1.0)  # needs 7 cores, only 4 elastic + 0 free reclaimable
    assert 9 not in s.serving
    assert s.priority_waiting_ids() == [9]
    # the priority line drains before L at the next departure
    s.states[1].progress = s.states[1].total_work
    s.on_departure(1, 10.0)
    assert 9 in s.serving
    assert 3 not in s.serving  # C stays queued: the serving set saturates the pool


def test_batch_never_preempts_batch(cluster10, tiny4):
    s = make_scheduler("flexible", cluster10, parse_policy("srpt1"), preemption=True)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    tiny = tiny_request(9, 0, n_core=1, runtime=0.5, submit=1.0)
    s.on_arrival(tiny, 1.0)  # shorter than anything serving, but same class
    assert 9 not in s.serving
    assert 9 in s.waiting_ids()


# -- rigid --------------------------------------------------------------------


def test_rigid_serves_one_at_a_time(cluster10, tiny4):
    s = make_scheduler("rigid", cluster10, FIFO)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    assert s.serving == [1]
    assert grants(s) == {1: 4}
    for t, rid, nxt in ((10.0, 1, 2), (20.0, 2, 3), (30.0, 3, 4)):
        s.states[rid].progress = s.states[rid].total_work
        s.on_departure(rid, t)
        assert s.serving == [nxt]
    assert s.states[4].start_time == 30.0


def test_rigid_single_request_runs_at_nominal(cluster10):
    s = make_scheduler("rigid", cluster10, FIFO)
    s.on_arrival(tiny_request(1, 4, runtime=10.0), 0.0)
    run = s.states[1]
    assert run.rate == 7 and run.total_work == 70.0


def test_rigid_no_backfill(cluster10):
    s = make_scheduler("rigid", cluster10, FIFO)
    s.on_arrival(tiny_request(1, 4), 0.0)   # 7 units
    s.on_arrival(tiny_request(2, 5), 0.0)   # 8 units: blocks
    s.on_arrival(tiny_request(3, 0), 0.0)   # 3 units: would fit, must wait
    assert s.serving == [1]
    assert s.waiting_ids() == [2, 3]


# -- malleable ------------------------------------------------------------------


def test_malleable_grows_grants_before_admitting(cluster10, tiny4):
    s = make_scheduler("malleable", cluster10, FIFO)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    assert grants(s) == {1: 4, 2: 0}
    _advance(s, 0.0, 10.0)
    s.states[1].progress = s.states[1].total_work
    s.on_departure(1, 10.0)
    # B grows from 0 to its full 2 before C is admitted with the remainder
    assert grants(s) == {2: 2, 3: 2}
    _advance(s, 10.0, 14.0)
    s.states[2].progress = s.states[2].total_work
    s.on_departure(2, 14.0)
    # C grows to its full 5 (8 units); D's 3 cores no longer fit: blocked
    assert grants(s) == {3: 5}
    assert s.waiting_ids() == [4]


def test_malleable_grants_never_shrink(cluster10, tiny4):
    s = make_scheduler("malleable", cluster10, FIFO)
    for req in tiny4:
        s.on_arrival(req, 0.0)
    before = grants(s)
    s.on_arrival(tiny_request(9, 0, n_core=1, submit=3.0), 3.0)
    after = grants(s)
    for rid, g in before.items():
        assert after[rid] >= g


# -- shared error handling ---------------------------------------------------------


@pytest.mark.parametrize("name", ["flexible", "rigid", "malleable"])
def test_duplicate_id_is_fatal(cluster10, name):
    s = make_scheduler(name, cluster10, FIFO)
    s.on_arrival(tiny_request(1, 2), 0.0)
    with pytest.raises(ValidationError):
        s.on_arrival(tiny_request(1, 0), 1.0)


@pytest.mark.parametrize("name", ["flexible", "rigid", "malleable"])
def test_oversized_core_demand_rejected(cluster10, name):
    s = make_scheduler(name, cluster10, FIFO)
    with pytest.raises(RequestRejected):
        s.on_arrival(tiny_request(1, 0, n_core=11), 0.0)
    assert 1 not in s.requests


@pytest.mark.parametrize("name", ["flexible", "rigid", "malleable"])
def test_departure_of_unserved_request_is_fatal(cluster10, name):
    s = make_scheduler(name, cluster10, FIFO)
    s.on_arrival(tiny_request(1, 4), 0.0)
    s.on_arrival(tiny_request(2, 0, n_core=5), 0.0)  # 5 cores do not fit beside 1
    assert s.waiting_ids() == [2]
    with pytest.raises(InvariantViolation):
        s.on_departure(2, 1.0)  # queued, not serving
    with pytest.raises(InvariantViolation):
        s.on_departure(99, 1.0)  # unknown


def test_preemption_flag_only_with_flexible(cluster10):
    with pytest.raises(ValidationError):
        make_scheduler("rigid", cluster10, FIFO, preemption=True)
    with pytest.raises(ValidationError):
        make_scheduler("unknown", cluster10, FIFO)


# -- property: flexible beats rigid on enumerated micro instances ------------------


def _enumerated_instances():
    """Small two-to-four request instances with integer demands <= 10."""
    cluster = ClusterSpec(1, ResourceVector(10.0, 10.0))
    elastics = [(4, 2, 5, 2), (0, 0, 0, 0), (5, 5, 0, 2), (2, 0, 7, 1)]
    cores = [(3, 3, 3, 3), (1, 4, 2, 5), (2, 2, 6, 1)]
    runtimes = [(10, 10, 10, 10), (4, 12, 6, 8)]
    submits = [(0, 0, 0, 0), (0, 0, 5, 5), (0, 2, 4, 6)]
    total = cluster.total()
    for n in (2, 3, 4):
        for ela, cor, rt, sub in itertools.product(elastics, cores, runtimes, submits):
            reqs = [
                tiny_request(i + 1, ela[i], n_core=cor[i], runtime=float(rt[i]),
                             submit=float(sub[i]))
                for i in range(n)
            ]
            if all(fits(r.full_demand(), total) for r in reqs):
                yield cluster, reqs


def test_flexible_mean_turnaround_never_worse_than_rigid():
    checked = 0
    for cluster, reqs in _enumerated_instances():
        means = {}
        for sched in ("flexible", "rigid"):
            out = oracle_simulate(reqs, cluster, scheduler=sched, policy="fifo")
            assert not out["blocked"], (sched, reqs)
            times = out["times"]
            means[sched] = sum(times[r.id][1] - r.submit_time for r in reqs) / len(reqs)
        assert means["flexible"] <= means["rigid"] + 1e-9, reqs
        checked += 1
    assert checked > 200


# -- property: invariants hold under random arrival/departure interleavings ---------


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(0, 6),    # n_elastic
            st.integers(1, 4),    # n_core
            st.integers(1, 20),   # runtime
            st.integers(0, 30),   # submit
            st.integers(1, 3),    # per cpu
            st.integers(1, 3),    # per ram
        ),
        min_size=2,
        max_size=12,
    ),
    st.sampled_from(["flexible", "rigid", "malleable"]),
    st.sampled_from(["fifo", "sjf-2d", "srpt2-2d", "hrrn"]),
)
def test_scheduler_invariants_hold(rows, name, policy):
    cluster = ClusterSpec(1, ResourceVector(12.0, 12.0))
    total = cluster.total()
    reqs = []
    for i, (ne, nc, rt, sub, pc, pr) in enumerate(rows):
        req = tiny_request(i + 1, ne, n_core=nc, runtime=float(rt), submit=float(sub),
                           per=(float(pc), float(pr)))
        if fits(req.core_demand(), total) and (
            name != "rigid" or fits(req.full_demand(), total)
        ):
            reqs.append(req)
    if len(reqs) < 2:
        return
    from flexsched.engine import run

    res = run(reqs, cluster, scheduler=name, policy=policy, check_invariants=True,
              strict_conservation=True)
    assert len(res.records) == len(reqs)
    for rec in res.records:
        assert rec.finish >= rec.start >= rec.submit

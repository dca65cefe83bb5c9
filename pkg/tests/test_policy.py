import pytest
from hypothesis import given, strategies as st

from flexsched.domain import RunState, ValidationError
from flexsched.policy import (
    PolicyId,
    order,
    parse_policy,
    policy_value,
    sort_key,
    static_queue_key,
)

from conftest import tiny_request


def run_state_for(req, progress=0.0, granted=0, start=0.0):
    return RunState(
        request_id=req.id,
        n_core=req.n_core,
        n_elastic=req.n_elastic,
        total_work=req.total_work,
        progress=progress,
        granted_elastic=granted,
        start_time=start,
    )


# -- parsing -------------------------------------------------------------


@pytest.mark.parametrize(
    "text,family,dim",
    [
        ("fifo", "fifo", 1),
        ("sjf", "sjf", 1),
        ("sjf-2d", "sjf", 2),
        ("srpt1-3d", "srpt1", 3),
        ("srpt2-2d", "srpt2", 2),
        ("HRRN-2D", "hrrn", 2),
        ("fifo-3d", "fifo", 1),  # fifo ignores dimensionality
    ],
)
def test_parse_policy(text, family, dim):
    p = parse_policy(text)
    assert (p.family, p.dim) == (family, dim)


def test_parse_policy_rejects_unknown():
    with pytest.raises(ValidationError):
        parse_policy("lifo")
    with pytest.raises(ValidationError):
        PolicyId("sjf", 4).validate()


# -- values from the size catalog ---------------------------------------------


def test_sjf_2d_is_runtime_times_services():
    req = tiny_request(1, 2, n_core=3, runtime=100.0)
    assert policy_value(parse_policy("sjf-2d"), req, None, 0.0) == 500.0


def test_hrrn_2d_zero_wait_reduces_to_size():
    # (1 + 0/50) * 5 services: at zero wait the response ratio is 1 and the
    # value is just the request's service count.
    req = tiny_request(1, 2, n_core=3, runtime=50.0)
    assert policy_value(parse_policy("hrrn-2d"), req, None, 0.0) == 5.0


def test_srpt2_2d_counts_unscheduled_services():
    # running request: 3 cores + 4 elastic all granted, 10 s of work left per service
    req = tiny_request(1, 4, n_core=3, runtime=20.0)
    run = run_state_for(req, progress=req.total_work - 70.0, granted=4)
    got = policy_value(parse_policy("srpt2-2d"), req, run, 5.0)
    # brute-force recomputation from the run state
    remaining = (req.total_work - run.progress) / req.total_components
    unscheduled = req.total_components - run.granted_elastic
    assert remaining == pytest.approx(10.0)
    assert unscheduled == 3
    assert got == pytest.approx(remaining * unscheduled)
    assert got == pytest.approx(30.0)


def test_3d_multiplies_by_cpu_ram_footprint():
    req = tiny_request(1, 2, n_core=3, runtime=100.0, per=(2.0, 8.0))
    assert policy_value(parse_policy("sjf-3d"), req, None, 0.0) == 100.0 * 5 * 16.0


def test_wait_time_frozen_once_serving():
    req = tiny_request(1, 2, runtime=10.0)
    run = run_state_for(req, start=3.0)
    v3 = policy_value(parse_policy("hrrn"), req, run, 50.0)
    v9 = policy_value(parse_policy("hrrn"), req, run, 90.0)
    assert v3 == v9 == 1.0 + 3.0 / 10.0


def test_negative_wait_is_fatal():
    req = tiny_request(1, 2, submit=100.0)
    with pytest.raises(ValidationError):
        sort_key(parse_policy("hrrn"), req, None, 5.0)


# -- ordering ----------------------------------------------------------------


def test_fifo_orders_by_arrival():
    reqs = [tiny_request(1, 0, submit=5.0), tiny_request(2, 0, submit=2.0),
            tiny_request(3, 0, submit=9.0)]
    got = order(parse_policy("fifo"), reqs, None, 10.0)
    assert [r.submit_time for r in got] == [2.0, 5.0, 9.0]


def test_sjf_shortest_first():
    reqs = [tiny_request(1, 0, runtime=100.0), tiny_request(2, 0, runtime=10.0),
            tiny_request(3, 0, runtime=50.0)]
    got = order(parse_policy("sjf"), reqs, None, 0.0)
    assert [r.nominal_runtime for r in got] == [10.0, 50.0, 100.0]


def test_equal_keys_break_by_id():
    reqs = [tiny_request(7, 0, submit=3.0), tiny_request(2, 0, submit=3.0)]
    got = order(parse_policy("fifo"), reqs, None, 3.0)
    assert [r.id for r in got] == [2, 7]


def test_class_rank_dominates():
    lo = tiny_request(1, 0, runtime=1.0)
    hi = tiny_request(2, 0, runtime=1000.0, app_class="interactive", priority=1)
    got = order(parse_policy("sjf"), [lo, hi], None, 0.0)
    assert [r.id for r in got] == [2, 1]


def test_hrrn_serves_largest_ratio_first():
    short = tiny_request(1, 0, runtime=10.0, submit=0.0)
    long = tiny_request(2, 0, runtime=100.0, submit=0.0)
    got = order(parse_policy("hrrn"), [short, long], None, 1000.0)
    # ratios: 1 + 100 for the short one, 1 + 10 for the long one
    assert [r.id for r in got] == [1, 2]


# -- properties -----------------------------------------------------------------

policies = st.sampled_from(
    ["fifo", "sjf", "sjf-2d", "sjf-3d", "srpt1", "srpt1-2d", "srpt1-3d",
     "srpt2-2d", "srpt2-3d", "hrrn", "hrrn-2d", "hrrn-3d"]
)


@st.composite
def request_lists(draw):
    n = draw(st.integers(2, 8))
    return [
        tiny_request(
            i,
            draw(st.integers(0, 9)),
            n_core=draw(st.integers(1, 5)),
            runtime=float(draw(st.integers(1, 1000))),
            submit=float(draw(st.integers(0, 50))),
            per=(float(draw(st.integers(1, 4))), float(draw(st.integers(1, 4)))),
            priority=draw(st.integers(0, 1)),
        )
        for i in range(n)
    ]


@given(policies, request_lists(), st.integers(50, 200))
def test_order_is_idempotent(policy, reqs, now):
    p = parse_policy(policy)
    once = order(p, reqs, None, float(now))
    twice = order(p, once, None, float(now))
    assert [r.id for r in once] == [r.id for r in twice]


@given(request_lists(), st.integers(2, 10), st.sampled_from(["sjf", "srpt1", "sjf-2d"]))
def test_runtime_scaling_preserves_order(reqs, factor, policy):
    p = parse_policy(policy)
    base = [r.id for r in order(p, reqs, None, 100.0)]
    scaled = [
        tiny_request(r.id, r.n_elastic, n_core=r.n_core, runtime=r.nominal_runtime * factor,
                     submit=r.submit_time, priority=r.priority_class)
        for r in reqs
    ]
    assert [r.id for r in order(p, scaled, None, 100.0)] == base


@given(request_lists(), st.integers(1, 3))
def test_srpt1_equals_sjf_before_any_start(reqs, dim):
    suffix = f"-{dim}d"
    sjf = order(parse_policy("sjf" + suffix), reqs, None, 100.0)
    srpt = order(parse_policy("srpt1" + suffix), reqs, None, 100.0)
    assert [r.id for r in sjf] == [r.id for r in srpt]


@given(request_lists(), st.integers(0, 100), st.integers(1, 100))
def test_hrrn_keys_grow_while_queued(reqs, start, delta):
    p = parse_policy("hrrn-2d")
    now = float(max(r.submit_time for r in reqs) + start)
    later = now + delta
    for r in reqs:
        assert policy_value(p, r, None, later) >= policy_value(p, r, None, now)


def test_static_queue_key():
    assert static_queue_key(parse_policy("sjf-3d"))
    assert static_queue_key(parse_policy("fifo"))
    assert not static_queue_key(parse_policy("hrrn-2d"))

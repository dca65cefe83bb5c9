import math

import pytest
from hypothesis import given, strategies as st

from flexsched.domain import (
    ClusterSpec,
    RequestSpec,
    ResourceVector,
    ValidationError,
    fits,
)

from conftest import tiny_request


def test_fits_strict_containment():
    assert fits(ResourceVector(2, 4096), ResourceVector(32, 131072))


def test_fits_equality_is_a_fit():
    assert fits(ResourceVector(0, 0), ResourceVector(0, 0))
    assert fits(ResourceVector(5, 100), ResourceVector(5, 100))


def test_fits_one_dimension_exceeds():
    assert not fits(ResourceVector(6, 100), ResourceVector(5, 200))


def test_demands():
    r = tiny_request(1, 4, n_core=3)
    assert r.core_demand() == ResourceVector(3, 3)
    assert r.full_demand() == ResourceVector(7, 7)


def test_full_demand_equals_core_for_rigid():
    r = tiny_request(1, 0, app_class="batch_rigid")
    assert r.full_demand() == r.core_demand()


def test_core_demand_scales():
    r = tiny_request(1, 0, n_core=3, per=(6.0, 16384.0), app_class="batch_rigid")
    assert r.core_demand() == ResourceVector(18.0, 49152.0)


def test_vector_arithmetic_exact_on_integers():
    a = ResourceVector(7, 131072)
    b = ResourceVector(3, 1024)
    assert (a + b) == ResourceVector(10, 132096)
    assert (a - b) == ResourceVector(4, 130048)
    assert b.scale(3) == ResourceVector(9, 3072)


@given(st.integers(1, 50), st.integers(0, 50), st.integers(1, 10**6))
def test_work_over_components_is_runtime_exactly_for_integer_instances(
    n_core, n_elastic, runtime
):
    r = tiny_request(1, n_elastic, n_core=n_core, runtime=float(runtime))
    assert r.total_work / r.total_components == runtime


@given(st.integers(1, 50), st.integers(0, 50), st.floats(0.001, 1e6))
def test_work_over_components_is_runtime_within_tolerance(n_core, n_elastic, runtime):
    r = tiny_request(1, n_elastic, n_core=n_core, runtime=runtime)
    assert r.total_work / r.total_components == pytest.approx(runtime, rel=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_core=0),
        dict(n_elastic=-1),
        dict(runtime=0.0),
        dict(runtime=-5.0),
        dict(submit=-1.0),
        dict(app_class="webserver"),
        dict(n_elastic=2, app_class="batch_rigid"),
        dict(per=(-1.0, 1.0)),
        dict(per=(math.inf, 1.0)),
    ],
)
def test_request_validation_rejects(kwargs):
    with pytest.raises(ValidationError):
        tiny_request(1, kwargs.pop("n_elastic", 0), **kwargs).validate()


def test_cluster_total():
    c = ClusterSpec(100, ResourceVector(32.0, 131072.0)).validate()
    assert c.total() == ResourceVector(3200.0, 13107200.0)
    with pytest.raises(ValidationError):
        ClusterSpec(0, ResourceVector(1, 1)).validate()
    with pytest.raises(ValidationError):
        ClusterSpec(2, ResourceVector(0.0, 0.0)).validate()


def test_request_spec_is_immutable():
    r = tiny_request(1, 2)
    with pytest.raises(AttributeError):
        r.n_core = 5

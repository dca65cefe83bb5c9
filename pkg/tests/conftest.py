import pathlib

import pytest

from flexsched.domain import ClusterSpec, RequestSpec, ResourceVector

DATA_DIR = pathlib.Path(__file__).parent / "data"


def tiny_request(rid, n_elastic, n_core=3, runtime=10.0, submit=0.0,
                 app_class="batch_elastic", priority=0, per=(1.0, 1.0)):
    return RequestSpec(
        id=rid,
        submit_time=submit,
        app_class=app_class,
        n_core=n_core,
        n_elastic=n_elastic,
        per_component=ResourceVector(*per),
        nominal_runtime=runtime,
        priority_class=priority,
    )


@pytest.fixture
def cluster10():
    """Ten units of each resource: the worked 4-request instance's pool."""
    return ClusterSpec(1, ResourceVector(10.0, 10.0))


@pytest.fixture
def tiny4():
    """Four simultaneous requests, 3 cores each, elastic 4/2/5/2, runtime 10."""
    return [tiny_request(1, 4), tiny_request(2, 2), tiny_request(3, 5), tiny_request(4, 2)]


@pytest.fixture
def tiny4_path():
    return DATA_DIR / "tiny4.csv"

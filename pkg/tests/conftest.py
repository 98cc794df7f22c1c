import pytest

from schn._kernels import warmup


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # trigger JIT compilation once so timings inside tests stay honest
    warmup()

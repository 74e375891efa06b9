import pytest

from risknav import _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile the numba kernels once so timing tests see steady state
    _kernels.warmup()

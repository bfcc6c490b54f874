import pytest

from sparsela import Executor, _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # Compile every jitted kernel once up front so per-test timing budgets
    # measure execution, not compilation.
    _kernels.warm_kernels()


@pytest.fixture
def ref():
    return Executor.reference()


@pytest.fixture
def par():
    return Executor.parallel(4)

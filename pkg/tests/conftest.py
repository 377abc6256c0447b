import numpy as np
import pytest

from gamebush import fixtures, kernels, solver


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every jitted kernel once so test timings exclude compilation."""
    kernels.project_simplex(np.array([0.3, 0.9]))
    kernels.gf2_rank(np.array([[True, False], [True, True]]))
    solver.solve_myopic(fixtures.ex2(), None, solver.SolverConfig(multistarts=2))
    yield

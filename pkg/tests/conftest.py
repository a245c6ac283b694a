import pytest

from issgd import descent, problems
from issgd.linalg import Matrix


@pytest.fixture(scope="session")
def one_d():
    """(plant, closed forms) for the scalar LQR fixture."""
    return problems.one_d_lqr()


@pytest.fixture(scope="session")
def one_d_problem():
    return problems.make_problem("lqr_1d")


@pytest.fixture(scope="session")
def small_plant():
    """One shared random plant (n=3, m=2) with its optimum precomputed."""
    sample = problems.random_plant(3, 2, 42)
    return sample


@pytest.fixture(scope="session")
def small_problem(small_plant):
    return descent.LqrProblem(small_plant.plant, opt=small_plant.opt, name="random_3_2")


@pytest.fixture()
def k_start():
    return Matrix.from_rows([[3.0]])

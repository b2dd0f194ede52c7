import os

import pytest

from causapg.fixtures import ali_graph, cohort100_graph, demo_model

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "fixtures")


@pytest.fixture(scope="session")
def ali():
    return ali_graph().snapshot()


@pytest.fixture(scope="session")
def cohort():
    return cohort100_graph().snapshot()


@pytest.fixture(scope="session")
def demo(cohort):
    return demo_model(cohort)


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURE_DIR, name)

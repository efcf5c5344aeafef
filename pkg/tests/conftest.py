import os

import pytest

from mma.dsl import Study, parse_study_or_raise

FIXTURE_PATH = os.path.join(os.path.dirname(__file__), "..", "studies", "diabetes-demo.study")


@pytest.fixture(scope="session")
def fixture_source() -> str:
    with open(FIXTURE_PATH, "r", encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def study(fixture_source) -> Study:
    return parse_study_or_raise(fixture_source)

import pytest

from stableflow import Instance


@pytest.fixture
def one_arc():
    """Builder for the single-arc instance family used across suites."""

    def build(capacity: float, demand: float) -> Instance:
        return Instance(2, [(0, 1, capacity)], [(0, 1, demand)])

    return build

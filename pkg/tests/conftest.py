import pytest

from xssunit.attack_fsm import ALL_CONTEXTS, default_machine, generate


@pytest.fixture(scope="session")
def machine():
    return default_machine()


@pytest.fixture(scope="session")
def attacks(machine):
    return generate(machine, ALL_CONTEXTS)

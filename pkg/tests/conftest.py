import pytest

from mpraloha import checks


@pytest.fixture(scope="session")
def verify_results():
    """The full property-check suite, run once and shared: both the check
    tests and the acceptance gate assert against the same results."""
    return {r.name: r for r in checks.run_all()}

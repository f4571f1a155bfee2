import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def reference_profile():
    """The shipped dead-core profile scenario, solved once per session."""
    from scenarios import solve_reference_profile

    return solve_reference_profile()

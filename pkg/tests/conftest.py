import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ecosim.semantics import Agent, SemanticDescription  # noqa: E402


def make_agent(agent_id, tuples, origin=0, strict=False):
    return Agent(agent_id, f"svc://test/{agent_id}", SemanticDescription(tuples, strict=strict), origin)


@pytest.fixture
def agent_factory():
    return make_agent


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])

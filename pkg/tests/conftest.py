from __future__ import annotations

from pathlib import Path

import pytest

from dbcopilot.kb import KnowledgeBase, ingest_directory
from dbcopilot.mock_tools import MockToolServer, load_scenarios
from dbcopilot.safety import RuleClassifier, SafetyGate, load_lexicon_file
from dbcopilot.tools import ToolRegistry

DATA = Path(__file__).resolve().parents[1] / "src" / "dbcopilot" / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def corpus_kb() -> KnowledgeBase:
    return ingest_directory(DATA / "corpus")


@pytest.fixture(scope="session")
def gate() -> SafetyGate:
    return SafetyGate(
        lexicon=load_lexicon_file(DATA / "lexicon.txt"),
        classifier=RuleClassifier.default(),
    )


@pytest.fixture(scope="session")
def bare_registry() -> ToolRegistry:
    """Registry without a base_url: selection and parameter filling only."""
    return ToolRegistry.from_file(DATA / "tools.json")


@pytest.fixture
def scenario_server():
    """Factory for mock tool servers pinned to one scenario."""
    servers: list[MockToolServer] = []

    def start(scenario: str = "default") -> MockToolServer:
        server = MockToolServer(load_scenarios(), scenario).start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()


@pytest.fixture
def scenario_registry(scenario_server):
    """Factory for (registry bound to a live mock server) per scenario."""

    def build(scenario: str = "default") -> ToolRegistry:
        server = scenario_server(scenario)
        return ToolRegistry.from_file(DATA / "tools.json", base_url=server.base_url)

    return build

from __future__ import annotations

import pytest

from engage_facets.synthgen import Phase, ScenarioConfig, generate_interaction_with_truth

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def short_config():
    """Two-minute scenario with both phases, for fast end-to-end tests."""
    return ScenarioConfig(
        phases=(
            Phase("informative", 60_000, {"EL": 0.5, "EC": 0.2, "ER": 0.1, "EPR": 0.15, "ENR": 0.05}),
            Phase("quiz", 60_000, {"ETh": 0.3, "EWF": 0.1, "ELP2": 0.1, "ER": 0.3, "EPR": 0.1, "ENR": 0.1}),
        ),
        seed=7,
    )


@pytest.fixture(scope="session")
def short_interaction(short_config):
    return generate_interaction_with_truth(short_config)


@pytest.fixture(scope="session")
def default_interaction():
    return generate_interaction_with_truth(ScenarioConfig(seed=11))

import pytest

from memvault.clock import ManualClock
from memvault.config import EngineConfig
from memvault.engine import MemoryEngine
from memvault.governance import RiskTier

APPROVERS = {
    "ops-1": RiskTier.R4,
    "ops-2": RiskTier.R4,
    "ops-3": RiskTier.R3,
    "rev-1": RiskTier.R2,
}


def make_config(**overrides) -> EngineConfig:
    config = EngineConfig(approvers=dict(APPROVERS))
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def engine(clock):
    return MemoryEngine(make_config(), clock=clock)


@pytest.fixture
def citizen(engine):
    """An active citizen with one T1 knowledge record and its instance id."""
    record = engine.birth(
        "Che", "stay curious", shared_knowledge=["tier weights drive recall"]
    )
    return record["citizen_id"], record["current_instance"]

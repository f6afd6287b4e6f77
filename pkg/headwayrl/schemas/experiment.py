from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from headwayrl.schemas.agent import AgentConfig, RewardParams
from headwayrl.schemas.baselines import FitnessWeights, GAParams


class ScenarioDefaults(BaseModel):
    """Transform settings used when the scenario command gets none on the command line."""
    model_config = ConfigDict(extra="forbid")

    window: Tuple[int, int] = Field(default=(900, 1080), description="Shifted window [start, end)")
    shifts: List[int] = Field(default_factory=lambda: [-180, -120, -60, 60, 120])
    rates: List[float] = Field(default_factory=lambda: [0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7])


class ExperimentConfig(BaseModel):
    """Schema of the global ``--config`` YAML file."""
    model_config = ConfigDict(extra="forbid")

    line_file: Optional[str] = Field(None, description="Default line config path")
    demand_file: Optional[str] = Field(None, description="Default demand CSV path")
    agent: AgentConfig = Field(default_factory=AgentConfig)
    reward: RewardParams = Field(default_factory=RewardParams)
    ga: GAParams = Field(default_factory=GAParams)
    fitness: FitnessWeights = Field(default_factory=FitnessWeights)
    scenario: ScenarioDefaults = Field(default_factory=ScenarioDefaults)
    evaluation_episodes: int = Field(default=20, ge=1, description="Post-training greedy episodes for statistics")


class RunManifest(BaseModel):
    """Everything needed to re-run a command and get the same bytes out."""
    command: str
    argv: List[str]
    config: Dict
    seed: int
    input_digests: Dict[str, str] = Field(default_factory=dict, description="sha256 per input path")
    outputs: List[str] = Field(default_factory=list)
    artifact_version: str

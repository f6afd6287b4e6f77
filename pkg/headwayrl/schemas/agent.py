from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class RewardParams(BaseModel):
    """Weights of the dispatch reward."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    omega: float = Field(default=1.0 / 5000.0, ge=0.0, description="Waiting-time penalty weight")
    beta: float = Field(default=0.2, ge=0.0, description="Stranding penalty weight")
    mu: float = Field(default=5000.0, gt=0.0, description="Waiting-time normaliser for the state")


# Operator presets: favour short waits, or favour few departures.
OMEGA_PRESETS = {
    "waiting": 1.0 / 1000.0,
    "departures": 1.0 / 7000.0,
}


class EpsilonSchedule(BaseModel):
    """Linear decay from ``start`` to ``end`` over ``decay_fraction`` of all steps."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    start: float = Field(default=1.0, ge=0.0, le=1.0)
    end: float = Field(default=0.05, ge=0.0, le=1.0)
    decay_fraction: float = Field(default=0.6, gt=0.0, le=1.0)

    def value(self, step: int, total_steps: int) -> float:
        horizon = max(1, int(round(self.decay_fraction * total_steps)))
        if step >= horizon:
            return self.end
        return self.start + (self.end - self.start) * (step / horizon)


class AgentConfig(BaseModel):
    """DQN hyperparameters. The defaults describe the full-size 10 x 300 network."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden_layers: int = Field(default=10, ge=0)
    hidden_units: int = Field(default=300, ge=1)
    learning_rate: float = Field(default=0.01)
    gamma: float = Field(default=0.4)
    batch_size: int = Field(default=32, ge=1)
    buffer_size: int = Field(default=3000, ge=1)
    warmup: Optional[int] = Field(default=None, description="Transitions stored before learning starts; defaults to batch_size")
    epsilon: EpsilonSchedule = Field(default_factory=EpsilonSchedule)
    target_sync_steps: int = Field(default=500, ge=1)
    episodes: int = Field(default=300, ge=0)
    early_stop: bool = Field(default=True, description="Stop once the departure-count spread plateaus")
    early_stop_window: int = Field(default=25, ge=2)
    early_stop_tol: float = Field(default=0.05, ge=0.0)
    store_forced: bool = Field(default=False, description="Keep forced endpoint transitions in replay")
    seed: int = Field(default=7, ge=0)

    @field_validator("learning_rate")
    @classmethod
    def positive_lr(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("learning_rate must be positive")
        return v

    @field_validator("gamma")
    @classmethod
    def discount_range(cls, v: float) -> float:
        if not 0.0 <= v < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        return v

    @model_validator(mode="after")
    def check_warmup(self) -> "AgentConfig":
        if self.warmup is not None and self.warmup < self.batch_size:
            raise ValueError("warmup must be at least batch_size")
        return self

    @property
    def warmup_size(self) -> int:
        return self.warmup if self.warmup is not None else self.batch_size

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class FitnessWeights(BaseModel):
    """Weights of the timetable search objective (lower fitness is better)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    w_gap: float = Field(default=1.0, ge=0.0, description="Per-half-hour |provided - consumed| capacity")
    w_nsp: float = Field(default=5.0, ge=0.0, description="Stranding events")
    w_nd: float = Field(default=1.0, ge=0.0, description="Departures")


class GAParams(BaseModel):
    """Genetic / memetic search parameters."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    population: int = Field(default=40, ge=2)
    generations: int = Field(default=60, ge=0)
    crossover_rate: float = Field(default=0.9, ge=0.0, le=1.0)
    mutation_rate: Optional[float] = Field(
        default=None, ge=0.0, le=1.0, description="Per-minute flip probability; unset means 1 / chromosome length"
    )
    immigrant_fraction: float = Field(
        default=0.1, ge=0.0, le=0.5, description="Share of each generation replaced by fresh random timetables"
    )
    tournament_size: int = Field(default=3, ge=1)
    seed: int = Field(default=7, ge=0)
    ls_budget: int = Field(default=200, ge=0, description="Local-search evaluations per generation (memetic)")
    lamarckian: bool = Field(default=False, description="Write the refined elite back into the population")

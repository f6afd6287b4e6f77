from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Timetable(BaseModel):
    """Departure minutes of one direction, strictly increasing."""
    model_config = ConfigDict(frozen=True)

    departures: Tuple[int, ...] = Field(..., description="Departure minutes of day")

    @model_validator(mode="after")
    def check_sorted(self) -> "Timetable":
        deps = self.departures
        if any(b <= a for a, b in zip(deps, deps[1:])):
            raise ValueError("departures must be strictly increasing")
        return self

    def __len__(self) -> int:
        return len(self.departures)

    def gaps(self) -> List[int]:
        return [b - a for a, b in zip(self.departures, self.departures[1:])]


class Metrics(BaseModel):
    """Timetable evaluation triple plus bookkeeping totals."""
    nd: int = Field(..., ge=0, description="Number of departures")
    awt: float = Field(..., ge=0.0, description="Average waiting time of served passengers, minutes")
    nsp: int = Field(..., ge=0, description="Stranding events summed over trips and stations")
    unserved: int = Field(default=0, ge=0, description="Passengers still queued at end of day")
    served: int = Field(default=0, ge=0, description="Passengers who boarded")
    total_waiting: float = Field(default=0.0, ge=0.0, description="Sum of waiting minutes")


class CapacityBucket(BaseModel):
    """Half-hour slice of provided vs consumed carrying capacity."""
    minute_bucket: int = Field(..., description="Bucket start minute")
    provided: float = Field(..., description="Sum of e_m over departures in the bucket")
    consumed: float = Field(..., description="Sum of o_m over departures in the bucket")
    departures: int = Field(default=0, description="Departures in the bucket")
    mean_interval: Optional[float] = Field(default=None, description="Mean gap to the previous departure")
    arrivals: int = Field(default=0, description="Passenger arrivals in the bucket")


class EvaluationReport(BaseModel):
    """Metrics JSON document."""
    nd: int
    awt: float
    nsp: int
    unserved: int
    served: int
    total_waiting: float
    capacity_series: List[CapacityBucket] = Field(default_factory=list)

    @classmethod
    def build(cls, metrics: Metrics, series: List[CapacityBucket]) -> "EvaluationReport":
        return cls(**metrics.model_dump(), capacity_series=series)

from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator

from headwayrl.schemas.demand import MINUTES_PER_DAY, Direction


class LineConfig(BaseModel):
    """
    Static description of one direction of a bus line.

    Seat count and capacity defaults (30 / 45) are placeholders sized for an
    urban single-deck bus; override them per line.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    line_id: str = Field(default="line", description="Line identifier")
    direction: Direction = Field(default=Direction.UP, description="Line direction")
    stations: int = Field(..., ge=2, description="Number of stations K")
    seats: int = Field(default=30, gt=0, description="Seats per bus C")
    capacity: int = Field(default=45, gt=0, description="Maximum passengers on board C_max")
    comfort_coefficient: float = Field(default=1.5, gt=0.0, description="Comfort coefficient alpha")
    service_start: int = Field(..., ge=0, le=MINUTES_PER_DAY, description="First departure minute")
    service_end: int = Field(..., ge=0, le=MINUTES_PER_DAY, description="Last departure minute")
    min_interval: int = Field(default=2, ge=1, description="T_min in minutes")
    max_interval: int = Field(default=15, ge=1, description="T_max in minutes")

    @model_validator(mode="after")
    def check_bounds(self) -> "LineConfig":
        if self.service_start >= self.service_end:
            raise ValueError("service_start must be before service_end")
        if self.capacity < self.seats:
            raise ValueError("capacity must be at least the seat count")
        if self.min_interval > self.max_interval:
            raise ValueError("min_interval must not exceed max_interval")
        if self.max_interval > self.window:
            raise ValueError("max_interval must not exceed the service window")
        return self

    @property
    def window(self) -> int:
        return self.service_end - self.service_start


class TravelTimeBand(BaseModel):
    """Segment travel times for departures from ``start_minute`` until the next band."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    start_minute: int = Field(..., ge=0, le=MINUTES_PER_DAY)
    segment_times: List[float] = Field(..., min_length=1, description="K-1 minutes, station k to k+1")


class LineConfigFile(LineConfig):
    """Schema of the line config file: the line plus its travel-time bands."""

    travel_time_bands: List[TravelTimeBand] = Field(default_factory=list)
    default_segment_time: float = Field(default=2.0, ge=0.0, description="Used when no bands are given")

    @model_validator(mode="after")
    def check_bands(self) -> "LineConfigFile":
        starts = [band.start_minute for band in self.travel_time_bands]
        if starts != sorted(set(starts)):
            raise ValueError("travel_time_bands must have strictly increasing start_minute")
        for band in self.travel_time_bands:
            if len(band.segment_times) != self.stations - 1:
                raise ValueError(f"band at {band.start_minute} needs {self.stations - 1} segment times")
        return self

    def line(self) -> LineConfig:
        return LineConfig(**self.model_dump(include=set(LineConfig.model_fields)))

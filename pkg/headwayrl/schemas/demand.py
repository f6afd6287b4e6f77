from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MINUTES_PER_DAY = 1440


class Direction(str, Enum):
    """Travel direction of one line; each direction has its own control point."""
    UP = "up"
    DOWN = "down"


class DemandFormat(str, Enum):
    """Supported demand file layouts."""
    CSV_V1 = "csv-v1"


class PassengerRecord(BaseModel):
    """One origin-destination trip request, timestamped at station arrival."""
    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, description="Unique record identifier")
    arrival_minute: float = Field(..., ge=0.0, lt=MINUTES_PER_DAY, description="Minute of day the passenger reaches the origin")
    origin_station: int = Field(..., ge=1, description="1-based boarding station")
    destination_station: int = Field(..., ge=2, description="1-based alighting station, after the origin")

    @model_validator(mode="after")
    def check_direction(self) -> "PassengerRecord":
        if self.destination_station <= self.origin_station:
            raise ValueError("destination before origin")
        return self


class DemandSet(BaseModel):
    """Demand of one direction of one line for one service day."""
    model_config = ConfigDict(frozen=True)

    records: Tuple[PassengerRecord, ...] = Field(default=(), description="Sorted by (origin_station, arrival_minute)")
    line_id: str = Field(default="line", description="Line identifier")
    direction: Direction = Field(default=Direction.UP, description="Line direction")
    day_label: str = Field(default="day", description="Free-form day label")

    @model_validator(mode="after")
    def check_order_and_ids(self) -> "DemandSet":
        keys = [(r.origin_station, r.arrival_minute) for r in self.records]
        if any(a > b for a, b in zip(keys, keys[1:])):
            raise ValueError("records must be sorted by (origin_station, arrival_minute)")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("record ids must be unique")
        return self

    def __len__(self) -> int:
        return len(self.records)

    def with_records(self, records: List[PassengerRecord]) -> "DemandSet":
        """Same line/day labels, new records (sorted here)."""
        ordered = tuple(sorted(records, key=lambda r: (r.origin_station, r.arrival_minute, r.id)))
        return DemandSet(records=ordered, line_id=self.line_id, direction=self.direction, day_label=self.day_label)


class RateBreakpoint(BaseModel):
    """Piecewise-constant arrival rate: ``rate`` holds from ``minute`` to the next breakpoint."""
    model_config = ConfigDict(extra="forbid")

    minute: float = Field(..., ge=0.0, le=MINUTES_PER_DAY)
    rate: float = Field(..., description="Relative arrival rate")

    @field_validator("rate")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("negative rates are not allowed")
        return v


class GaussianPeak(BaseModel):
    """One component of a mixture-of-Gaussians arrival profile."""
    model_config = ConfigDict(extra="forbid")

    center: float = Field(..., description="Peak minute of day")
    width: float = Field(..., gt=0.0, description="Standard deviation in minutes")
    weight: float = Field(default=1.0, description="Relative weight")

    @field_validator("weight")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("negative rates are not allowed")
        return v


class OdProfile(BaseModel):
    """Relative popularity of stations as origins and as destinations."""
    model_config = ConfigDict(extra="forbid")

    origin_weights: Optional[List[float]] = Field(None, description="K-1 weights for stations 1..K-1")
    destination_weights: Optional[List[float]] = Field(None, description="K-1 weights for stations 2..K")

    @field_validator("origin_weights", "destination_weights")
    @classmethod
    def non_negative(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(w < 0 for w in v):
            raise ValueError("negative rates are not allowed")
        return v


class SyntheticDemandSpec(BaseModel):
    """
    Schema of the synthetic demand spec file (YAML).

    Either ``rate_curve`` (piecewise constant) or ``peaks`` (mixture of
    Gaussians over ``base_rate``) shapes the arrival profile; with neither
    the profile is uniform over the window.
    """
    model_config = ConfigDict(extra="forbid")

    stations: int = Field(..., description="Number of stations K")
    passengers: int = Field(..., ge=0, description="Total passengers generated")
    window_start: float = Field(..., ge=0.0, le=MINUTES_PER_DAY)
    window_end: float = Field(..., ge=0.0, le=MINUTES_PER_DAY)
    rate_curve: List[RateBreakpoint] = Field(default_factory=list)
    peaks: List[GaussianPeak] = Field(default_factory=list)
    base_rate: float = Field(default=0.0, description="Flat rate added under the peaks")
    od_profile: OdProfile = Field(default_factory=OdProfile)
    line_id: str = "synthetic"
    direction: Direction = Direction.UP
    day_label: str = "synthetic"

    @field_validator("stations")
    @classmethod
    def enough_stations(cls, v: int) -> int:
        if v < 2:
            raise ValueError("a line needs at least 2 stations (K >= 2)")
        return v

    @field_validator("base_rate")
    @classmethod
    def non_negative_base(cls, v: float) -> float:
        if v < 0:
            raise ValueError("negative rates are not allowed")
        return v

    @model_validator(mode="after")
    def check_window_and_profile(self) -> "SyntheticDemandSpec":
        if self.window_end <= self.window_start:
            raise ValueError("empty service window")
        if self.rate_curve and self.peaks:
            raise ValueError("give either rate_curve or peaks, not both")
        minutes = [bp.minute for bp in self.rate_curve]
        if minutes != sorted(minutes):
            raise ValueError("rate_curve breakpoints must be sorted by minute")
        width = self.stations - 1
        profile = self.od_profile
        for name, weights in (("origin_weights", profile.origin_weights), ("destination_weights", profile.destination_weights)):
            if weights is not None and len(weights) != width:
                raise ValueError(f"od_profile.{name} needs {width} entries")
        return self

"""
Static line description: carrying capacity per departure and the
piecewise-constant travel-time table.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from headwayrl.core.config import load_yaml_config
from headwayrl.core.exceptions import TravelTimeError
from headwayrl.schemas.line import LineConfig, LineConfigFile, TravelTimeBand

logger = logging.getLogger(__name__)


def trip_capacity(line: LineConfig) -> float:
    """
    Carrying capacity e_m offered by one departure: alpha * C * (K - 1).

    Args:
        line: Line configuration

    Returns:
        Capacity in passenger-segment units
    """
    return float(line.comfort_coefficient * line.seats * (line.stations - 1))


def capacity_at(line: LineConfig, depart_m: int) -> float:
    """e_m for a departure at ``depart_m``; constant across the day for a single fleet type."""
    return trip_capacity(line)


class TravelTimeTable:
    """
    Segment travel times t_m^k as a function of departure minute.

    Bands are piecewise constant: band ``i`` applies to departures from its
    ``start_minute`` up to the next band's start. The first band also covers
    departures before its start. Dwell time is folded into the segment times.
    """

    def __init__(self, stations: int, bands: Sequence[Tuple[int, Sequence[float]]]):
        if stations < 2:
            raise TravelTimeError("a line needs at least two stations")
        if not bands:
            raise TravelTimeError("at least one travel-time band is required")

        starts = np.array([int(b[0]) for b in bands], dtype=np.int64)
        if np.any(np.diff(starts) <= 0):
            raise TravelTimeError("band start minutes must be strictly increasing")

        times = np.array([list(b[1]) for b in bands], dtype=np.float64)
        if times.shape != (len(bands), stations - 1):
            raise TravelTimeError(f"every band needs {stations - 1} segment times")
        if not np.all(np.isfinite(times)):
            raise TravelTimeError("segment times must be finite")
        if np.any(times < 0):
            band, seg = np.argwhere(times < 0)[0]
            raise TravelTimeError(f"negative travel time in band {int(starts[band])}, segment {seg + 1}")

        self.stations = stations
        self.band_starts = starts
        self.segment_times = times
        # offsets[b, k-1] = minutes from the terminus to station k under band b
        self.offsets = np.concatenate([np.zeros((len(bands), 1)), np.cumsum(times, axis=1)], axis=1)
        for arr in (self.band_starts, self.segment_times, self.offsets):
            arr.setflags(write=False)

    @classmethod
    def constant(cls, stations: int, minutes: float) -> "TravelTimeTable":
        return cls(stations, [(0, [minutes] * (stations - 1))])

    @classmethod
    def from_bands(cls, stations: int, bands: List[TravelTimeBand], default_segment_time: float = 2.0) -> "TravelTimeTable":
        if not bands:
            return cls.constant(stations, default_segment_time)
        return cls(stations, [(b.start_minute, b.segment_times) for b in bands])

    def band_index(self, depart_m: float) -> int:
        idx = int(np.searchsorted(self.band_starts, depart_m, side="right")) - 1
        return max(idx, 0)

    def travel_time(self, depart_m: float, k: int) -> float:
        """t_m^k: minutes from station k to k + 1 for a bus leaving the terminus at ``depart_m``."""
        if not 1 <= k <= self.stations - 1:
            raise ValueError(f"segment {k} out of range 1..{self.stations - 1}")
        return float(self.segment_times[self.band_index(depart_m), k - 1])

    def station_arrivals(self, depart_m: float) -> np.ndarray:
        """Arrival minute at stations 1..K (index 0 is the terminus)."""
        return depart_m + self.offsets[self.band_index(depart_m)]

    def validate_no_overtaking(self, start_minute: int, end_minute: int) -> None:
        """
        Check that no departure in ``[start_minute, end_minute]`` reaches any
        station before an earlier departure does.

        Raises:
            TravelTimeError: names the first offending departure pair and station.
        """
        minutes = np.arange(start_minute, end_minute + 1, dtype=np.float64)
        if minutes.size < 2:
            return
        idx = np.clip(np.searchsorted(self.band_starts, minutes, side="right") - 1, 0, None)
        arrivals = minutes[:, None] + self.offsets[idx]
        bad = np.argwhere(np.diff(arrivals, axis=0) < 0)
        if bad.size:
            i, k = bad[0]
            raise TravelTimeError(
                f"departure at {int(minutes[i + 1])} overtakes the one at {int(minutes[i])} "
                f"before station {k + 1}"
            )


def arrival_minute(tt: TravelTimeTable, depart_m: float, k: int) -> float:
    """
    Arrival minute at station ``k`` for a bus leaving the terminus at ``depart_m``.

    Raises:
        ValueError: ``k`` outside ``1..K``.
    """
    if not 1 <= k <= tt.stations:
        raise ValueError(f"station {k} out of range 1..{tt.stations}")
    return float(depart_m + tt.offsets[tt.band_index(depart_m), k - 1])


def load_line_config(path: Union[str, Path]) -> Tuple[LineConfig, TravelTimeTable]:
    """
    Load a line YAML file and build its travel-time table.

    The table is checked for overtaking across the service window.
    """
    config = load_yaml_config(path, LineConfigFile)
    line = config.line()
    tt = TravelTimeTable.from_bands(line.stations, config.travel_time_bands, config.default_segment_time)
    tt.validate_no_overtaking(line.service_start, line.service_end)
    logger.info(
        f"Loaded line {line.line_id} ({line.direction.value}): {line.stations} stations, "
        f"window {line.service_start}-{line.service_end}, {len(tt.band_starts)} travel-time bands"
    )
    return line, tt

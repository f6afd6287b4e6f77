"""
Deterministic trip engine.

A trip visits stations 1..K at the minutes given by the travel-time table.
At each station it first lets off the passengers bound there, then boards
queued passengers who arrived no later than the bus, in arrival order, until
the bus holds C_max. Whoever is left behind by the capacity limit counts as
stranded for that trip.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from headwayrl.core.exceptions import SimulationError, TimetableError
from headwayrl.schemas.demand import DemandSet
from headwayrl.schemas.line import LineConfig
from headwayrl.schemas.simulation import CapacityBucket, EvaluationReport, Metrics, Timetable
from headwayrl.services.line_model import TravelTimeTable, capacity_at
from headwayrl.services.od_data import arrival_counts
from headwayrl.services.reporting import write_frame

logger = logging.getLogger(__name__)

TIMETABLE_COLUMNS = ["depart_minute"]
BUCKET_MINUTES = 30


class StationQueues:
    """
    Per-station passenger queues for one direction.

    Each origin station keeps its passengers in arrival order together with a
    head index: everyone before the head has boarded, everyone from the head
    on is still waiting or has not arrived yet. Arrival is decided by
    comparing ``arrival`` with a bus's arrival minute, so future passengers
    are present in the arrays from the start.
    """

    def __init__(self, demand: DemandSet, stations: int):
        self.stations = stations
        self.ids: List[np.ndarray] = []
        self.arrival: List[np.ndarray] = []
        self.destination: List[np.ndarray] = []
        self.board_time: List[np.ndarray] = []
        self.head = np.zeros(stations, dtype=np.int64)

        by_origin = [[] for _ in range(stations)]
        for record in demand.records:
            if not 1 <= record.origin_station < stations or record.destination_station > stations:
                raise SimulationError(
                    f"passenger {record.id} travels {record.origin_station}->{record.destination_station} "
                    f"on a {stations}-station line"
                )
            by_origin[record.origin_station - 1].append(record)

        for records in by_origin:
            # DemandSet order is (origin, arrival, id), so each slice is already FIFO
            self.ids.append(np.array([r.id for r in records], dtype=object))
            self.arrival.append(np.array([r.arrival_minute for r in records], dtype=np.float64))
            self.destination.append(np.array([r.destination_station for r in records], dtype=np.int64))
            self.board_time.append(np.full(len(records), np.inf))

        self.total = sum(len(a) for a in self.arrival)

    def copy(self) -> "StationQueues":
        """Independent queue state sharing the immutable passenger arrays."""
        clone = object.__new__(StationQueues)
        clone.stations = self.stations
        clone.ids = self.ids
        clone.arrival = self.arrival
        clone.destination = self.destination
        clone.board_time = [bt.copy() for bt in self.board_time]
        clone.head = self.head.copy()
        clone.total = self.total
        return clone

    def eligible(self, k: int, minute: float) -> int:
        """Passengers queued at station ``k`` who arrived by ``minute``."""
        arr = self.arrival[k - 1]
        return max(int(np.searchsorted(arr, minute, side="right")) - int(self.head[k - 1]), 0)

    def waiting_at(self, k: int, minute: float) -> int:
        """Passengers at station ``k`` who have arrived by ``minute`` and not boarded by then."""
        arr = self.arrival[k - 1]
        arrived = int(np.searchsorted(arr, minute, side="right"))
        return arrived - int(np.count_nonzero(self.board_time[k - 1][:arrived] <= minute))

    def arriving_between(self, k: int, start: float, end: float) -> int:
        """Passengers appearing at station ``k`` in ``(start, end]``."""
        arr = self.arrival[k - 1]
        return int(np.searchsorted(arr, end, side="right") - np.searchsorted(arr, start, side="right"))

    def remaining(self) -> int:
        """Passengers never boarded so far."""
        return int(sum(len(a) for a in self.arrival) - self.head.sum())


@dataclass
class ServedPassengers:
    """Passengers carried by one trip, aligned arrays."""
    ids: np.ndarray
    arrival: np.ndarray
    board_time: np.ndarray
    origin: np.ndarray
    destination: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class TripResult:
    """Outcome of one bus trip. Station-indexed arrays have length K, segment arrays K - 1."""
    depart_minute: int
    station_arrivals: np.ndarray
    boardings: np.ndarray
    alightings: np.ndarray
    stranded: np.ndarray
    onboard_profile: np.ndarray
    max_onboard: int
    waiting_total: float
    capacity_used: int
    served: ServedPassengers = field(repr=False)

    @property
    def boarded(self) -> int:
        return int(self.boardings.sum())


def simulate_trip(
    queues: StationQueues,
    line: LineConfig,
    tt: TravelTimeTable,
    depart_m: int,
    commit: bool = False,
    uncapped: bool = False,
) -> TripResult:
    """
    Run one trip leaving the terminus at ``depart_m``.

    Args:
        queues: Current queue state
        line: Line configuration
        tt: Travel-time table
        depart_m: Departure minute, inside the service window
        commit: Remove boarders from the queues; otherwise the queues are untouched
        uncapped: Ignore C_max (used by the scheme-two ablation features)

    Returns:
        TripResult for the trip
    """
    if not line.service_start <= depart_m <= line.service_end:
        raise SimulationError(f"departure {depart_m} outside service window {line.service_start}-{line.service_end}")
    if queues.stations != line.stations:
        raise SimulationError(f"queues built for {queues.stations} stations, line has {line.stations}")

    K = line.stations
    limit = np.iinfo(np.int64).max if uncapped else line.capacity
    times = tt.station_arrivals(depart_m)

    boardings = np.zeros(K, dtype=np.int64)
    alightings = np.zeros(K, dtype=np.int64)
    stranded = np.zeros(K - 1, dtype=np.int64)
    profile = np.zeros(K - 1, dtype=np.int64)
    by_dest = np.zeros(K + 1, dtype=np.int64)
    onboard = 0
    waiting = 0.0
    served = []

    for k in range(1, K + 1):
        alightings[k - 1] = by_dest[k]
        onboard -= int(by_dest[k])
        if k == K:
            break

        t_k = float(times[k - 1])
        head = int(queues.head[k - 1])
        arr = queues.arrival[k - 1]
        if head > len(arr):
            raise SimulationError(f"queue head past the end at station {k}")
        n_eligible = queues.eligible(k, t_k)
        n_board = min(n_eligible, limit - onboard)

        if n_board:
            sl = slice(head, head + n_board)
            dests = queues.destination[k - 1][sl]
            by_dest += np.bincount(dests, minlength=K + 1)
            waiting += float(np.sum(t_k - arr[sl]))
            served.append((k, sl, t_k))
            if commit:
                queues.board_time[k - 1][sl] = t_k
                queues.head[k - 1] = head + n_board

        boardings[k - 1] = n_board
        stranded[k - 1] = n_eligible - n_board
        onboard += n_board
        profile[k - 1] = onboard

    served_passengers = _collect_served(queues, served)
    capacity_used = int(np.sum(served_passengers.destination - served_passengers.origin))

    return TripResult(
        depart_minute=int(depart_m),
        station_arrivals=times,
        boardings=boardings,
        alightings=alightings,
        stranded=stranded,
        onboard_profile=profile,
        max_onboard=int(profile.max()) if profile.size else 0,
        waiting_total=waiting,
        capacity_used=capacity_used,
        served=served_passengers,
    )


def _collect_served(queues: StationQueues, served) -> ServedPassengers:
    if not served:
        empty_i = np.zeros(0, dtype=np.int64)
        return ServedPassengers(np.zeros(0, dtype=object), np.zeros(0), np.zeros(0), empty_i, empty_i.copy())
    ids, arrival, board, origin, dest = [], [], [], [], []
    for k, sl, t_k in served:
        n = sl.stop - sl.start
        ids.append(queues.ids[k - 1][sl])
        arrival.append(queues.arrival[k - 1][sl])
        board.append(np.full(n, t_k))
        origin.append(np.full(n, k, dtype=np.int64))
        dest.append(queues.destination[k - 1][sl])
    return ServedPassengers(
        ids=np.concatenate(ids),
        arrival=np.concatenate(arrival),
        board_time=np.concatenate(board),
        origin=np.concatenate(origin),
        destination=np.concatenate(dest),
    )


def stranding_total(trip: TripResult) -> int:
    """ds_m: stranding events of one trip summed over stations."""
    return int(trip.stranded.sum())


def validate_timetable(timetable: Timetable, line: LineConfig) -> None:
    """
    Check endpoints and interval bounds.

    The final gap may be shorter than T_min; every gap must respect T_max.

    Raises:
        TimetableError: describing the first violation found.
    """
    deps = timetable.departures
    if not deps:
        raise TimetableError("timetable has no departures")
    if deps[0] != line.service_start:
        raise TimetableError(f"first departure {deps[0]} is not service_start {line.service_start}")
    if deps[-1] != line.service_end:
        raise TimetableError(f"last departure {deps[-1]} is not service_end {line.service_end}")
    gaps = timetable.gaps()
    for i, gap in enumerate(gaps):
        final = i == len(gaps) - 1
        if gap > line.max_interval:
            raise TimetableError(f"gap {deps[i]}->{deps[i + 1]} exceeds T_max={line.max_interval}")
        if gap < line.min_interval and not final:
            raise TimetableError(f"gap {deps[i]}->{deps[i + 1]} below T_min={line.min_interval}")


def evaluate_timetable(
    demand: DemandSet,
    line: LineConfig,
    tt: TravelTimeTable,
    timetable: Timetable,
) -> Tuple[Metrics, List[TripResult]]:
    """
    Simulate every departure of ``timetable`` in order against one set of queues.

    Returns:
        Aggregate metrics and the per-trip results
    """
    for m in timetable.departures:
        if not line.service_start <= m <= line.service_end:
            raise TimetableError(f"departure {m} outside service window {line.service_start}-{line.service_end}")

    queues = StationQueues(demand, line.stations)
    trips = [simulate_trip(queues, line, tt, m, commit=True) for m in timetable.departures]
    return summarize(trips, queues), trips


def summarize(trips: List[TripResult], queues: StationQueues) -> Metrics:
    """Metrics of a sequence of committed trips and the queues they left behind."""
    served = sum(t.boarded for t in trips)
    total_waiting = float(sum(t.waiting_total for t in trips))
    return Metrics(
        nd=len(trips),
        awt=total_waiting / served if served else 0.0,
        nsp=sum(stranding_total(t) for t in trips),
        unserved=queues.remaining(),
        served=served,
        total_waiting=total_waiting,
    )


def bucket_starts(line: LineConfig, bucket: int = BUCKET_MINUTES) -> List[int]:
    first = (line.service_start // bucket) * bucket
    return list(range(first, line.service_end + 1, bucket))


def capacity_series(
    trips: List[TripResult],
    line: LineConfig,
    demand: Optional[DemandSet] = None,
    bucket: int = BUCKET_MINUTES,
) -> List[CapacityBucket]:
    """
    Half-hour provided (sum of e_m) and consumed (sum of o_m) capacity, with
    departure counts, mean departure interval and passenger arrivals.
    """
    starts = bucket_starts(line, bucket)
    provided = np.zeros(len(starts))
    consumed = np.zeros(len(starts))
    departures = np.zeros(len(starts), dtype=np.int64)
    gap_sum = np.zeros(len(starts))
    gap_count = np.zeros(len(starts), dtype=np.int64)
    first = starts[0]

    previous = None
    for trip in trips:
        i = (trip.depart_minute - first) // bucket
        provided[i] += capacity_at(line, trip.depart_minute)
        consumed[i] += trip.capacity_used
        departures[i] += 1
        if previous is not None:
            gap_sum[i] += trip.depart_minute - previous
            gap_count[i] += 1
        previous = trip.depart_minute

    arrivals = arrival_counts(demand, starts, bucket) if demand is not None else [0] * len(starts)

    return [
        CapacityBucket(
            minute_bucket=start,
            provided=float(provided[i]),
            consumed=float(consumed[i]),
            departures=int(departures[i]),
            mean_interval=float(gap_sum[i] / gap_count[i]) if gap_count[i] else None,
            arrivals=arrivals[i],
        )
        for i, start in enumerate(starts)
    ]


def evaluation_report(
    demand: DemandSet,
    line: LineConfig,
    tt: TravelTimeTable,
    timetable: Timetable,
) -> Tuple[EvaluationReport, List[TripResult]]:
    """evaluate_timetable plus the half-hour capacity series, as a report document."""
    metrics, trips = evaluate_timetable(demand, line, tt, timetable)
    return EvaluationReport.build(metrics, capacity_series(trips, line, demand)), trips


def series_frame(series: List[CapacityBucket]) -> pd.DataFrame:
    return pd.DataFrame([b.model_dump() for b in series], columns=list(CapacityBucket.model_fields))


def load_timetable(path: Union[str, Path]) -> Timetable:
    """
    Read a timetable CSV (header ``depart_minute``).

    Raises:
        TimetableError: missing file, wrong header, non-integer minutes, or unsorted rows.
    """
    path = Path(path)
    if not path.is_file():
        raise TimetableError(f"{path}: timetable file not found")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise TimetableError(f"{path}: unreadable timetable ({e})") from e
    if [c.strip() for c in frame.columns] != TIMETABLE_COLUMNS:
        raise TimetableError(f"{path}: header must be depart_minute")

    minutes = []
    for row, raw in enumerate(frame.iloc[:, 0], start=2):
        text = raw.strip() if isinstance(raw, str) else ""
        try:
            value = float(text)
        except ValueError:
            raise TimetableError(f"{path}: row {row}: cannot read {text!r} as a minute")
        if not np.isfinite(value) or value != int(value):
            raise TimetableError(f"{path}: row {row}: departure minutes must be whole minutes")
        minutes.append(int(value))
    try:
        return Timetable(departures=tuple(minutes))
    except ValueError as e:
        raise TimetableError(f"{path}: departures must be strictly increasing") from e


def write_timetable(timetable: Timetable, path: Union[str, Path]) -> Path:
    return write_frame(pd.DataFrame({"depart_minute": list(timetable.departures)}), path)

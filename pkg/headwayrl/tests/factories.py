"""Builders and a reference simulator shared by the test modules."""

from typing import Any, Dict, List, Sequence, Tuple

from headwayrl.schemas.demand import DemandSet, PassengerRecord
from headwayrl.schemas.line import LineConfig

Row = Tuple[float, int, int]


def make_demand(rows: Sequence[Row], prefix: str = "p") -> DemandSet:
    """Demand from ``(arrival_minute, origin, destination)`` tuples, ids in row order."""
    records = [
        PassengerRecord(id=f"{prefix}{i + 1}", arrival_minute=t, origin_station=o, destination_station=d)
        for i, (t, o, d) in enumerate(rows)
    ]
    return DemandSet().with_records(records)


def make_line(**overrides) -> LineConfig:
    values = dict(
        line_id="T1",
        stations=4,
        seats=2,
        capacity=3,
        comfort_coefficient=1.0,
        service_start=600,
        service_end=660,
        min_interval=2,
        max_interval=6,
    )
    values.update(overrides)
    return LineConfig(**values)


def oracle_evaluate(
    passengers: Sequence[Tuple[str, float, int, int]],
    stations: int,
    capacity: int,
    departures: Sequence[int],
    segment_times: Sequence[float],
) -> Dict[str, Any]:
    """
    Replay every (bus, station) visit in time order with plain lists.

    Visits at the same minute are handled in departure order, then station order.
    Besides the aggregates, ``trips`` holds per-station counts for each departure.
    """
    offsets = [0.0]
    for t in segment_times:
        offsets.append(offsets[-1] + t)

    events = []
    for j, m in enumerate(departures):
        for k in range(1, stations + 1):
            events.append((m + offsets[k - 1], j, k))
    events.sort()

    boarded: Dict[str, float] = {}
    onboard: List[List[int]] = [[] for _ in departures]
    trips = [
        {
            "station_arrivals": [0.0] * stations,
            "boardings": [0] * stations,
            "alightings": [0] * stations,
            "stranded": [0] * (stations - 1),
            "onboard_profile": [0] * (stations - 1),
        }
        for _ in departures
    ]
    stranded = 0
    waiting = 0.0
    for t, j, k in events:
        trip = trips[j]
        trip["station_arrivals"][k - 1] = t
        before = len(onboard[j])
        onboard[j] = [d for d in onboard[j] if d != k]
        trip["alightings"][k - 1] = before - len(onboard[j])
        if k == stations:
            continue
        queue = sorted(
            (p for p in passengers if p[2] == k and p[0] not in boarded and p[1] <= t),
            key=lambda p: (p[1], p[0]),
        )
        space = capacity - len(onboard[j])
        for pid, t_a, _, dest in queue[:space]:
            boarded[pid] = t
            onboard[j].append(dest)
            waiting += t - t_a
        trip["boardings"][k - 1] = min(len(queue), space)
        trip["stranded"][k - 1] = max(len(queue) - space, 0)
        trip["onboard_profile"][k - 1] = len(onboard[j])
        stranded += max(len(queue) - space, 0)

    served = len(boarded)
    return {
        "nd": len(departures),
        "served": served,
        "unserved": len(passengers) - served,
        "nsp": stranded,
        "total_waiting": waiting,
        "awt": waiting / served if served else 0.0,
        "trips": trips,
    }


def records_of(demand: DemandSet) -> List[Tuple[str, float, int, int]]:
    return [(r.id, r.arrival_minute, r.origin_station, r.destination_station) for r in demand.records]

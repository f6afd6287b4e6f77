"""
Origin-destination demand: ingestion, synthetic generation and the two
dynamic-scenario transforms (peak shift and resampling).

All operations are pure functions of their inputs and seed.
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy.stats import norm

from headwayrl.core.exceptions import ArtifactError, ConfigError, DemandFormatError
from headwayrl.core.rng import make_rng
from headwayrl.schemas.demand import (
    MINUTES_PER_DAY, DemandFormat, DemandSet, Direction, PassengerRecord, SyntheticDemandSpec
)
from headwayrl.services.reporting import write_frame

logger = logging.getLogger(__name__)

DEMAND_COLUMNS = ["id", "arrival_minute", "origin_station", "destination_station"]

# Upsampled duplicates are spread by up to this many minutes either side.
DUPLICATE_JITTER = 2.0

# Arrival minutes are stored with this many decimals so CSV round trips are exact.
ARRIVAL_DECIMALS = 4


def _text(raw) -> str:
    # short rows come back from pandas as NaN floats
    return raw.strip() if isinstance(raw, str) else ""


def _parse_field(raw, cast, row: int, field: str):
    text = _text(raw)
    if not text:
        raise DemandFormatError("missing value", row=row, field=field)
    try:
        return cast(text)
    except ValueError:
        raise DemandFormatError(f"cannot read {text!r} as {cast.__name__}", row=row, field=field)


def load_demand(
    path: Union[str, Path],
    schema: DemandFormat = DemandFormat.CSV_V1,
    stations: Optional[int] = None,
    line_id: str = "line",
    direction: Direction = Direction.UP,
    day_label: str = "day",
) -> DemandSet:
    """
    Load a demand CSV (header ``id,arrival_minute,origin_station,destination_station``).

    Row numbers in errors are 1-based file lines, so the first data row is row 2.
    When ``stations`` is given, station indices are checked against it.
    """
    path = Path(path)
    if schema != DemandFormat.CSV_V1:
        raise ConfigError(f"unsupported demand format {schema}")
    if not path.is_file():
        raise ArtifactError(f"{path}: demand file not found")

    if path.stat().st_size == 0:
        return DemandSet(line_id=line_id, direction=direction, day_label=day_label)

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        return DemandSet(line_id=line_id, direction=direction, day_label=day_label)
    except pd.errors.ParserError as e:
        raise DemandFormatError(f"malformed CSV ({e})") from e
    columns = [c.strip() for c in frame.columns]
    if columns != DEMAND_COLUMNS:
        raise DemandFormatError(f"header must be {','.join(DEMAND_COLUMNS)}", row=1)

    records: List[PassengerRecord] = []
    seen: Dict[str, int] = {}
    for row_number, row in enumerate(frame.itertuples(index=False, name=None), start=2):
        if not any(_text(v) for v in row):
            continue
        record_id = _text(row[0])
        if not record_id:
            raise DemandFormatError("missing value", row=row_number, field="id")
        arrival = _parse_field(row[1], float, row_number, "arrival_minute")
        origin = _parse_field(row[2], int, row_number, "origin_station")
        destination = _parse_field(row[3], int, row_number, "destination_station")

        if destination <= origin:
            raise DemandFormatError("destination before origin", row=row_number, field="destination_station")
        if stations is not None:
            if not 1 <= origin <= stations - 1:
                raise DemandFormatError(f"station {origin} out of range 1..{stations - 1}", row=row_number, field="origin_station")
            if destination > stations:
                raise DemandFormatError(f"station {destination} out of range 2..{stations}", row=row_number, field="destination_station")
        if record_id in seen:
            raise DemandFormatError(f"duplicate id (first seen on row {seen[record_id]})", row=row_number, field="id")

        try:
            record = PassengerRecord(
                id=record_id,
                arrival_minute=arrival,
                origin_station=origin,
                destination_station=destination,
            )
        except ValidationError as e:
            err = e.errors()[0]
            field = ".".join(str(p) for p in err["loc"]) or None
            raise DemandFormatError(err["msg"], row=row_number, field=field) from e

        seen[record_id] = row_number
        records.append(record)

    demand = DemandSet(line_id=line_id, direction=direction, day_label=day_label).with_records(records)
    logger.info(f"Loaded {len(demand)} passenger records from {path}")
    return demand


def demand_frame(demand: DemandSet) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.id, r.arrival_minute, r.origin_station, r.destination_station) for r in demand.records],
        columns=DEMAND_COLUMNS,
    )


def write_demand(demand: DemandSet, path: Union[str, Path]) -> Path:
    """Write ``demand`` in the CSV layout read by :func:`load_demand`."""
    return write_frame(demand_frame(demand), path)


def _minute_weights(spec: SyntheticDemandSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Start and relative mass of each (at most) one-minute cell of the window."""
    starts = np.arange(spec.window_start, spec.window_end, 1.0)
    widths = np.minimum(1.0, spec.window_end - starts)
    mids = starts + widths / 2.0

    if spec.rate_curve:
        bp_minutes = np.array([bp.minute for bp in spec.rate_curve])
        bp_rates = np.array([bp.rate for bp in spec.rate_curve])
        idx = np.searchsorted(bp_minutes, mids, side="right") - 1
        rates = np.where(idx >= 0, bp_rates[np.clip(idx, 0, None)], 0.0)
    elif spec.peaks:
        rates = np.full_like(mids, spec.base_rate)
        for peak in spec.peaks:
            rates = rates + peak.weight * norm.pdf(mids, loc=peak.center, scale=peak.width)
    else:
        rates = np.ones_like(mids)

    return starts, rates * widths


def generate_synthetic(spec: SyntheticDemandSpec, seed: int) -> DemandSet:
    """
    Draw ``spec.passengers`` trip requests whose arrival profile follows the
    spec's rate curve and whose OD pairs follow its station weights.

    Identical (spec, seed) pairs give identical record lists.
    """
    rng = make_rng(seed, "synthetic-demand")
    n = spec.passengers
    k = spec.stations

    starts, mass = _minute_weights(spec)
    total = mass.sum()
    if n > 0 and total <= 0:
        raise ConfigError("arrival rate is zero over the whole window")
    cells = rng.choice(len(starts), size=n, p=mass / total) if n else np.zeros(0, dtype=int)
    widths = np.minimum(1.0, spec.window_end - starts[cells])
    arrivals = np.round(starts[cells] + rng.random(n) * widths, ARRIVAL_DECIMALS)
    # rounding can land exactly on the (excluded) window end
    last = spec.window_end - 10.0 ** -ARRIVAL_DECIMALS
    arrivals = np.minimum(arrivals, min(last, MINUTES_PER_DAY - 10.0 ** -ARRIVAL_DECIMALS))

    origin_w = np.asarray(spec.od_profile.origin_weights or [1.0] * (k - 1), dtype=float)
    if n > 0 and origin_w.sum() <= 0:
        raise ConfigError("od_profile.origin_weights are all zero")
    origins = rng.choice(k - 1, size=n, p=origin_w / origin_w.sum()) + 1 if n else np.zeros(0, dtype=int)

    dest_w = np.asarray(spec.od_profile.destination_weights or [1.0] * (k - 1), dtype=float)
    destinations = np.zeros(n, dtype=int)
    for origin in range(1, k):
        members = np.flatnonzero(origins == origin)
        if members.size == 0:
            continue
        # destination weights are indexed from station 2
        candidates = dest_w[origin - 1:]
        if candidates.sum() <= 0:
            logger.warning(f"No destination weight downstream of station {origin}; using uniform")
            candidates = np.ones_like(candidates)
        picks = rng.choice(candidates.size, size=members.size, p=candidates / candidates.sum())
        destinations[members] = origin + 1 + picks

    records = [
        PassengerRecord(
            id=f"p{i + 1}",
            arrival_minute=float(arrivals[i]),
            origin_station=int(origins[i]),
            destination_station=int(destinations[i]),
        )
        for i in range(n)
    ]
    demand = DemandSet(line_id=spec.line_id, direction=spec.direction, day_label=spec.day_label).with_records(records)
    logger.info(f"Generated {n} synthetic passengers over {k} stations (seed {seed})")
    return demand


def shift_peak(demand: DemandSet, window: Tuple[float, float], shift: float) -> DemandSet:
    """
    Move every arrival inside ``[window[0], window[1])`` by ``shift`` minutes.

    Raises:
        ValueError: the window (or the shifted window) leaves the day, or a
            shifted record would fall outside ``[0, 1440)``.
    """
    start, end = window
    if not 0 <= start < end <= MINUTES_PER_DAY:
        raise ValueError(f"window {window} must lie inside the day")
    if start + shift < 0 or end + shift > MINUTES_PER_DAY:
        raise ValueError(f"shifted window [{start + shift}, {end + shift}) leaves the day")
    if shift == 0:
        return demand

    moved = []
    for record in demand.records:
        if start <= record.arrival_minute < end:
            arrival = record.arrival_minute + shift
            if not 0 <= arrival < MINUTES_PER_DAY:
                raise ValueError(f"record {record.id} would move outside the day")
            record = record.model_copy(update={"arrival_minute": arrival})
        moved.append(record)
    return demand.with_records(moved)


def resample(demand: DemandSet, rate: float, seed: int) -> DemandSet:
    """
    Thin (``rate < 1``) or thicken (``rate > 1``) the demand.

    Thinning keeps each record with probability ``rate``. Thickening keeps
    every record and adds ``floor(rate - 1)`` copies plus one more with
    probability ``frac(rate - 1)``; copies get fresh ids and a uniform
    jitter of up to two minutes.
    """
    if rate <= 0:
        raise ValueError("sampling rate must be positive")
    if rate == 1.0:
        return demand

    rng = make_rng(seed, "resample")
    records = demand.records
    n = len(records)

    if rate < 1.0:
        keep = rng.random(n) < rate
        return demand.with_records([r for r, k in zip(records, keep) if k])

    whole = math.floor(rate - 1.0)
    frac = (rate - 1.0) - whole
    copies = whole + (rng.random(n) < frac).astype(int)
    jitter = rng.uniform(-DUPLICATE_JITTER, DUPLICATE_JITTER, size=int(copies.sum()))

    out: List[PassengerRecord] = list(records)
    ids = {r.id for r in records}
    j = 0
    upper = MINUTES_PER_DAY - 10.0 ** -ARRIVAL_DECIMALS
    for record, count in zip(records, copies):
        for copy_no in range(1, int(count) + 1):
            arrival = float(np.clip(round(record.arrival_minute + jitter[j], ARRIVAL_DECIMALS), 0.0, upper))
            j += 1
            new_id = f"{record.id}#r{copy_no}"
            while new_id in ids:
                new_id += "'"
            ids.add(new_id)
            out.append(record.model_copy(update={"id": new_id, "arrival_minute": arrival}))
    return demand.with_records(out)


def arrival_counts(demand: DemandSet, bucket_starts: Sequence[int], bucket: int = 30) -> List[int]:
    """Passenger arrivals per bucket ``[start, start + bucket)``."""
    arrivals = np.sort(np.array([r.arrival_minute for r in demand.records], dtype=float))
    starts = np.asarray(bucket_starts, dtype=float)
    lo = np.searchsorted(arrivals, starts, side="left")
    hi = np.searchsorted(arrivals, starts + bucket, side="left")
    return [int(c) for c in hi - lo]

"""Reading, validating and writing hourly meter readings.

CSV schema (UTF-8, header required)::

    meter_id,timestamp,kwh
    m001,2013-05-27T00:00,1.25

Timestamps are naive local hours. The same schema is used for every
profiles file the CLI writes, so profiles round-trip through it exactly
(floats are written with ``repr``).
"""

from __future__ import annotations

import json
import logging
import re
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DataError, InvalidArgumentError
from .load_model import LoadProfile

log = logging.getLogger(__name__)

HEADER = ("meter_id", "timestamp", "kwh")
_TS = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:00")
_WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
GAP_POLICIES = ("fail", "zero", "linear-interpolate")
NEGATIVE_POLICIES = ("fail", "allow")


class SchemaError(DataError):
    pass


class GapError(DataError):
    pass


class DuplicateReadingError(DataError):
    pass


@dataclass(frozen=True)
class IngestPolicy:
    gap_fill: str = "fail"
    negative: str = "fail"
    alignment: tuple[int, int] | None = None  # (weekday 0=Mon, hour) or None for "any"
    trim_to_weeks: bool = False

    def __post_init__(self):
        if self.gap_fill not in GAP_POLICIES:
            raise InvalidArgumentError(f"gap_fill must be one of {GAP_POLICIES}, got {self.gap_fill!r}")
        if self.negative not in NEGATIVE_POLICIES:
            raise InvalidArgumentError(f"negative must be one of {NEGATIVE_POLICIES}, got {self.negative!r}")
        if self.alignment is not None:
            wd, hr = self.alignment
            if not (0 <= wd <= 6 and 0 <= hr <= 23):
                raise InvalidArgumentError(f"alignment {self.alignment!r} is not (weekday 0-6, hour 0-23)")


def parse_alignment(text: str) -> tuple[int, int] | None:
    """``"any"`` -> None; ``"mon:00"`` / ``"monday"`` -> (0, 0)."""
    text = text.strip().lower()
    if text == "any":
        return None
    day, _, hour = text.partition(":")
    day = day[:3]
    if day not in _WEEKDAYS:
        raise InvalidArgumentError(f"unknown weekday in alignment {text!r}")
    try:
        hr = int(hour) if hour else 0
    except ValueError:
        raise InvalidArgumentError(f"bad hour in alignment {text!r}") from None
    return _WEEKDAYS.index(day), hr


@dataclass
class MeterReport:
    rows: int = 0
    gaps: int = 0
    filled: int = 0
    trimmed: int = 0


@dataclass
class IngestReport:
    meters: dict[str, MeterReport] = field(default_factory=dict)

    @property
    def rows(self) -> int:
        return sum(m.rows for m in self.meters.values())

    def to_json(self) -> str:
        body = {
            "meters": {k: asdict(v) for k, v in sorted(self.meters.items())},
            "totals": {
                "meters": len(self.meters),
                "rows": self.rows,
                "gaps": sum(m.gaps for m in self.meters.values()),
                "filled": sum(m.filled for m in self.meters.values()),
                "trimmed": sum(m.trimmed for m in self.meters.values()),
            },
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _parse_columns(ids: list[str], stamps: list[str], raw: list[str]):
    """Validated columns; errors name the 1-based file row (header is row 1)."""
    if "" in ids:
        raise SchemaError(f"row {ids.index('') + 2}: empty meter_id")
    bad_ts = {ts for ts in set(stamps) if not _TS.fullmatch(ts)}
    if bad_ts:
        rowno = next(i for i, ts in enumerate(stamps, start=2) if ts in bad_ts)
        raise SchemaError(f"row {rowno}: timestamp {stamps[rowno - 2]!r} is not YYYY-MM-DDTHH:00")
    try:
        hours = np.array(stamps, dtype="datetime64[h]")
    except ValueError:
        for rowno, ts in enumerate(stamps, start=2):
            try:
                np.datetime64(ts, "h")
            except ValueError:
                raise SchemaError(f"row {rowno}: timestamp {ts!r} is not a valid date") from None
        raise
    try:
        kwh = np.array(raw, dtype=np.float64)
    except ValueError:
        kwh = None
    if kwh is None or not np.isfinite(kwh).all():
        for rowno, val in enumerate(raw, start=2):
            try:
                ok = np.isfinite(float(val))
            except ValueError:
                ok = False
            if not ok:
                raise SchemaError(f"row {rowno}: kwh {val!r} is not a finite number")
    return ids, hours, kwh


def read_readings(path: str | Path):
    """Parse a readings CSV into (meter ids, hours, kwh) columns."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n").split(",")
    if tuple(h.strip() for h in header) != HEADER:
        raise SchemaError(f"row 1: header must be {','.join(HEADER)}, got {','.join(header)!r}")
    try:
        with warnings.catch_warnings():
            # an over-long first row would otherwise become an index column
            warnings.simplefilter("error", pd.errors.ParserWarning)
            df = pd.read_csv(path, dtype=str, keep_default_na=False, index_col=False, engine="c")
    except pd.errors.ParserWarning:
        raise SchemaError("row 2: expected 3 fields") from None
    except pd.errors.ParserError as exc:
        raise SchemaError(f"{exc}".strip()) from None
    if df.shape[1] != 3:
        raise SchemaError(f"expected 3 columns, got {df.shape[1]}")
    if len(df) and df.isna().any(axis=None):
        rowno = int(np.flatnonzero(df.isna().any(axis=1).to_numpy())[0]) + 2
        raise SchemaError(f"row {rowno}: expected 3 fields")
    cols = [df[c].tolist() for c in df.columns]
    return _parse_columns(*cols)


def read_profiles(path: str | Path, policy: IngestPolicy = IngestPolicy()) -> tuple[list[LoadProfile], IngestReport]:
    """Load one profile per meter, sorted by meter id."""
    ids, hours, kwh = read_readings(path)
    return profiles_from_readings(ids, hours, kwh, policy)


def profiles_from_readings(ids: Sequence[str], hours: np.ndarray, kwh: np.ndarray, policy: IngestPolicy):
    if policy.negative == "fail":
        neg = np.flatnonzero(kwh < 0)
        if neg.size:
            i = int(neg[0])
            raise DataError(f"row {i + 2}: negative kwh {kwh[i]!r} for meter {ids[i]!r}")
    if len(ids) == 0:
        return [], IngestReport()
    meters, inverse = np.unique(np.asarray(ids, dtype=object), return_inverse=True)
    # sort by (meter, hour): rows of one meter become contiguous, in time order
    order = np.lexsort((hours.astype(np.int64), inverse))
    bounds = np.searchsorted(inverse[order], np.arange(meters.size + 1))
    profiles, report = [], IngestReport()
    for m, mid in enumerate(meters.tolist()):
        idx = order[bounds[m] : bounds[m + 1]]
        h = hours[idx].astype(np.int64)
        v = kwh[idx]
        dup = np.flatnonzero(np.diff(h) == 0)
        if dup.size:
            offenders = [_stamp(h[d]) for d in dup[:5]]
            raise DuplicateReadingError(f"meter {mid!r}: duplicate readings at {', '.join(offenders)}")
        profile, rep = _build_profile(mid, h, v, policy)
        report.meters[mid] = rep
        if profile is not None:
            profiles.append(profile)
    return profiles, report


def _stamp(hour) -> str:
    return f"{np.datetime64(int(hour), 'h')}:00"


def _build_profile(mid: str, h: np.ndarray, v: np.ndarray, policy: IngestPolicy):
    rep = MeterReport(rows=int(h.size))
    grid = np.arange(h[0], h[-1] + 1)
    present = np.zeros(grid.size, dtype=bool)
    present[h - h[0]] = True
    rep.gaps = int(grid.size - h.size)
    if rep.gaps:
        if policy.gap_fill == "fail":
            first = _stamp(grid[np.argmin(present)])
            raise GapError(f"meter {mid!r}: {rep.gaps} missing hours, first at {first}")
        full = np.zeros(grid.size)
        if policy.gap_fill == "linear-interpolate":
            full = np.interp(grid, h, v)
        full[present] = v
        v = full
        rep.filled = rep.gaps
    start = 0
    if policy.alignment is not None:
        wd, hr = policy.alignment
        # datetime64[h] epoch 1970-01-01T00 is a Thursday (weekday 3)
        how = ((grid // 24 + 3) % 7) * 24 + grid % 24
        hits = np.flatnonzero(how == wd * 24 + hr)
        if hits.size == 0:
            log.warning("meter %s: no sample at the required alignment; dropped", mid)
            rep.trimmed = int(grid.size)
            return None, rep
        start = int(hits[0])
    stop = grid.size
    if policy.trim_to_weeks:
        stop = start + (grid.size - start) // 168 * 168
    rep.trimmed = int(start + grid.size - stop)
    if stop <= start:
        log.warning("meter %s: shorter than one week after alignment; dropped", mid)
        return None, rep
    t0 = np.datetime64(int(grid[start]), "h").astype(datetime)
    return (
        LoadProfile(mid, t0, v[start:stop], allow_negative=policy.negative == "allow"),
        rep,
    )


def hour_strings(start: datetime, n: int, interval_hours: int = 1) -> np.ndarray:
    t0 = np.datetime64(start.replace(tzinfo=None), "h")
    stamps = t0 + np.arange(n) * interval_hours
    return np.char.add(stamps.astype(str), ":00")


def write_profiles(profiles: Sequence[LoadProfile], path: str | Path) -> None:
    """Write profiles in the ingest CSV schema; values use ``repr`` so re-reading is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(HEADER) + "\n")
        for p in profiles:
            if p.interval_hours != 1:
                raise InvalidArgumentError("the CSV schema carries hourly profiles only")
            stamps = hour_strings(p.start_time, len(p))
            prefix = p.customer_id + ","
            fh.writelines(f"{prefix}{ts},{v!r}\n" for ts, v in zip(stamps.tolist(), p.values.tolist()))


# --- synthetic fleets --------------------------------------------------------

ARCHETYPES = ("residential", "commercial", "streetlight", "industrial", "school")
DEFAULT_START = datetime(2013, 5, 27)  # a Monday


@dataclass(frozen=True)
class StepEvent:
    """Subtract ``depth`` kWh from ``duration`` samples starting at ``hour``."""

    customer: int
    hour: int
    depth: float
    duration: int = 1


@dataclass(frozen=True)
class SyntheticFleetSpec:
    archetypes: tuple[str, ...] = ARCHETYPES
    customers: int = 100  # spread round-robin over the archetypes
    weeks: int = 31
    noise: float = 0.02  # multiplicative Gaussian noise, relative std
    start: datetime = DEFAULT_START
    events: tuple[StepEvent, ...] = ()

    def __post_init__(self):
        unknown = set(self.archetypes) - set(ARCHETYPES)
        if unknown or not self.archetypes:
            raise InvalidArgumentError(f"unknown archetypes {sorted(unknown)}; choose from {ARCHETYPES}")
        if self.customers < 1 or self.weeks < 1:
            raise InvalidArgumentError("customers and weeks must be positive")
        if not self.noise >= 0:
            raise InvalidArgumentError(f"noise must be non-negative, got {self.noise!r}")
        for ev in self.events:
            if not 0 <= ev.customer < self.customers or ev.hour < 0 or ev.duration < 1 or ev.depth <= 0:
                raise InvalidArgumentError(f"bad step event {ev!r}")
            if ev.hour + ev.duration > self.weeks * 168:
                raise InvalidArgumentError(f"step event {ev!r} runs past the end of the profile")


def _archetype_shape(name: str, start: datetime, weeks: int) -> np.ndarray:
    """Noise-free normalized-ish hourly shape for one archetype.

    Each archetype carries a distinct seasonal drift at distinct hours, which
    is what the vertical band of the week matrix responds to.
    """
    n = weeks * 168
    t = np.arange(n)
    hour = t % 24
    day = t // 24
    weekday = (start.weekday() + day) % 7
    workday = weekday < 5
    doy = start.timetuple().tm_yday + day
    summer = np.clip(np.cos(2 * np.pi * (doy - 200) / 365.0), 0, None)  # cooling season weight
    winter = np.clip(-np.cos(2 * np.pi * (doy - 200) / 365.0), 0, None)

    def bump(center, width):
        return np.exp(-0.5 * ((hour - center) / width) ** 2)

    if name == "residential":
        base = 0.25 + 0.45 * bump(7.5, 1.2) + 0.8 * bump(19, 2.0)
        return base + 0.9 * summer * bump(17, 2.5) + 0.6 * winter * bump(7, 1.5)
    if name == "commercial":
        open_ = workday & (hour >= 9) & (hour < 17)
        return 0.15 + open_ * (0.5 + 0.6 * summer)
    if name == "streetlight":
        # dusk/dawn follow day length: long summer days, short winter ones
        daylen = 12 + 2.5 * np.cos(2 * np.pi * (doy - 172) / 365.0)
        dawn, dusk = 12.5 - daylen / 2, 12.5 + daylen / 2
        return ((hour + 0.5 < dawn) | (hour + 0.5 > dusk)).astype(float)
    if name == "industrial":
        return np.ones(n)
    if name == "school":
        in_term = (doy < 160) | (doy > 245)
        open_ = workday & in_term & (hour >= 7) & (hour < 15)
        return 0.2 + 0.8 * open_
    raise InvalidArgumentError(f"unknown archetype {name!r}")


def generate_synthetic(spec: SyntheticFleetSpec = SyntheticFleetSpec(), seed: int = 0) -> list[LoadProfile]:
    """Deterministic fleet with planted archetype classes.

    Customer ``i`` gets archetype ``spec.archetypes[i % len(archetypes)]``, a
    random scale in [0.5, 5) kWh, and multiplicative noise of relative std
    ``spec.noise``.
    """
    rng = np.random.default_rng(seed)
    shapes = {a: _archetype_shape(a, spec.start, spec.weeks) for a in spec.archetypes}
    width = len(str(spec.customers - 1))
    profiles = []
    for i in range(spec.customers):
        shape = shapes[spec.archetypes[i % len(spec.archetypes)]]
        scale = rng.uniform(0.5, 5.0)
        values = scale * shape
        if spec.noise > 0:
            values = values * np.clip(1 + spec.noise * rng.standard_normal(values.size), 0, None)
        for ev in spec.events:
            if ev.customer == i:
                sl = slice(ev.hour, ev.hour + ev.duration)
                values[sl] = np.maximum(values[sl] - ev.depth, 0.0)
        profiles.append(LoadProfile(f"c{i:0{width}d}", spec.start, values))
    return profiles


def archetype_of(index: int, spec: SyntheticFleetSpec) -> str:
    return spec.archetypes[index % len(spec.archetypes)]

"""Per-customer wavelet load models, fidelity metrics and event detection."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Sequence

import numpy as np

from . import wavelet1d
from .errors import DataError, InvalidArgumentError, StructureError, UndefinedMetricError

DEFAULT_LEVEL = 3


@dataclass(frozen=True, eq=False)
class LoadProfile:
    """One customer's evenly spaced kWh series."""

    customer_id: str
    start_time: datetime
    values: np.ndarray
    interval_hours: int = 1
    allow_negative: bool = False

    def __post_init__(self):
        arr = wavelet1d.as_signal(self.values)
        if not self.allow_negative:
            neg = np.flatnonzero(arr < 0)
            if neg.size:
                raise DataError(
                    f"customer {self.customer_id!r}: negative value {arr[neg[0]]!r} at index {int(neg[0])}"
                )
        if int(self.interval_hours) != self.interval_hours or self.interval_hours < 1:
            raise InvalidArgumentError(f"interval_hours must be a positive integer, got {self.interval_hours!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def with_values(self, values, **changes) -> "LoadProfile":
        return replace(self, values=values, **changes)

    def same_as(self, other: "LoadProfile") -> bool:
        """Exact equality of identity, timeline and every sample."""
        return (
            self.customer_id == other.customer_id
            and self.start_time == other.start_time
            and self.interval_hours == other.interval_hours
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class WaveletLoadModel:
    """Level-J approximation coefficients of one profile; details discarded."""

    customer_id: str
    level: int
    approximation: np.ndarray
    original_length: int
    start_time: datetime
    interval_hours: int = 1
    padding: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.padding:
            object.__setattr__(self, "padding", wavelet1d.padding_log(self.original_length, self.level))
        expected = wavelet1d.level_lengths(self.original_length, self.level)[-1]
        if np.ndim(self.approximation) != 1 or np.size(self.approximation) != expected:
            raise StructureError(
                f"customer {self.customer_id!r}: {np.size(self.approximation)} coefficients for "
                f"length {self.original_length} at level {self.level}, expected {expected}"
            )

    @property
    def stored_values(self) -> int:
        return int(self.approximation.size)

    def pyramid(self) -> wavelet1d.PyramidDecomposition:
        """Pyramid with zero detail bands, for the inverse cascade."""
        lengths = wavelet1d.level_lengths(self.original_length, self.level)
        return wavelet1d.PyramidDecomposition(
            original_length=self.original_length,
            details=tuple(np.zeros(n) for n in lengths[1:]),
            approximation=np.asarray(self.approximation, dtype=np.float64),
            padding=tuple(self.padding),
        )


def build_model(profile: LoadProfile, level: int = DEFAULT_LEVEL) -> WaveletLoadModel:
    if int(level) != level or level < 1:
        raise InvalidArgumentError(f"level must be a positive integer, got {level!r}")
    if len(profile) < 2**level:
        raise InvalidArgumentError(
            f"customer {profile.customer_id!r}: {len(profile)} samples is fewer than 2^{level}"
        )
    p = wavelet1d.decompose(profile.values, level)
    return WaveletLoadModel(
        customer_id=profile.customer_id,
        level=int(level),
        approximation=p.approximation,
        original_length=p.original_length,
        start_time=profile.start_time,
        interval_hours=profile.interval_hours,
        padding=p.padding,
    )


def synthesize(model: WaveletLoadModel) -> LoadProfile:
    values = wavelet1d.synthesize_approximation(model.pyramid())
    return LoadProfile(
        customer_id=model.customer_id,
        start_time=model.start_time,
        values=values,
        interval_hours=model.interval_hours,
        allow_negative=bool(np.any(values < 0)),
    )


@dataclass(frozen=True, eq=False)
class Histogram:
    counts: np.ndarray
    edges: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


# 5 %-wide bins to 100 %, plus one overflow bin.
DEFAULT_PE_BINS = tuple(float(x) for x in range(0, 105, 5)) + (np.inf,)
DEFAULT_E_BIN_COUNT = 20


@dataclass(frozen=True, eq=False)
class FidelityMetrics:
    customer_id: str
    se: float
    hourly_errors: np.ndarray
    hourly_pct_errors: np.ndarray  # NaN where the original reading is 0
    e_histogram: Histogram
    pe_histogram: Histogram

    @property
    def pe_defined(self) -> np.ndarray:
        return ~np.isnan(self.hourly_pct_errors)

    @property
    def pe_undefined_count(self) -> int:
        return int(np.count_nonzero(~self.pe_defined))

    @property
    def e_mean(self) -> float:
        return float(np.mean(self.hourly_errors))

    @property
    def e_std(self) -> float:
        return float(np.std(self.hourly_errors))


def total_energy_ratio(original: np.ndarray, synthesized: np.ndarray) -> float:
    """SE in percent: sum of squares of the synthesized over the original."""
    ms = float(np.max(np.abs(original), initial=0.0))
    ma = float(np.max(np.abs(synthesized), initial=0.0))
    if ms == 0.0:
        if ma == 0.0:
            return 100.0
        raise UndefinedMetricError("SE is undefined: original profile is all zeros but synthesized is not")
    if ma == 0.0:
        return 0.0
    # each side on its own scale so tiny readings cannot underflow; equal inputs give exactly 100
    num = float(np.dot(synthesized / ma, synthesized / ma))
    den = float(np.dot(original / ms, original / ms))
    with np.errstate(over="ignore"):
        return float(100.0 * (np.float64(ma / ms) ** 2 * (num / den)))


def _e_range(e: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(e)), float(np.max(e))
    if hi - lo <= 1e-12 * max(1.0, hi):
        return lo, lo + 1.0
    return lo, hi


def compute_metrics(
    original: LoadProfile,
    synthesized: LoadProfile,
    pe_bins: Sequence[float] = DEFAULT_PE_BINS,
    e_bins: int | Sequence[float] = DEFAULT_E_BIN_COUNT,
) -> FidelityMetrics:
    if len(original) != len(synthesized):
        raise InvalidArgumentError(f"length mismatch: {len(original)} vs {len(synthesized)}")
    if original.start_time != synthesized.start_time or original.interval_hours != synthesized.interval_hours:
        raise InvalidArgumentError(
            f"timelines differ for {original.customer_id!r}: "
            f"{original.start_time}/{original.interval_hours}h vs {synthesized.start_time}/{synthesized.interval_hours}h"
        )
    s, sa = original.values, synthesized.values
    se = total_energy_ratio(s, sa)
    e = np.abs(sa - s)
    pe = np.full(e.shape, np.nan)
    nz = s != 0
    with np.errstate(over="ignore"):  # subnormal readings give inf, which lands in the overflow bin
        pe[nz] = 100.0 * e[nz] / np.abs(s[nz])
    e_counts, e_edges = np.histogram(e, bins=e_bins, range=_e_range(e) if np.ndim(e_bins) == 0 else None)
    pe_edges = np.asarray(pe_bins, dtype=np.float64)
    pe_counts, _ = np.histogram(pe[nz], bins=pe_edges)
    return FidelityMetrics(
        customer_id=original.customer_id,
        se=se,
        hourly_errors=e,
        hourly_pct_errors=pe,
        e_histogram=Histogram(e_counts, e_edges),
        pe_histogram=Histogram(pe_counts, pe_edges),
    )


@dataclass(frozen=True)
class LoadEvent:
    level: int
    coefficient_index: int
    start: int  # first sample covered, inclusive
    stop: int  # exclusive
    value: float  # signed detail coefficient
    customer_id: str = field(default="", compare=False)

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    @property
    def direction(self) -> int:
        return 1 if self.value > 0 else -1


def _thresholds(threshold, levels: int) -> list[float]:
    if np.ndim(threshold) == 0:
        out = [float(threshold)] * levels
    else:
        out = [float(t) for t in threshold]
        if len(out) != levels:
            raise InvalidArgumentError(f"need {levels} per-level thresholds, got {len(out)}")
    for j, t in enumerate(out, start=1):
        if not t > 0 or not np.isfinite(t):
            raise InvalidArgumentError(f"threshold for level {j} must be positive and finite, got {t!r}")
    return out


def detect_events(profile: LoadProfile, max_level: int, threshold) -> list[LoadEvent]:
    """Flag every detail coefficient whose magnitude reaches its level's threshold.

    A detail coefficient D_j[k] responds to a change within the samples
    [2^j k, 2^j (k + 1)); it is positive when the first half of that span
    sits above the second half.
    """
    if len(profile) < 2**max_level:
        raise InvalidArgumentError(f"{len(profile)} samples is fewer than 2^{max_level}")
    limits = _thresholds(threshold, max_level)
    p = wavelet1d.decompose(profile.values, max_level)
    events = []
    for j, d in enumerate(p.details, start=1):
        for k in np.flatnonzero(np.abs(d) >= limits[j - 1]):
            k = int(k)
            events.append(
                LoadEvent(
                    level=j,
                    coefficient_index=k,
                    start=k * 2**j,
                    stop=(k + 1) * 2**j,
                    value=float(d[k]),
                    customer_id=profile.customer_id,
                )
            )
    events.sort(key=lambda ev: (ev.start, ev.level))
    return events

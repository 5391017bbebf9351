"""Fleet-level comparison of load-model profiles against the raw data.

Feeder power flow is replaced by per-hour summation of customer loads, so
the comparisons here (hourly % error, peak, total energy) measure the load
models themselves rather than a circuit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .load_model import DEFAULT_PE_BINS, FidelityMetrics, LoadProfile
from .store import CompressionStats

ALL = "all"
DEFAULT_SE_BANDS = ((-np.inf, 80.0), (80.0, 90.0), (90.0, np.inf))
NARROW_TOP_SE_BANDS = ((-np.inf, 80.0), (80.0, 90.0), (90.0, 99.998))
DEFAULT_PE_BANDS = ((0.0, 10.0), (10.0, 20.0), (20.0, 30.0), (30.0, np.inf))
REPORT_FILES = ("report.json", "hist_pe.csv", "peaks.csv", "energy.csv", "compression.csv")


@dataclass(frozen=True, eq=False)
class AggregateSeries:
    groups: dict[str, np.ndarray]  # label -> hourly sum, labels sorted
    start_time: datetime | None = None

    @property
    def total(self) -> np.ndarray:
        return np.sum(np.stack(list(self.groups.values())), axis=0)

    @property
    def length(self) -> int:
        return int(next(iter(self.groups.values())).size)


def aggregate(profiles: Sequence[LoadProfile], grouping: Mapping[str, str] | None = None) -> AggregateSeries:
    """Hourly sums, per label of ``grouping`` (customer id -> label) or one ``all`` group."""
    if not profiles:
        raise InvalidArgumentError("cannot aggregate an empty fleet")
    lengths = {len(p) for p in profiles}
    if len(lengths) != 1:
        raise InvalidArgumentError(f"profiles have differing lengths: {sorted(lengths)}")
    sums: dict[str, np.ndarray] = {}
    for p in sorted(profiles, key=lambda q: q.customer_id):
        if grouping is None:
            label = ALL
        else:
            try:
                label = str(grouping[p.customer_id])
            except KeyError:
                raise InvalidArgumentError(f"customer {p.customer_id!r} has no group label") from None
        if label in sums:
            sums[label] = sums[label] + p.values
        else:
            sums[label] = p.values.astype(np.float64, copy=True)
    return AggregateSeries({k: sums[k] for k in sorted(sums)}, profiles[0].start_time)


@dataclass(frozen=True, eq=False)
class GroupComparison:
    label: str
    pct_errors: np.ndarray  # signed, NaN where the reference hour is 0
    histogram_counts: np.ndarray  # over |% error|
    bins: np.ndarray
    reference_peak: float
    reference_peak_hour: int
    candidate_peak: float
    candidate_peak_hour: int
    reference_energy: float
    candidate_energy: float

    @property
    def undefined_hours(self) -> int:
        return int(np.count_nonzero(np.isnan(self.pct_errors)))

    @property
    def peak_pct_error(self) -> float:
        return _pct(self.candidate_peak, self.reference_peak)

    @property
    def energy_pct_error(self) -> float:
        return _pct(self.candidate_energy, self.reference_energy)


def _pct(candidate: float, reference: float) -> float:
    if reference == 0:
        return 0.0 if candidate == 0 else float("nan")
    return (candidate - reference) / reference * 100.0


def check_bins(bins) -> np.ndarray:
    edges = np.asarray(bins, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or np.isnan(edges).any():
        raise InvalidArgumentError(f"bin edges must be strictly increasing, got {list(bins)!r}")
    return edges


def compare_aggregates(
    reference: AggregateSeries, candidate: AggregateSeries, bins: Sequence[float] = DEFAULT_PE_BINS
) -> list[GroupComparison]:
    if list(reference.groups) != list(candidate.groups):
        raise InvalidArgumentError(f"group labels differ: {list(reference.groups)} vs {list(candidate.groups)}")
    if reference.length != candidate.length:
        raise InvalidArgumentError(f"series lengths differ: {reference.length} vs {candidate.length}")
    edges = check_bins(bins)
    out = []
    for label, ref in reference.groups.items():
        cand = candidate.groups[label]
        pct = np.full(ref.shape, np.nan)
        nz = ref != 0
        pct[nz] = (cand[nz] - ref[nz]) / ref[nz] * 100.0
        counts, _ = np.histogram(np.abs(pct[nz]), bins=edges)
        rh, ch = int(np.argmax(ref)), int(np.argmax(cand))  # argmax returns the earliest hour on ties
        out.append(
            GroupComparison(
                label=label,
                pct_errors=pct,
                histogram_counts=counts,
                bins=edges,
                reference_peak=float(ref[rh]),
                reference_peak_hour=rh,
                candidate_peak=float(cand[ch]),
                candidate_peak_hour=ch,
                reference_energy=float(ref.sum()),
                candidate_energy=float(cand.sum()),
            )
        )
    return out


def check_bands(bands) -> list[tuple[float, float]]:
    out = [(float(lo), float(hi)) for lo, hi in bands]
    if not out:
        raise InvalidArgumentError("at least one band is required")
    for i, (lo, hi) in enumerate(out):
        if not lo < hi:
            raise InvalidArgumentError(f"band {i} has lower bound {lo} >= upper bound {hi}")
        if i and lo < out[i - 1][1]:
            raise InvalidArgumentError(f"band {i} overlaps or precedes band {i - 1}")
    return out


def band_index(values: np.ndarray, bands: list[tuple[float, float]]) -> np.ndarray:
    """Band per value, -1 if none. Bands are [lo, hi); the last also takes hi."""
    idx = np.full(values.shape, -1, dtype=np.int64)
    for i, (lo, hi) in enumerate(bands):
        upper = values <= hi if i == len(bands) - 1 else values < hi
        idx[(values >= lo) & upper & (idx < 0)] = i
    return idx


@dataclass(frozen=True, eq=False)
class FidelityRollup:
    se_bands: list[tuple[float, float]]
    se_counts: list[int]
    se_unbanded: int
    pe_bands: list[tuple[float, float]]
    pe_counts: list[int]
    pe_unbanded: int
    pe_undefined: int
    profiles: int

    @property
    def se_percentages(self) -> list[float]:
        return [100.0 * c / self.profiles if self.profiles else 0.0 for c in self.se_counts]

    @property
    def pe_fractions(self) -> list[float]:
        total = sum(self.pe_counts) + self.pe_unbanded
        return [c / total if total else 0.0 for c in self.pe_counts]


def rollup_fidelity(metrics: Sequence[FidelityMetrics], se_bands=DEFAULT_SE_BANDS, pe_bands=DEFAULT_PE_BANDS) -> FidelityRollup:
    se_b, pe_b = check_bands(se_bands), check_bands(pe_bands)
    se = np.array([m.se for m in metrics], dtype=np.float64)
    se_idx = band_index(se, se_b)
    pe = np.concatenate([m.hourly_pct_errors[m.pe_defined] for m in metrics]) if metrics else np.zeros(0)
    pe_idx = band_index(pe, pe_b)
    return FidelityRollup(
        se_bands=se_b,
        se_counts=[int(np.count_nonzero(se_idx == i)) for i in range(len(se_b))],
        se_unbanded=int(np.count_nonzero(se_idx < 0)),
        pe_bands=pe_b,
        pe_counts=[int(np.count_nonzero(pe_idx == i)) for i in range(len(pe_b))],
        pe_unbanded=int(np.count_nonzero(pe_idx < 0)),
        pe_undefined=sum(m.pe_undefined_count for m in metrics),
        profiles=len(metrics),
    )


@dataclass(eq=False)
class EvaluationReport:
    candidates: dict[str, list[GroupComparison]]
    fidelity: dict[str, FidelityRollup] = field(default_factory=dict)
    compression: dict[str, CompressionStats] = field(default_factory=dict)
    generated_at: str | None = None

    def to_dict(self) -> dict:
        def num(x):
            x = float(x)
            return None if not np.isfinite(x) else x

        out = {"generated_at": self.generated_at, "candidates": {}, "compression": {}, "fidelity": {}}
        for name, groups in self.candidates.items():
            out["candidates"][name] = [
                {
                    "group": g.label,
                    "hourly_pct_error_histogram": {
                        "edges": [_b(float(e)) for e in g.bins],
                        "counts": g.histogram_counts.tolist(),
                        "undefined_hours": g.undefined_hours,
                    },
                    "peak": {
                        "reference_kw": g.reference_peak,
                        "reference_hour": g.reference_peak_hour,
                        "candidate_kw": g.candidate_peak,
                        "candidate_hour": g.candidate_peak_hour,
                        "pct_error": num(g.peak_pct_error),
                    },
                    "energy": {
                        "reference_kwh": g.reference_energy,
                        "candidate_kwh": g.candidate_energy,
                        "pct_error": num(g.energy_pct_error),
                    },
                }
                for g in groups
            ]
        for name, c in self.compression.items():
            out["compression"][name] = {
                "model_values": c.model_value_count,
                "original_values": c.original_value_count,
                "pct_compression": c.percent_compression,
            }
        for name, r in self.fidelity.items():
            out["fidelity"][name] = {
                "profiles": r.profiles,
                "se_bands": [{"lo": _b(lo), "hi": _b(hi), "count": c, "pct": p} for (lo, hi), c, p in zip(r.se_bands, r.se_counts, r.se_percentages)],
                "se_unbanded": r.se_unbanded,
                "pe_bands": [{"lo": _b(lo), "hi": _b(hi), "count": c, "fraction": f} for (lo, hi), c, f in zip(r.pe_bands, r.pe_counts, r.pe_fractions)],
                "pe_unbanded": r.pe_unbanded,
                "pe_undefined": r.pe_undefined,
            }
        return out


def _b(x: float):
    return x if np.isfinite(x) else ("inf" if x > 0 else "-inf")


def evaluate(
    reference: Sequence[LoadProfile],
    candidates: Mapping[str, Sequence[LoadProfile]],
    grouping: Mapping[str, str] | None = None,
    bins: Sequence[float] = DEFAULT_PE_BINS,
    fidelity: Mapping[str, FidelityRollup] | None = None,
    compression: Mapping[str, CompressionStats] | None = None,
    deterministic: bool = False,
) -> EvaluationReport:
    ref = aggregate(reference, grouping)
    ref_ids = sorted(p.customer_id for p in reference)
    comparisons = {}
    for name in sorted(candidates):
        fleet = candidates[name]
        if sorted(p.customer_id for p in fleet) != ref_ids:
            raise InvalidArgumentError(f"candidate {name!r} does not cover the same customers as the reference")
        comparisons[name] = compare_aggregates(ref, aggregate(fleet, grouping), bins)
    return EvaluationReport(
        candidates=comparisons,
        fidelity=dict(fidelity or {}),
        compression=dict(compression or {}),
        generated_at=None if deterministic else datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def write_report(report: EvaluationReport, outdir: str | Path) -> list[Path]:
    """Write report.json and the per-table CSV files; returns their paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [outdir / name for name in REPORT_FILES]
    paths[0].write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidate", "group", "bin_lo", "bin_hi", "count"])
        for name, groups in report.candidates.items():
            for g in groups:
                for lo, hi, c in zip(g.bins[:-1], g.bins[1:], g.histogram_counts):
                    w.writerow([name, g.label, repr(float(lo)), repr(float(hi)), int(c)])
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidate", "group", "reference_kw", "reference_hour", "candidate_kw", "candidate_hour", "pct_error"])
        for name, groups in report.candidates.items():
            for g in groups:
                w.writerow([name, g.label, repr(g.reference_peak), g.reference_peak_hour, repr(g.candidate_peak), g.candidate_peak_hour, repr(g.peak_pct_error)])
    with open(paths[3], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidate", "group", "reference_kwh", "candidate_kwh", "pct_error"])
        for name, groups in report.candidates.items():
            for g in groups:
                w.writerow([name, g.label, repr(g.reference_energy), repr(g.candidate_energy), repr(g.energy_pct_error)])
    with open(paths[4], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "model_values", "original_values", "pct_compression"])
        for name, c in report.compression.items():
            w.writerow([name, c.model_value_count, c.original_value_count, f"{c.percent_compression:.2f}"])
    return paths

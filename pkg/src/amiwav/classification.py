"""Load-pattern classification and the classified wavelet load model.

Features are the vertical 2D Haar band of each customer's peak-normalized
week matrix (weeks x 168 hours). Customers are grouped with Lloyd's k-means;
each class keeps one typical load profile (TLP, the mean normalized profile)
and each customer keeps two numbers: its peak and a scale factor chosen so
the rebuilt profile has the customer's exact total energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import wavelet2d
from .errors import (
    DegenerateProfileError,
    InvalidArgumentError,
    NotFoundError,
    StructureError,
)
from .load_model import LoadProfile

HOURS_PER_WEEK = 168
DEFAULT_FEATURE_LEVEL = 4
DEFAULT_K = 5


def normalize_by_peak(profile: LoadProfile) -> tuple[LoadProfile, float]:
    peak = float(np.max(profile.values))
    if not peak > 0:
        raise DegenerateProfileError(f"customer {profile.customer_id!r}: peak is {peak!r}, cannot normalize")
    return profile.with_values(profile.values / peak), peak


def to_week_matrix(profile: LoadProfile, offset: int | None = None) -> np.ndarray:
    """Reshape into one row per week, Monday 00:00 through Sunday 23:00.

    With ``offset=None`` the profile must start on a Monday at hour 0.
    Otherwise ``offset`` leading samples are skipped first.
    """
    if profile.interval_hours != 1:
        raise InvalidArgumentError("week matrices need hourly data")
    values = profile.values
    if offset is None:
        st = profile.start_time
        if st.weekday() != 0 or st.hour != 0 or st.minute != 0:
            raise InvalidArgumentError(
                f"customer {profile.customer_id!r} starts {st.isoformat()}; expected Monday 00:00 "
                "(pass an explicit offset or re-ingest with Monday alignment)"
            )
    else:
        if offset < 0 or offset >= values.size:
            raise InvalidArgumentError(f"offset {offset} outside profile of length {values.size}")
        values = values[offset:]
    if values.size == 0 or values.size % HOURS_PER_WEEK:
        raise InvalidArgumentError(
            f"customer {profile.customer_id!r}: {values.size} hours is not a whole number of weeks "
            "(ingest with trim_to_weeks to truncate)"
        )
    return values.reshape(-1, HOURS_PER_WEEK).copy()


@dataclass(frozen=True, eq=False)
class FeatureVector:
    customer_id: str
    values: np.ndarray
    source_level: int


def feature_vector(profile: LoadProfile, level: int = DEFAULT_FEATURE_LEVEL) -> FeatureVector:
    normalized, _ = normalize_by_peak(profile)
    d = wavelet2d.decompose2d(to_week_matrix(normalized), level)
    return FeatureVector(profile.customer_id, wavelet2d.vertical_coefficients(d, level).ravel(), int(level))


def extract_features(profiles: Sequence[LoadProfile], level: int = DEFAULT_FEATURE_LEVEL, map_fn=map) -> list[FeatureVector]:
    if level not in (3, 4):
        raise InvalidArgumentError(f"feature level must be 3 or 4, got {level!r}")
    _uniform_length(profiles)
    return list(map_fn(lambda p: feature_vector(p, level), profiles))


def _uniform_length(profiles: Sequence[LoadProfile]) -> int:
    lengths = {len(p) for p in profiles}
    if len(lengths) > 1:
        raise InvalidArgumentError(f"profiles have differing lengths: {sorted(lengths)}")
    return lengths.pop() if lengths else 0


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    k: int
    customer_ids: tuple[str, ...]
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    seed: int
    inertia_history: tuple[float, ...] = ()

    @property
    def assignments(self) -> dict[str, int]:
        return {cid: int(lab) for cid, lab in zip(self.customer_ids, self.labels)}

    def class_sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.k).tolist()


def _sq_dist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _assign(x: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = _sq_dist(x, c)
    labels = np.argmin(d2, axis=1)  # first minimum -> lowest class index on ties
    return labels, d2[np.arange(x.shape[0]), labels]


def _plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: draw several D^2-weighted candidates per step, keep the best."""
    n = x.shape[0]
    trials = 2 + int(np.log(k))
    chosen = [int(rng.integers(n))]
    closest = _sq_dist(x, x[chosen])[:, 0]
    while len(chosen) < k:
        total = closest.sum()
        if total > 0:
            cand = rng.choice(n, size=trials, p=closest / total)
        else:
            cand = rng.choice(np.setdiff1d(np.arange(n), chosen), size=1)
        pots = np.minimum(closest[None, :], _sq_dist(x, x[cand]).T)
        best = int(np.argmin(pots.sum(axis=1)))
        chosen.append(int(cand[best]))
        closest = pots[best]
    return x[chosen].copy()


def _update(x: np.ndarray, labels: np.ndarray, dist: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    new = np.empty_like(centroids)
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j]:
            new[j] = x[labels == j].mean(axis=0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        # Re-seed each empty class on the point farthest from its centroid.
        order = np.lexsort((np.arange(x.shape[0]), -dist))
        for j, idx in zip(empty, order):
            new[j] = x[idx]
    return new


def _lloyd(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float):
    centroids = _plus_plus(x, k, rng)
    labels, dist = _assign(x, centroids)
    history = [float(dist.sum())]
    iterations = 0
    changed = True
    while iterations < max_iter:
        iterations += 1
        new = _update(x, labels, dist, centroids)
        shift = float(np.sqrt(np.max(np.sum((new - centroids) ** 2, axis=1))))
        centroids = new
        new_labels, dist = _assign(x, centroids)
        changed = bool(np.any(new_labels != labels))
        labels = new_labels
        history.append(float(dist.sum()))
        if not changed or shift < tol:
            break
    if changed:
        centroids = _update(x, labels, dist, centroids)
        labels, dist = _assign(x, centroids)
    return labels, centroids, float(dist.sum()), iterations, history


def kmeans(
    features: Sequence[FeatureVector],
    k: int = DEFAULT_K,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 0.0,
    restarts: int = 1,
) -> ClusteringResult:
    """Lloyd's k-means with k-means++ seeding, best of ``restarts`` by inertia.

    Ties in assignment go to the lowest class index. Run ``r`` draws from
    ``numpy.random.default_rng([seed, r])`` so results depend only on inputs.
    """
    n = len(features)
    if int(k) != k or k <= 0:
        raise InvalidArgumentError(f"k must be a positive integer, got {k!r}")
    if k > n:
        raise InvalidArgumentError(f"k={k} exceeds the number of customers ({n})")
    if restarts < 1 or max_iter < 1:
        raise InvalidArgumentError("restarts and max_iter must be at least 1")
    widths = {f.values.size for f in features}
    if len(widths) != 1:
        raise InvalidArgumentError(f"feature vectors have differing lengths: {sorted(widths)}")
    x = np.stack([np.asarray(f.values, dtype=np.float64) for f in features])
    distinct = np.unique(x, axis=0).shape[0]
    if distinct < k:
        raise InvalidArgumentError(
            f"only {distinct} distinct feature vectors for k={k}; "
            "too few weeks for this feature level, or too many identical customers"
        )
    best = None
    for r in range(restarts):
        run = _lloyd(x, int(k), np.random.default_rng([seed, r]), max_iter, tol)
        if best is None or run[2] < best[2]:
            best = run
    labels, centroids, inertia, iterations, history = best
    return ClusteringResult(
        k=int(k),
        customer_ids=tuple(f.customer_id for f in features),
        labels=labels.astype(np.int64),
        centroids=centroids,
        inertia=inertia,
        iterations=iterations,
        seed=int(seed),
        inertia_history=tuple(history),
    )


@dataclass(frozen=True, eq=False)
class ClassifiedLoadModel:
    """k typical load profiles plus (class, peak, scale) per customer."""

    tlps: np.ndarray  # shape (k, profile length)
    customer_ids: tuple[str, ...]
    labels: np.ndarray
    peaks: np.ndarray
    scales: np.ndarray
    start_time: object
    interval_hours: int = 1

    def __post_init__(self):
        n = len(self.customer_ids)
        if self.tlps.ndim != 2:
            raise StructureError("TLP array must be 2D (k x length)")
        for name in ("labels", "peaks", "scales"):
            if np.shape(getattr(self, name)) != (n,):
                raise StructureError(f"{name} must hold one entry per customer ({n})")
        if n and (np.min(self.labels) < 0 or np.max(self.labels) >= self.k):
            raise StructureError(f"class index outside [0, {self.k})")
        if len(set(self.customer_ids)) != n:
            raise StructureError("duplicate customer ids")

    @property
    def k(self) -> int:
        return int(self.tlps.shape[0])

    @property
    def profile_length(self) -> int:
        return int(self.tlps.shape[1])

    @property
    def stored_values(self) -> int:
        return self.k * self.profile_length + 2 * len(self.customer_ids)

    def entry(self, customer_id: str) -> tuple[int, float, float]:
        try:
            i = self.customer_ids.index(customer_id)
        except ValueError:
            raise NotFoundError(f"customer {customer_id!r} is not in the classified model") from None
        return int(self.labels[i]), float(self.peaks[i]), float(self.scales[i])


def build_classified_model(profiles: Sequence[LoadProfile], clustering: ClusteringResult) -> ClassifiedLoadModel:
    length = _uniform_length(profiles)
    assignments = clustering.assignments
    missing = [p.customer_id for p in profiles if p.customer_id not in assignments]
    if missing:
        raise StructureError(f"customers without a class assignment: {missing[:5]}")
    labels = np.array([assignments[p.customer_id] for p in profiles], dtype=np.int64)
    normalized, peaks = [], []
    for p in profiles:
        norm, peak = normalize_by_peak(p)
        normalized.append(norm.values)
        peaks.append(peak)
    normalized = np.stack(normalized) if profiles else np.zeros((0, length))
    peaks = np.array(peaks, dtype=np.float64)
    tlps = np.zeros((clustering.k, length))
    for j in range(clustering.k):
        members = labels == j
        if not members.any():
            raise StructureError(f"class {j} has no members")
        tlps[j] = normalized[members].mean(axis=0)
    scales = np.empty(len(profiles))
    for i, p in enumerate(profiles):
        energy = float(np.sum(p.values))
        if energy == 0:
            raise DegenerateProfileError(f"customer {p.customer_id!r} has zero total energy")
        scales[i] = float(np.sum(tlps[labels[i]] * peaks[i])) / energy
    first = profiles[0] if profiles else None
    return ClassifiedLoadModel(
        tlps=tlps,
        customer_ids=tuple(p.customer_id for p in profiles),
        labels=labels,
        peaks=peaks,
        scales=scales,
        start_time=first.start_time if first else None,
        interval_hours=first.interval_hours if first else 1,
    )


def reconstruct_profile(model: ClassifiedLoadModel, customer_id: str) -> LoadProfile:
    label, peak, scale = model.entry(customer_id)
    return LoadProfile(
        customer_id=customer_id,
        start_time=model.start_time,
        values=model.tlps[label] * peak / scale,
        interval_hours=model.interval_hours,
    )


def reconstruct_all(model: ClassifiedLoadModel) -> list[LoadProfile]:
    return [reconstruct_profile(model, cid) for cid in model.customer_ids]

"""Multi-level Haar (DB1) pyramid transform for 1D series.

Coefficient ``k`` at every level covers the two working samples ``2k`` and
``2k + 1``. When a level's working length is odd the final sample is
replicated once before filtering; the replication is logged so synthesis can
drop it again.

Analysis carries unnormalized pairwise sums and differences down the pyramid
and applies the 2^(-j/2) factor once per band, with a double-double product
for the odd powers of sqrt2. Piecewise-constant signals therefore keep their
values through decompose + approximation synthesis wherever float64 can
represent the scaled coefficient (always for even J).
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import Sequence

import numpy as np

from .errors import DataError, InvalidArgumentError, StructureError

SQRT2 = np.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2

with localcontext() as _ctx:
    _ctx.prec = 60
    _R_LO = float(Decimal(1) / Decimal(2).sqrt() - Decimal(INV_SQRT2))  # INV_SQRT2 + _R_LO ~ 1/sqrt2 to ~106 bits
_SPLIT = 134217729.0  # 2**27 + 1, Veltkamp splitting constant
_TINY = 2.0**-1022  # smallest normal


def _split(x):
    t = _SPLIT * x
    hi = t - (t - x)
    return hi, x - hi


_R_HI_H, _R_HI_L = _split(INV_SQRT2)


def _mul_inv_sqrt2(y):
    # correctly rounded y / sqrt2 while every partial product stays normal
    p = y * INV_SQRT2
    yh, yl = _split(y)
    err = ((yh * _R_HI_H - p) + yh * _R_HI_L + yl * _R_HI_H) + yl * _R_HI_L
    return p + (err + y * _R_LO)


def _decimal_scale(v: float, level: int) -> float:
    with localcontext() as ctx:
        ctx.prec = 80
        return float(Decimal(v) * Decimal(2) ** (Decimal(-level) / 2))


def scale_level(x: np.ndarray, level: int) -> np.ndarray:
    """``x * 2**(-level/2)``, rounded as if computed exactly.

    >>> float(scale_level(np.array([4.0]), 2)[0]), float(scale_level(np.array([2.0]), 1)[0]) == float(np.sqrt(2.0))
    (2.0, True)
    """
    x = np.asarray(x, dtype=np.float64)
    half = int(level) // 2
    if level % 2 == 0:
        return np.ldexp(x, -half)
    ax = np.abs(x)
    shift = np.where(ax >= 2.0**990, -40, np.where(ax < 2.0**-900, 200, 0))
    out = np.ldexp(_mul_inv_sqrt2(np.ldexp(x, shift)), -half - shift)
    # results below the normal range would be rounded twice
    tiny = (x != 0) & (np.abs(out) < _TINY)
    if tiny.any():
        out = np.array(out, copy=True)
        out[tiny] = [_decimal_scale(float(v), level) for v in x[tiny]]
    return out


@dataclass(frozen=True)
class HaarFilters:
    """DB1 quadrature mirror filter bank."""

    analysis_low: tuple[float, float] = (INV_SQRT2, INV_SQRT2)
    analysis_high: tuple[float, float] = (INV_SQRT2, -INV_SQRT2)

    @property
    def synthesis_low(self) -> tuple[float, float]:
        return self.analysis_low[::-1]

    @property
    def synthesis_high(self) -> tuple[float, float]:
        return self.analysis_high[::-1]


HAAR = HaarFilters()


@dataclass(frozen=True, eq=False)
class PyramidDecomposition:
    """Detail bands D_1..D_J plus the deepest approximation A_J.

    ``details[j - 1]`` is D_j. ``padding[j - 1]`` is 1 when the working
    series entering level j had odd length and its last sample was repeated.
    """

    original_length: int
    details: tuple[np.ndarray, ...]
    approximation: np.ndarray
    padding: tuple[int, ...]

    @property
    def levels(self) -> int:
        return len(self.details)

    def detail(self, level: int) -> np.ndarray:
        _check_level(level, self.levels)
        return self.details[level - 1]

    def coefficient_count(self) -> int:
        return int(self.approximation.size + sum(d.size for d in self.details))

    def energy(self) -> float:
        return float(np.sum(self.approximation**2) + sum(np.sum(d**2) for d in self.details))


def level_lengths(length: int, levels: int) -> list[int]:
    """Working lengths entering each level, followed by |A_J|."""
    out = [int(length)]
    for _ in range(levels):
        out.append((out[-1] + 1) // 2)
    return out


def padding_log(length: int, levels: int) -> tuple[int, ...]:
    return tuple(n % 2 for n in level_lengths(length, levels)[:-1])


def as_signal(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate and copy ``values`` into a 1D float64 array."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"signal must be one-dimensional, got shape {arr.shape}")
    if arr.size < 1:
        raise InvalidArgumentError("signal must hold at least one sample")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise DataError(f"non-finite value at index {int(bad[0])}")
    return arr


def analysis_step(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """One Haar analysis level: returns (approximation, detail, padded)."""
    pad = x.size % 2
    if pad:
        x = np.append(x, x[-1])
    even, odd = x[0::2], x[1::2]
    return (even + odd) * INV_SQRT2, (even - odd) * INV_SQRT2, pad


def synthesis_step(approx: np.ndarray, detail: np.ndarray, pad: int) -> np.ndarray:
    """Invert :func:`analysis_step`, dropping the replicated tail if ``pad``."""
    out = np.empty(2 * approx.size, dtype=np.float64)
    out[0::2] = (approx + detail) * INV_SQRT2
    out[1::2] = (approx - detail) * INV_SQRT2
    return out[:-1] if pad else out


def decompose(signal: Sequence[float] | np.ndarray, levels: int) -> PyramidDecomposition:
    """Mallat pyramid decomposition to ``levels`` levels.

    >>> p = decompose([2.0, 4.0, 6.0, 8.0], 1)
    >>> np.round(p.approximation, 6).tolist(), np.round(p.details[0], 6).tolist()
    ([4.242641, 9.899495], [-1.414214, -1.414214])
    """
    if int(levels) != levels or levels < 1:
        raise InvalidArgumentError(f"levels must be a positive integer, got {levels!r}")
    x = as_signal(signal)
    if x.size < 2:
        raise InvalidArgumentError(f"signal must hold at least 2 samples, got {x.size}")
    n = x.size
    details, pads = [], []
    sums = x
    for j in range(1, int(levels) + 1):
        pad = sums.size % 2
        if pad:
            sums = np.append(sums, sums[-1])
        even, odd = sums[0::2], sums[1::2]
        details.append(scale_level(even - odd, j))
        pads.append(pad)
        sums = even + odd
    return PyramidDecomposition(
        original_length=n,
        details=tuple(details),
        approximation=scale_level(sums, int(levels)),
        padding=tuple(pads),
    )


def validate(pyramid: PyramidDecomposition) -> None:
    """Raise :class:`StructureError` unless every band length is consistent."""
    levels = pyramid.levels
    if levels < 1:
        raise StructureError("pyramid has no levels")
    if pyramid.original_length < 1:
        raise StructureError("original length must be positive")
    expected = level_lengths(pyramid.original_length, levels)
    if tuple(pyramid.padding) != padding_log(pyramid.original_length, levels):
        raise StructureError(f"padding log {pyramid.padding} does not match length {pyramid.original_length}")
    for j, d in enumerate(pyramid.details, start=1):
        if d.ndim != 1 or d.size != expected[j]:
            raise StructureError(f"D_{j} has {d.size} coefficients, expected {expected[j]}")
    if pyramid.approximation.ndim != 1 or pyramid.approximation.size != expected[-1]:
        raise StructureError(
            f"A_{levels} has {pyramid.approximation.size} coefficients, expected {expected[-1]}"
        )


def _cascade(pyramid: PyramidDecomposition, approx: np.ndarray, keep: set[int] | None) -> np.ndarray:
    x = np.asarray(approx, dtype=np.float64)
    for j in range(pyramid.levels, 0, -1):
        d = pyramid.details[j - 1]
        if keep is not None and j not in keep:
            d = np.zeros_like(d)
        x = synthesis_step(x, d, pyramid.padding[j - 1])
    return x


def reconstruct(pyramid: PyramidDecomposition) -> np.ndarray:
    """Full inverse transform back to the original length."""
    validate(pyramid)
    return _cascade(pyramid, pyramid.approximation, keep=None)


def synthesize_approximation(pyramid: PyramidDecomposition) -> np.ndarray:
    """Inverse transform with every detail band set to zero (S_{A_J}).

    With the details gone the cascade reduces to spreading
    ``A_J[k] * 2**(-J/2)`` over the 2^J samples coefficient ``k`` covers.
    """
    validate(pyramid)
    j = pyramid.levels
    return np.repeat(scale_level(pyramid.approximation, j), 2**j)[: pyramid.original_length]


def synthesize_detail(pyramid: PyramidDecomposition, level: int) -> np.ndarray:
    """Inverse transform of D_level alone (S_{D_level})."""
    validate(pyramid)
    _check_level(level, pyramid.levels)
    return _cascade(pyramid, np.zeros_like(pyramid.approximation), keep={int(level)})


def _check_level(level: int, deepest: int) -> None:
    if int(level) != level or not 1 <= level <= deepest:
        raise InvalidArgumentError(f"level must be in [1, {deepest}], got {level!r}")

"""Separable multi-level Haar transform for matrices.

Each level filters along axis 1 (within a row, the hour axis of a week
matrix) and then along axis 0 (across rows, the week axis). Band naming:

    horizontal  high along axis 1, low along axis 0
    vertical    low along axis 1, high along axis 0
    diagonal    high along both

so the vertical band carries row-to-row (week-to-week) change at each
column position. Odd axis lengths replicate the final column/row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidArgumentError, StructureError
from .wavelet1d import INV_SQRT2


@dataclass(frozen=True, eq=False)
class Level2D:
    approximation: np.ndarray
    horizontal: np.ndarray
    vertical: np.ndarray
    diagonal: np.ndarray
    row_pad: int
    col_pad: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.approximation.shape


@dataclass(frozen=True, eq=False)
class Decomposition2D:
    shape: tuple[int, int]
    levels: tuple[Level2D, ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, j: int) -> Level2D:
        _check_level(j, self.depth)
        return self.levels[j - 1]


def as_matrix(m) -> np.ndarray:
    arr = np.array(m, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"expected a 2D matrix, got shape {arr.shape}")
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        r, c = (int(v) for v in bad[0])
        raise DataError(f"non-finite value at (row {r}, col {c})")
    return arr


def _analyze(x: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray, int]:
    x = np.moveaxis(x, axis, 0)
    pad = x.shape[0] % 2
    if pad:
        x = np.concatenate([x, x[-1:]], axis=0)
    even, odd = x[0::2], x[1::2]
    low = (even + odd) * INV_SQRT2
    high = (even - odd) * INV_SQRT2
    return np.moveaxis(low, 0, axis), np.moveaxis(high, 0, axis), pad


def _synthesize(low: np.ndarray, high: np.ndarray, axis: int, pad: int) -> np.ndarray:
    low = np.moveaxis(low, axis, 0)
    high = np.moveaxis(high, axis, 0)
    out = np.empty((2 * low.shape[0],) + low.shape[1:], dtype=np.float64)
    out[0::2] = (low + high) * INV_SQRT2
    out[1::2] = (low - high) * INV_SQRT2
    if pad:
        out = out[:-1]
    return np.moveaxis(out, 0, axis)


def decompose2d(m, levels: int) -> Decomposition2D:
    """Decompose ``m`` into ``levels`` levels of four Haar bands each."""
    if int(levels) != levels or levels < 1:
        raise InvalidArgumentError(f"levels must be a positive integer, got {levels!r}")
    x = as_matrix(m)
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise InvalidArgumentError(f"matrix must be at least 2x2, got {x.shape}")
    shape = x.shape
    out = []
    for _ in range(int(levels)):
        lo_c, hi_c, col_pad = _analyze(x, axis=1)
        ll, vertical, row_pad = _analyze(lo_c, axis=0)
        horizontal, diagonal, _ = _analyze(hi_c, axis=0)
        out.append(Level2D(ll, horizontal, vertical, diagonal, row_pad, col_pad))
        x = ll
    return Decomposition2D(shape=(int(shape[0]), int(shape[1])), levels=tuple(out))


def _validate(d: Decomposition2D) -> None:
    if d.depth < 1:
        raise StructureError("decomposition has no levels")
    rows, cols = d.shape
    for j, lv in enumerate(d.levels, start=1):
        if lv.row_pad != rows % 2 or lv.col_pad != cols % 2:
            raise StructureError(f"padding log at level {j} disagrees with shape {rows}x{cols}")
        rows, cols = (rows + 1) // 2, (cols + 1) // 2
        for name in ("approximation", "horizontal", "vertical", "diagonal"):
            band = getattr(lv, name)
            if band.shape != (rows, cols):
                raise StructureError(f"{name} band at level {j} has shape {band.shape}, expected {(rows, cols)}")


def _inverse(d: Decomposition2D, ll: np.ndarray, keep_details: bool) -> np.ndarray:
    x = ll
    for lv in reversed(d.levels):
        h, v, g = lv.horizontal, lv.vertical, lv.diagonal
        if not keep_details:
            h, v, g = np.zeros_like(h), np.zeros_like(v), np.zeros_like(g)
        lo_c = _synthesize(x, v, axis=0, pad=lv.row_pad)
        hi_c = _synthesize(h, g, axis=0, pad=lv.row_pad)
        x = _synthesize(lo_c, hi_c, axis=1, pad=lv.col_pad)
    return x


def reconstruct2d(d: Decomposition2D) -> np.ndarray:
    """Exact inverse of :func:`decompose2d`."""
    _validate(d)
    return _inverse(d, d.levels[-1].approximation, keep_details=True)


def approximation_image(d: Decomposition2D) -> np.ndarray:
    """Inverse with every detail band zeroed: a blockwise-mean image."""
    _validate(d)
    return _inverse(d, d.levels[-1].approximation, keep_details=False)


def vertical_coefficients(d: Decomposition2D, level: int) -> np.ndarray:
    return d.level(level).vertical.copy()


def _check_level(level: int, deepest: int) -> None:
    if int(level) != level or not 1 <= level <= deepest:
        raise InvalidArgumentError(f"level must be in [1, {deepest}], got {level!r}")

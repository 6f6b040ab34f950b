"""Integer points in the intersection of two open planar bands.

Every scatterer/cylinder query in the samplers reduces to enumerating
m in Z^2 with lo1 < m.c1 < hi1 and lo2 < m.c2 < hi2 for two linearly
independent directions c1, c2.  The region is a parallelogram; we scan
integer values along the axis where it is narrowest and solve the exact
integer interval of the other coordinate per line, fully vectorized.
Inequalities are strict, which makes open-cylinder counts exact for
boundary points that are exactly representable in floats (e.g. integer
coordinates on the unit-strip boundary).
"""

from __future__ import annotations

import numpy as np

__all__ = ["NumericalError", "points_in_bands", "MAX_POINTS_DEFAULT"]

MAX_POINTS_DEFAULT = 5_000_000


class NumericalError(RuntimeError):
    """Degenerate geometry or an enumeration exceeding its safety cap."""


def points_in_bands(c1, lo1, hi1, c2, lo2, hi2, max_points=MAX_POINTS_DEFAULT):
    """Return the (n, 2) int64 array of all m in Z^2 with
    lo1 < m.c1 < hi1 and lo2 < m.c2 < hi2 (strict inequalities).

    c1 and c2 must be linearly independent; nearly parallel directions
    raise NumericalError rather than enumerate an unbounded sliver.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if not all(np.isfinite(b) for b in (lo1, hi1, lo2, hi2)):
        raise NumericalError("band bounds must be finite")
    if lo1 >= hi1 or lo2 >= hi2:
        return np.empty((0, 2), dtype=np.int64)
    det = c1[0] * c2[1] - c1[1] * c2[0]
    scale = max(np.abs(c1).max(), np.abs(c2).max(), 1e-300)
    if abs(det) <= 1e-12 * scale * scale:
        raise NumericalError("band directions are (nearly) parallel")

    # Corners of the parallelogram in the m-plane: solve m.c1 = a, m.c2 = b.
    m0s, m1s = [], []
    for a in (lo1, hi1):
        for b in (lo2, hi2):
            m0s.append((a * c2[1] - b * c1[1]) / det)
            m1s.append((b * c1[0] - a * c2[0]) / det)
    ext0 = max(m0s) - min(m0s)
    ext1 = max(m1s) - min(m1s)
    axis = 0 if ext0 <= ext1 else 1
    other = 1 - axis
    smin, smax = (min(m0s), max(m0s)) if axis == 0 else (min(m1s), max(m1s))

    n_lines = int(np.floor(smax)) - int(np.ceil(smin)) + 3
    if n_lines <= 0:
        return np.empty((0, 2), dtype=np.int64)
    if n_lines > max_points:
        raise NumericalError(
            f"band scan would sweep {n_lines} lines (cap {max_points})"
        )
    s = np.arange(int(np.ceil(smin)) - 1, int(np.floor(smax)) + 2, dtype=np.int64)
    sf = s.astype(float)

    ylo = np.full(s.shape, -np.inf)
    yhi = np.full(s.shape, np.inf)
    for cvec, lo, hi in ((c1, lo1, hi1), (c2, lo2, hi2)):
        ca, cb = cvec[axis], cvec[other]
        # A cross component this small cannot move the float dot product
        # within any enumerable range; dividing by it would only inject
        # overflow, so use the axis-parallel branch (same philosophy as
        # the near-parallel determinant check above).
        if abs(cb) <= 1e-14 * scale:
            ok = (lo < sf * ca) & (sf * ca < hi)
            ylo = np.where(ok, ylo, np.inf)
        else:
            t1 = (lo - sf * ca) / cb
            t2 = (hi - sf * ca) / cb
            ylo = np.maximum(ylo, np.minimum(t1, t2))
            yhi = np.minimum(yhi, np.maximum(t1, t2))

    # Any admissible point has its other coordinate inside the corner
    # hull; clipping there keeps the int64 casts below from overflowing.
    omin, omax = (min(m1s), max(m1s)) if axis == 0 else (min(m0s), max(m0s))
    ylo = np.maximum(ylo, np.floor(omin) - 1.0)
    yhi = np.minimum(yhi, np.ceil(omax) + 1.0)

    # Strict bounds: smallest integer > ylo and largest integer < yhi.
    with np.errstate(invalid="ignore"):
        lo_int = np.where(np.isfinite(ylo), np.floor(ylo) + 1, np.nan)
        hi_int = np.where(np.isfinite(yhi), np.ceil(yhi) - 1, np.nan)
    valid = np.isfinite(lo_int) & np.isfinite(hi_int)
    counts = np.zeros(s.shape, dtype=np.int64)
    counts[valid] = np.maximum(
        0, hi_int[valid].astype(np.int64) - lo_int[valid].astype(np.int64) + 1
    )
    total = int(counts.sum())
    if total == 0:
        return np.empty((0, 2), dtype=np.int64)
    if total > max_points:
        raise NumericalError(
            f"band scan would enumerate {total} points (cap {max_points})"
        )

    s_rep = np.repeat(s, counts)
    starts = np.repeat(lo_int[valid].astype(np.int64), counts[valid])
    offsets = np.arange(total, dtype=np.int64) - np.repeat(
        np.cumsum(counts) - counts, counts
    )
    y_rep = starts + offsets
    out = np.empty((total, 2), dtype=np.int64)
    out[:, axis] = s_rep
    out[:, other] = y_rep
    return out

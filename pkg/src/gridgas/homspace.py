"""Monte Carlo over limiting scatterer configurations (d = 2).

In the small-radius limit the point set seen around a trajectory point
is a random finite union of affine lattices: per commensurability class
an independent Haar-random unimodular matrix, combined with a random
translation matrix drawn uniformly from the class's torus components
(plus uniform noise along the component subspace).  Around a point of a
chosen grid the same picture holds with the mark-conditioned component
data and with the origin removed from the marked grid.

This module draws those configurations and estimates cylinder-hitting
statistics: free path tails, per-class product tails, hitting densities
and Siegel-type mean point counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gridalg import GridError, Presentation, torus_components
from .latticescan import points_in_bands
from .streams import run_chunked, stream_generator

__all__ = [
    "V1",
    "haar_sl2",
    "sample_torus",
    "RandomConfiguration",
    "random_configuration",
    "count_in_cylinder",
    "first_passage",
    "TailEstimate",
    "tail_estimate",
    "product_tail",
    "DensityEstimate",
    "phi_from_tail",
    "SiegelReport",
    "siegel_check",
    "isotonic_nonincreasing",
    "region_volume",
]

# Measure of the unit ball in the transverse direction (d = 2: the
# interval (-1, 1)); the mean free path of a union with density nbar is
# 1 / (nbar * V1).
V1 = 2.0

_Y_MIN = math.sqrt(3.0) / 2.0


def haar_sl2(rng: np.random.Generator, n: Optional[int] = None):
    """Haar-distributed SL(2, Z)\\SL(2, R) lattice basis (row convention).

    Returns a 2x2 array whose rows span a unimodular lattice Z^2·B
    distributed by the invariant probability measure; with ``n`` given,
    an (n, 2, 2) stack.  The first row always has length at most
    (4/3)^(1/4) (it realizes the Hermite bound witness).
    """
    if n is not None:
        out = np.empty((n, 2, 2))
        for k in range(n):
            out[k] = haar_sl2(rng)
        return out
    # Fundamental-domain coordinates: x uniform, y from the 1/y^2 law,
    # rejected into |z| >= 1, then a uniform rotation.
    while True:
        x = rng.uniform(-0.5, 0.5)
        y = _Y_MIN / (1.0 - rng.random())
        if x * x + y * y >= 1.0:
            break
    theta = rng.uniform(0.0, 2.0 * math.pi)
    ct, st = math.cos(theta), math.sin(theta)
    sy = math.sqrt(y)
    return np.array(
        [
            [ct / sy, st / sy],
            [x * ct / sy - sy * st, x * st / sy + sy * ct],
        ]
    )


# ----------------------------------------------------------------------
# Float payloads derived from the exact presentation data.


class _ClassPayload:
    __slots__ = (
        "index",
        "r",
        "c",
        "reps",
        "basis",
        "mark_row",
        "n_components",
    )

    def __init__(self, index, r, c, reps, basis, mark_row):
        self.index = index
        self.r = r
        self.c = c
        self.reps = reps
        self.basis = basis
        self.mark_row = mark_row
        self.n_components = len(reps)


class _Payload:
    __slots__ = ("classes", "nbar", "mode", "mark", "p")

    def __init__(self, classes, nbar, mode, mark, p):
        self.classes = classes
        self.nbar = nbar
        self.mode = mode
        self.mark = mark
        self.p = p


def _torus_float(tcs):
    reps = np.array(
        [[[float(e) for e in row] for row in rep] for rep in tcs.reps], dtype=float
    )
    reps = np.mod(reps, 1.0)
    if tcs.L.dim:
        basis = np.array([[float(x) for x in row] for row in tcs.L.basis], dtype=float)
    else:
        basis = np.zeros((0, tcs.L.r))
    return reps, basis


def _build_payload(p: Presentation, mode) -> _Payload:
    if p.dim != 2:
        raise GridError("homogeneous-space sampling supports d = 2 only")

    def build():
        classes = []
        for j, cls in enumerate(p.classes):
            tcs = torus_components(p, j, mode)
            reps, basis = _torus_float(tcs)
            c = np.array([float(c) for c, _ in cls.members])
            classes.append(
                _ClassPayload(j, len(cls.members), c, reps, basis, tcs.mark_row)
            )
        mark = mode[1] if mode[0] == "mark" else None
        return _Payload(classes, p.total_density(), mode, mark, p)

    return p.cached(("payload", mode), build)


def _draw_torus(cp: _ClassPayload, rng: np.random.Generator):
    k = int(rng.integers(cp.n_components))
    U = cp.reps[k].copy()
    if cp.basis.shape[0]:
        z = rng.random((2, cp.basis.shape[0]))
        U = np.mod(U + (z @ cp.basis).T, 1.0)
    return k, U


def sample_torus(tcs, rng: np.random.Generator):
    """One translation matrix drawn from the component-uniform measure.

    Picks a component uniformly and adds uniform noise along the
    component subspace; rows reduce mod 1.  The marked member's row (if
    any) stays exactly zero.
    """
    reps, basis = _torus_float(tcs)
    cp = _ClassPayload(tcs.class_index, reps.shape[1], None, reps, basis, tcs.mark_row)
    _, U = _draw_torus(cp, rng)
    return U


class RandomConfiguration:
    """One sampled limiting configuration.

    Per class j: an independent Haar lattice basis B[j] (the exact class
    matrix is absorbed into the Haar limit, so the basis is the sampled
    matrix itself), the translation matrix U[j] (rows are member
    translations on the torus) and the chosen component index comp[j].
    The point set of member (j, i) is c_{j,i}(Z^2 + U[j][i])·B[j]; in
    mark mode the marked member's origin (integer index m = 0) is
    removed.
    """

    __slots__ = ("payload", "B", "U", "comp")

    def __init__(self, payload, B, U, comp):
        self.payload = payload
        self.B = B
        self.U = U
        self.comp = comp

    @property
    def mark(self):
        return self.payload.mark

    @property
    def mode(self):
        return self.payload.mode

    def member_geometry(self):
        """Per member (j, i): direction/offset floats for band queries.

        Yields (j, i, cx, cy, ox, oy, is_marked) where a config point of
        the member has coordinates (m·cx + ox, m·cy + oy) for m in Z^2.
        """
        mark = self.payload.mark
        for cp, B, U in zip(self.payload.classes, self.B, self.U):
            for i in range(cp.r):
                c = cp.c[i]
                cx = c * B[:, 0]
                cy = c * B[:, 1]
                ox = c * float(U[i] @ B[:, 0])
                oy = c * float(U[i] @ B[:, 1])
                marked = mark is not None and mark == (cp.index, i)
                yield cp.index, i, cx, cy, ox, oy, marked


def _draw_configuration(payload: _Payload, rng: np.random.Generator):
    B, U, comp = [], [], []
    for cp in payload.classes:
        B.append(haar_sl2(rng))
        k, u = _draw_torus(cp, rng)
        U.append(u)
        comp.append(k)
    return RandomConfiguration(payload, B, U, comp)


def random_configuration(p: Presentation, mode, rng: np.random.Generator):
    """Draw one limiting configuration for ``mode`` ("generic",) or
    ("mark", psi[, q]).  Classes are independent."""
    return _draw_configuration(_build_payload(p, tuple(mode)), rng)


def explicit_configuration(p: Presentation, mode, B=None, U=None):
    """Deterministic configuration for oracle tests: B defaults to the
    identity per class, U to the first component representative."""
    payload = _build_payload(p, tuple(mode))
    Bs, Us, comp = [], [], []
    for cp in payload.classes:
        Bs.append(np.eye(2) if B is None else np.asarray(B[cp.index], dtype=float))
        Us.append(
            cp.reps[0].copy() if U is None else np.asarray(U[cp.index], dtype=float)
        )
        comp.append(0)
    return RandomConfiguration(payload, Bs, Us, comp)


# ----------------------------------------------------------------------
# Cylinder statistics for one configuration.


def count_in_cylinder(conf: RandomConfiguration, xi: float, shift: float = 0.0) -> int:
    """Number of configuration points in the open strip
    (0, xi) x (shift - 1, shift + 1).

    The removed origin of a marked grid sits at x = 0 and is excluded by
    strictness automatically.
    """
    total = 0
    for _, _, cx, cy, ox, oy, _ in conf.member_geometry():
        m = points_in_bands(cx, -ox, xi - ox, cy, shift - 1.0 - oy, shift + 1.0 - oy)
        total += len(m)
    return total


def first_passage(conf: RandomConfiguration, xi_max: float, shift: float = 0.0):
    """First configuration point in the strip (0, xi_max) x (shift +- 1).

    Returns (xi, y_rel, j, i) with y_rel the transverse offset from the
    strip axis, or None if the strip is empty up to xi_max (censored).
    Scans doubling windows; a point found inside the current window is
    the global minimum because earlier windows were empty.
    """
    geom = list(conf.member_geometry())
    lo_y = shift - 1.0
    hi_y = shift + 1.0
    x_prev = 0.0
    x_hi = min(xi_max, max(0.5, 1.0 / conf.payload.nbar))
    while True:
        # Pad the upper bound so a point exactly on the window seam is
        # caught here rather than lost between two strict windows.
        pad = 1e-9 * max(1.0, x_hi)
        best = None
        for j, i, cx, cy, ox, oy, _ in geom:
            m = points_in_bands(
                cx, x_prev - ox, x_hi + pad - ox, cy, lo_y - oy, hi_y - oy
            )
            if len(m):
                xs = m @ cx + ox
                k = int(np.argmin(xs))
                if best is None or xs[k] < best[0]:
                    best = (float(xs[k]), float(m[k] @ cy + oy), j, i)
        if best is not None:
            # Keep the strip open at xi_max: a seam candidate at or past
            # the cap is not a hit.
            if best[0] >= xi_max:
                return None
            return (best[0], best[1] - shift, best[2], best[3])
        if x_hi >= xi_max:
            return None
        x_prev = x_hi
        x_hi = min(xi_max, 2.0 * x_hi)


# ----------------------------------------------------------------------
# Tail estimation.


def isotonic_nonincreasing(y):
    """Least-squares nonincreasing fit (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    vals: list = []
    counts: list = []
    for v in y:
        vals.append(float(v))
        counts.append(1)
        while len(vals) >= 2 and vals[-2] < vals[-1]:
            v2, c2 = vals.pop(), counts.pop()
            v1, c1 = vals.pop(), counts.pop()
            vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            counts.append(c1 + c2)
    return np.repeat(vals, counts)


@dataclass
class TailEstimate:
    """Estimated tail F(xi) = P(no configuration point in the open strip
    (0, xi) x (shift +- 1)) on a fixed grid, from n samples with shared
    randomness across grid points (so F_raw is exactly nonincreasing)."""

    xi: np.ndarray
    F_raw: np.ndarray
    F_iso: np.ndarray
    stderr: np.ndarray
    n: int
    mode: str
    shift: float = 0.0
    scope: Optional[int] = None

    def rows(self):
        for k in range(len(self.xi)):
            yield (
                float(self.xi[k]),
                float(self.F_raw[k]),
                float(self.F_iso[k]),
                float(self.stderr[k]),
                self.n,
            )


def _mode_str(mode):
    if mode[0] == "generic":
        return "generic"
    psi = mode[1]
    return f"mark:{psi[0]},{psi[1]}"


def _tail_ctx(p, mode, xi_grid, shift):
    payload = _build_payload(p, mode)
    return (payload, np.asarray(xi_grid, dtype=float), float(shift))


def _tail_chunk(ctx, rng, count):
    payload, grid, shift = ctx
    xi_max = float(grid[-1])
    surv = np.zeros(len(grid), dtype=np.int64)
    for _ in range(count):
        conf = _draw_configuration(payload, rng)
        hit = first_passage(conf, xi_max, shift)
        if hit is None:
            surv += 1
        else:
            surv += grid <= hit[0]
    return surv


def tail_estimate(
    p: Presentation,
    xi_grid,
    n: int,
    *,
    mode=("generic",),
    scope: Optional[int] = None,
    shift: float = 0.0,
    seed: int = 0,
    workers: int = 1,
) -> TailEstimate:
    """Estimate the free path tail on ``xi_grid`` from ``n`` configurations.

    ``scope`` restricts to a single commensurability class (used by the
    per-class product formula); mark modes must then mark that class.
    Deterministic in (seed, n) regardless of ``workers``.
    """
    mode = tuple(mode)
    grid = np.asarray(xi_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("xi_grid must be strictly increasing and positive")
    if scope is not None:
        if mode[0] == "mark":
            psi = mode[1]
            if psi[0] != scope:
                raise GridError("mark mode must mark the scoped class")
            mode = ("mark", (0, psi[1])) + tuple(mode[2:])
        p = p.restricted_to_class(scope)
    label = f"tail|{_mode_str(mode)}|scope={scope}|shift={shift!r}"
    parts = run_chunked(
        _tail_chunk, _tail_ctx, (p, mode, grid, shift), n, seed, label, workers
    )
    surv = np.sum(parts, axis=0)
    F = surv / float(n)
    stderr = np.sqrt(F * (1.0 - F) / n)
    return TailEstimate(
        grid, F, isotonic_nonincreasing(F), stderr, n, _mode_str(mode), shift, scope
    )


def product_tail(estimates: Sequence[TailEstimate]) -> TailEstimate:
    """Combine independent per-class tails into the union tail
    F(xi) = prod_c F_c(xi), with a delta-method standard error."""
    if not estimates:
        raise ValueError("no estimates to combine")
    grid = estimates[0].xi
    for t in estimates[1:]:
        if not np.array_equal(t.xi, grid):
            raise ValueError("product requires identical xi grids")
    F = np.ones(len(grid))
    for t in estimates:
        F = F * t.F_raw
    var = np.zeros(len(grid))
    for c, t in enumerate(estimates):
        rest = np.ones(len(grid))
        for c2, t2 in enumerate(estimates):
            if c2 != c:
                rest = rest * t2.F_raw
        var += (t.stderr * rest) ** 2
    return TailEstimate(
        grid,
        F,
        isotonic_nonincreasing(F),
        np.sqrt(var),
        min(t.n for t in estimates),
        "product",
        estimates[0].shift,
        None,
    )


@dataclass
class DensityEstimate:
    """Finite-difference density of the free path length on grid
    midpoints, clipped into the a priori range [0, nbar * V1]."""

    xi: np.ndarray
    phi: np.ndarray
    stderr: np.ndarray


def phi_from_tail(tail: TailEstimate, nbar: float) -> DensityEstimate:
    """Differentiate the isotonic tail on midpoints: the free path
    density estimate Phi(xi) ~= -dF/dxi, clipped to [0, nbar * V1]."""
    xi = tail.xi
    if len(xi) < 2:
        raise ValueError("need at least two grid points")
    dx = np.diff(xi)
    mid = 0.5 * (xi[1:] + xi[:-1])
    phi = -(np.diff(tail.F_iso)) / dx
    # The drop F(a) - F(b) is itself a binomial fraction of the shared
    # sample, so its error does not inherit the endpoint correlations.
    drop = np.clip(tail.F_raw[:-1] - tail.F_raw[1:], 0.0, 1.0)
    stderr = np.sqrt(drop * (1.0 - drop) / tail.n) / dx
    phi = np.clip(phi, 0.0, nbar * V1)
    return DensityEstimate(mid, phi, stderr)


# ----------------------------------------------------------------------
# Siegel-type mean point counts.


def region_volume(region) -> float:
    if region[0] == "box":
        _, x0, x1, y0, y1 = region
        if x0 >= x1 or y0 >= y1:
            raise ValueError("empty box region")
        return (x1 - x0) * (y1 - y0)
    if region[0] == "ball":
        _, _, _, rad = region
        if rad <= 0:
            raise ValueError("ball radius must be positive")
        return math.pi * rad * rad
    raise ValueError(f"unknown region kind {region[0]!r}")


def _region_contains_origin(region) -> bool:
    if region[0] == "box":
        _, x0, x1, y0, y1 = region
        return x0 < 0.0 < x1 and y0 < 0.0 < y1
    _, cx, cy, rad = region
    return cx * cx + cy * cy < rad * rad


def _count_member_in_region(conf, psi, region) -> int:
    for j, i, cx, cy, ox, oy, marked in conf.member_geometry():
        if (j, i) != tuple(psi):
            continue
        if region[0] == "box":
            _, x0, x1, y0, y1 = region
            m = points_in_bands(cx, x0 - ox, x1 - ox, cy, y0 - oy, y1 - oy)
        else:
            _, bx, by, rad = region
            m = points_in_bands(
                cx, bx - rad - ox, bx + rad - ox, cy, by - rad - oy, by + rad - oy
            )
            if len(m):
                xs = m @ cx + ox - bx
                ys = m @ cy + oy - by
                m = m[xs * xs + ys * ys < rad * rad]
        if marked and len(m):
            m = m[~((m[:, 0] == 0) & (m[:, 1] == 0))]
        return len(m)
    raise GridError(f"mark {psi} not present")


@dataclass
class SiegelReport:
    """Mean point count of one grid over random configurations, against
    the prediction density * volume (+ the deterministic atom at the
    origin that mark mode removes from the random count)."""

    mean: float
    stderr: float
    predicted: float
    predicted_continuous: float
    atom: int
    volume: float
    n: int
    psi: tuple
    mode: str

    @property
    def z(self) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.mean == self.predicted_continuous else math.inf
        return (self.mean - self.predicted_continuous) / self.stderr


def _siegel_ctx(p, mode, psi, region):
    return (_build_payload(p, mode), tuple(psi), region)


def _siegel_chunk(ctx, rng, count):
    payload, psi, region = ctx
    s = 0.0
    ss = 0.0
    for _ in range(count):
        conf = _draw_configuration(payload, rng)
        k = _count_member_in_region(conf, psi, region)
        s += k
        ss += k * k
    return (s, ss, count)


def siegel_check(
    p: Presentation,
    psi,
    region,
    n: int,
    *,
    mode=("generic",),
    seed: int = 0,
    workers: int = 1,
) -> SiegelReport:
    """Monte Carlo mean count of grid ``psi`` points in ``region``.

    The statistical comparison is mean vs predicted_continuous =
    density(psi) * volume; in mark mode the removed origin contributes
    the reported integer atom on top (predicted = continuous + atom).
    """
    mode = tuple(mode)
    psi = tuple(psi)
    vol = region_volume(region)
    label = f"siegel|{_mode_str(mode)}|psi={psi}|{region!r}"
    parts = run_chunked(
        _siegel_chunk, _siegel_ctx, (p, mode, psi, region), n, seed, label, workers
    )
    s = sum(x[0] for x in parts)
    ss = sum(x[1] for x in parts)
    mean = s / n
    var = max(ss / n - mean * mean, 0.0) * (n / max(n - 1, 1))
    stderr = math.sqrt(var / n)
    atom = 0
    if mode[0] == "mark" and tuple(mode[1]) == psi and _region_contains_origin(region):
        atom = 1
    cont = p.density(psi) * vol
    return SiegelReport(
        mean, stderr, cont + atom, cont, atom, vol, n, psi, _mode_str(mode)
    )

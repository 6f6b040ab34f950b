"""Finite-radius Lorentz gas on a union of grids (floats, d = 2 or 3).

A ScattererScene places a ball of radius rho at every point of every
grid of a presentation and answers first-hit queries along rays by
marching lattice-coordinate slabs, so the work per leg is linear in the
traveled distance.  Path lengths are reported in Boltzmann-Grad units
xi = rho^(d-1) * (Euclidean length), in which the free path law has a
nontrivial small-radius limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .gridalg import GridError, Presentation
from .latticescan import points_in_bands
from .streams import run_chunked

__all__ = [
    "ScattererScene",
    "Hit",
    "Trajectory",
    "reflect",
    "BALL_VOLUME_TRANSVERSE",
]

# Volume of the unit ball in the transverse (d-1)-dimensional space.
BALL_VOLUME_TRANSVERSE = {2: 2.0, 3: math.pi}

_GRAZE_EPS = 1e-14
_SELF_EPS = 1e-9
_OVERLAP_EPS = 1e-9


def reflect(v, n):
    """Specular reflection of v off the plane with outward normal n.

    >>> reflect((1.0, 0.0), (-1.0, 0.0))
    (-1.0, 0.0)
    """
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    out = v - 2.0 * float(v @ n) * n
    out /= np.linalg.norm(out)
    return tuple(float(x) for x in out)


def _lagrange_reduce(B):
    """Lagrange-reduced basis for a 2D row lattice: G = T @ B with T
    integer and |det T| = 1, |g1| <= |g2| and |g1| minimal."""
    G = B.copy()
    T = np.eye(2, dtype=np.int64)
    while True:
        if G[0] @ G[0] > G[1] @ G[1]:
            G = G[::-1].copy()
            T = T[::-1].copy()
        mu = round(float(G[1] @ G[0]) / float(G[0] @ G[0]))
        if mu == 0:
            break
        G[1] -= mu * G[0]
        T[1] -= mu * T[0]
        if G[1] @ G[1] >= G[0] @ G[0]:
            break
    return G, T


def _size_reduce_3d(B):
    """A few sweeps of pairwise size reduction for a 3D row basis."""
    G = B.copy()
    T = np.eye(3, dtype=np.int64)
    for _ in range(4):
        order = np.argsort([float(g @ g) for g in G])
        G = G[order].copy()
        T = T[order].copy()
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                mu = round(float(G[j] @ G[i]) / float(G[i] @ G[i]))
                if mu:
                    G[j] -= mu * G[i]
                    T[j] -= mu * T[i]
    return G, T


class _GridPayload:
    __slots__ = ("psi", "c", "w", "B", "Binv", "G", "T", "s_min", "w_phys")

    def __init__(self, psi, c, w, M):
        self.psi = psi
        self.c = c
        self.w = w
        self.B = c * M  # rows are the lattice basis, centers = (m + w) @ B
        self.Binv = np.linalg.inv(self.B)
        if len(w) == 2:
            self.G, self.T = _lagrange_reduce(self.B)
        else:
            self.G, self.T = _size_reduce_3d(self.B)
        self.s_min = min(float(np.linalg.norm(g)) for g in self.G)
        self.w_phys = w @ self.B


@dataclass
class Hit:
    """One ray-scatterer intersection with its specular aftermath."""

    t: float
    center: np.ndarray
    psi: tuple
    w: float
    position: np.ndarray
    velocity: np.ndarray


@dataclass
class Trajectory:
    hits: List[Hit]
    escaped: bool


class ScattererScene:
    """Scatterers of radius rho (per query) at every grid point.

    Built once from the exact presentation; read-only afterwards and
    safe to share across workers.
    """

    def __init__(self, p: Presentation):
        if p.dim not in (2, 3):
            raise GridError("scenes support d = 2 and d = 3 only")
        self.presentation = p
        self.dim = p.dim
        self.nbar = p.total_density()
        self.grids: List[_GridPayload] = []
        for psi in p.marks():
            c_e, w_e = p.member(psi)
            M = np.array(
                [[float(x) for x in row] for row in p.classes[psi[0]].M]
            )
            if abs(abs(np.linalg.det(M)) - 1.0) > 1e-12:
                raise GridError("class matrix determinant drifted from 1")
            self.grids.append(
                _GridPayload(psi, float(c_e), np.array([float(x) for x in w_e]), M)
            )

    # -- geometry helpers -------------------------------------------------

    def _centers_near(self, point, radius):
        """(grid index, m, center) for all centers within radius of point."""
        out = []
        for gi, g in enumerate(self.grids):
            if self.dim == 2:
                o1 = float(g.w_phys[0])
                o2 = float(g.w_phys[1])
                m = points_in_bands(
                    g.B[:, 0],
                    point[0] - radius - o1,
                    point[0] + radius - o1,
                    g.B[:, 1],
                    point[1] - radius - o2,
                    point[1] + radius - o2,
                )
            else:
                m = self._box_candidates_3d(g, point - radius, point + radius)
            if len(m):
                centers = (m + g.w) @ g.B
                d2 = np.sum((centers - point) ** 2, axis=1)
                keep = d2 < (radius * radius)
                for mm, cc in zip(m[keep], centers[keep]):
                    out.append((gi, mm, cc))
        return out

    def _box_candidates_3d(self, g, lo, hi):
        corners = np.array(
            [[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])]
        )
        mc = corners @ g.Binv - g.w
        m_lo = np.floor(mc.min(axis=0)).astype(np.int64)
        m_hi = np.ceil(mc.max(axis=0)).astype(np.int64)
        span = m_hi - m_lo + 1
        if np.prod(span.astype(float)) > 2e6:
            raise GridError("3d candidate box too large; reduce the window")
        axes = [np.arange(m_lo[k], m_hi[k] + 1) for k in range(3)]
        return np.array(np.meshgrid(*axes, indexing="ij")).reshape(3, -1).T

    def start_is_valid(self, q, v, rho):
        """True if q is outside every scatterer, or on a boundary with
        v pointing out of it."""
        q = np.asarray(q, dtype=float)
        for _, _, center in self._centers_near(q, rho + 1e-9):
            d = float(np.linalg.norm(q - center))
            if d < rho - 1e-12:
                return False
            if d <= rho + 1e-12 and float((q - center) @ v) < -1e-12:
                return False
        return True

    # -- first hit ---------------------------------------------------------

    def _window_candidates(self, g, q, v, vperp, rho, t_lo, t_hi):
        """Centers whose hit parameter could land in (t_lo, t_hi]."""
        pad = _SELF_EPS * max(1.0, t_hi) + rho * 1e-9
        if self.dim == 2:
            c1 = g.B @ v
            c2 = g.B @ vperp
            o1 = float((g.w_phys - q) @ v)
            o2 = float((g.w_phys - q) @ vperp)
            m = points_in_bands(
                c1,
                t_lo - pad - o1,
                t_hi + rho + pad - o1,
                c2,
                -rho - pad - o2,
                rho + pad - o2,
            )
            if not len(m):
                return None
            return (m + g.w) @ g.B
        # d = 3: chunked axis-aligned boxes around the ray segment.
        step = max(2.0 * rho, g.s_min, 1e-6)
        cands = []
        a = t_lo
        while a < t_hi + rho:
            b = min(a + step, t_hi + rho)
            lo = np.minimum(q + a * v, q + b * v) - (rho + pad)
            hi = np.maximum(q + a * v, q + b * v) + (rho + pad)
            m = self._box_candidates_3d(g, lo, hi)
            if len(m):
                cands.append((m + g.w) @ g.B)
            a = b
        if not cands:
            return None
        return np.concatenate(cands)

    def first_hit(self, q, v, rho: float, horizon: float) -> Optional[Hit]:
        """First scatterer boundary point on q + t v with 0 < t <= horizon.

        Ties across grids break toward the smaller t, then the lower
        mark index.  Raises ValueError when q starts inside a scatterer
        or when horizon is not positive.
        """
        if rho <= 0.0:
            raise ValueError("rho must be positive")
        if horizon <= 0.0:
            raise ValueError("horizon must be positive")
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            raise ValueError("zero direction")
        v = v / nv
        if not self.start_is_valid(q, v, rho):
            raise ValueError("ray starts inside a scatterer")
        if self.dim == 2:
            vperp = np.array([-v[1], v[0]])
        else:
            vperp = None

        v1 = BALL_VOLUME_TRANSVERSE[self.dim]
        mean_path = 1.0 / (self.nbar * v1 * rho ** (self.dim - 1))
        t_lo = 0.0
        t_hi = min(horizon, max(4.0 * rho, mean_path))
        best: Optional[Tuple[float, int, np.ndarray]] = None
        while True:
            for gi, g in enumerate(self.grids):
                centers = self._window_candidates(g, q, v, vperp, rho, t_lo, t_hi)
                if centers is None or not len(centers):
                    continue
                delta = centers - q
                a = delta @ v
                b2 = np.sum(delta * delta, axis=1) - a * a
                disc = rho * rho - b2
                ok = disc > _GRAZE_EPS
                if not np.any(ok):
                    continue
                t = a[ok] - np.sqrt(disc[ok])
                cen = centers[ok]
                good = t > _SELF_EPS
                if not np.any(good):
                    continue
                t = t[good]
                cen = cen[good]
                k = int(np.argmin(t))
                # Grids are scanned in mark order, so on an exact tie the
                # lower mark index is the one already stored.
                if best is None or t[k] < best[0]:
                    best = (float(t[k]), gi, cen[k])
            if best is not None and best[0] <= t_hi:
                break
            if t_hi >= horizon:
                break
            t_lo = t_hi
            t_hi = min(horizon, 2.0 * t_hi)
        if best is None or best[0] > horizon:
            return None
        t, gi, center = best
        g = self.grids[gi]
        pos = q + t * v
        n = pos - center
        n = n / np.linalg.norm(n)
        pos = center + rho * n  # snap exactly onto the sphere
        if self.dim == 2:
            w_imp = float((q - center) @ vperp) / rho
        else:
            w_imp = float(np.linalg.norm((q - center) - float((q - center) @ v) * v)) / rho
        vel = np.array(reflect(v, n))
        return Hit(t, center, g.psi, w_imp, pos, vel)

    def hit_near_overlap(self, hit: Hit, rho: float) -> bool:
        """True if the collision point lies within the overlap tolerance
        of a second scatterer boundary."""
        for _, _, center in self._centers_near(hit.position, rho + 2.0 * _OVERLAP_EPS):
            if np.allclose(center, hit.center, rtol=0.0, atol=1e-12):
                continue
            if abs(float(np.linalg.norm(hit.position - center)) - rho) <= _OVERLAP_EPS:
                return True
        return False

    def trajectory(
        self, q0, v0, rho: float, n_collisions: int, horizon_per_leg: float = 1e4
    ) -> Trajectory:
        """Iterate first_hit and specular reflection.

        Stops early with escaped = True when a leg exceeds
        horizon_per_leg without a collision.
        """
        q = np.asarray(q0, dtype=float)
        v = np.asarray(v0, dtype=float)
        v = v / np.linalg.norm(v)
        hits: List[Hit] = []
        for _ in range(n_collisions):
            hit = self.first_hit(q, v, rho, horizon_per_leg)
            if hit is None:
                return Trajectory(hits, True)
            hits.append(hit)
            q = hit.position
            v = hit.velocity
        return Trajectory(hits, False)


# ----------------------------------------------------------------------
# Boltzmann-Grad rescaled free path sampling.

_PATH_DTYPE = np.dtype(
    [
        ("xi", np.float64),
        ("mark_j", np.int64),
        ("mark_i", np.int64),
        ("w", np.float64),
        ("censored", np.bool_),
    ]
)


def _draw_direction(rng, law, dim):
    if law[0] == "uniform":
        if dim == 2:
            th = rng.uniform(0.0, 2.0 * math.pi)
            return np.array([math.cos(th), math.sin(th)])
        z = rng.normal(size=3)
        return z / np.linalg.norm(z)
    if law[0] == "table":
        _, edges, weights = law
        edges = np.asarray(edges, dtype=float)
        weights = np.asarray(weights, dtype=float)
        k = int(rng.choice(len(weights), p=weights / weights.sum()))
        th = rng.uniform(edges[k], edges[k + 1])
        return np.array([math.cos(th), math.sin(th)])
    raise ValueError(f"unknown direction law {law[0]!r}")


def _draw_start(scene, rng, rho, start, v):
    """Start point for one sample; None when the draw must be rejected."""
    if start[0] == "fixed":
        q = np.asarray(start[1], dtype=float)
        return q if scene.start_is_valid(q, v, rho) else None
    if start[0] == "uniform-cell":
        g = scene.grids[0]
        u = rng.random(scene.dim)
        q = (u + g.w) @ g.B
        return q if scene.start_is_valid(q, v, rho) else None
    if start[0] == "at-scatterer":
        psi = tuple(start[1])
        g = next(gr for gr in scene.grids if gr.psi == psi)
        uw = rng.uniform(-1.0, 1.0)
        m = rng.integers(0, 4096, size=scene.dim)
        center = (m + g.w) @ g.B
        if scene.dim == 2:
            vperp = np.array([-v[1], v[0]])
            q = center + rho * (math.sqrt(1.0 - uw * uw) * v + uw * vperp)
        else:
            # transverse offset uniform in the unit disk of the plane
            # orthogonal to v
            e1 = np.cross(v, [0.0, 0.0, 1.0])
            if np.linalg.norm(e1) < 1e-9:
                e1 = np.cross(v, [0.0, 1.0, 0.0])
            e1 = e1 / np.linalg.norm(e1)
            e2 = np.cross(v, e1)
            phi = rng.uniform(0.0, 2.0 * math.pi)
            r = math.sqrt(rng.random())
            off = r * (math.cos(phi) * e1 + math.sin(phi) * e2)
            q = center + rho * (math.sqrt(max(0.0, 1.0 - r * r)) * v + off)
        return q if scene.start_is_valid(q, v, rho) else None
    raise ValueError(f"unknown start mode {start[0]!r}")


def _paths_ctx(p, rho, start, law, xi_max):
    return (ScattererScene(p), rho, start, law, xi_max)


def _paths_chunk(ctx, rng, count):
    scene, rho, start, law, xi_max = ctx
    horizon = xi_max * rho ** (1 - scene.dim)
    out = np.empty(count, dtype=_PATH_DTYPE)
    resampled = 0
    for k in range(count):
        for attempt in range(10_000):
            v = _draw_direction(rng, law, scene.dim)
            q = _draw_start(scene, rng, rho, start, v)
            if q is None:
                resampled += 1
                continue
            hit = scene.first_hit(q, v, rho, horizon)
            if hit is not None and scene.hit_near_overlap(hit, rho):
                resampled += 1
                continue
            break
        else:
            raise RuntimeError(
                "start draw rejected 10000 times; the start point is "
                "likely inside a scatterer for every direction"
            )
        if hit is None:
            out[k] = (xi_max, -1, -1, math.nan, True)
        else:
            out[k] = (
                rho ** (scene.dim - 1) * hit.t,
                hit.psi[0],
                hit.psi[1],
                hit.w,
                False,
            )
    return out, resampled


def sample_path_lengths(
    p: Presentation,
    rho: float,
    n: int,
    seed: int,
    *,
    start=("uniform-cell",),
    direction=("uniform",),
    xi_max: float = 1e4,
    workers: int = 1,
):
    """n rescaled free path samples (xi, mark, impact w, censored).

    Samples whose start draw lands inside a scatterer, or whose
    collision point falls within the overlap tolerance of two
    boundaries, are discarded and redrawn; the number of such redraws
    is returned alongside the samples.  Deterministic in (seed, n).
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    label = f"paths|rho={rho!r}|{start[0]}|{direction[0]}"
    parts = run_chunked(
        _paths_chunk,
        _paths_ctx,
        (p, rho, tuple(start), tuple(direction), xi_max),
        n,
        seed,
        label,
        workers,
    )
    samples = np.concatenate([s for s, _ in parts])
    resampled = sum(r for _, r in parts)
    return samples, resampled

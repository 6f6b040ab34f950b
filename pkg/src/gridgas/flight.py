"""The limiting random flight process between collisions (d = 2).

Collision events carry an inter-collision length xi, the mark psi of
the grid the scatterer belongs to, and the collision parameter w (for
hard-disk scattering the exit parameter equals the impact parameter).
The first leg is drawn around a generic point; subsequent legs are
drawn around the previous scatterer, i.e. from the mark-conditioned
configuration shifted transversally by the exit parameter.  A merged
variant composes class-local transitions with fresh class-local initial
draws and keeps the shortest leg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gridalg import GridError, Presentation
from .homspace import first_passage, random_configuration
from .streams import run_chunked

__all__ = [
    "FlightEvent",
    "exit_parameter",
    "scatter",
    "sample_initial",
    "sample_transition",
    "merged_transition",
    "run_flight",
    "run_trajectories",
    "initial_batch",
    "transition_batch",
]


@dataclass
class FlightEvent:
    """One collision: leg length xi, scatterer mark psi, collision
    parameter w, outgoing unit velocity v (lab frame).  A censored
    event has xi = xi_max, no mark, w = nan and the incoming velocity.
    """

    xi: float
    psi: Optional[tuple]
    w: float
    v: tuple
    censored: bool


def exit_parameter(v_in, w: float) -> float:
    """Exit parameter of a hard-disk collision with impact parameter w.

    For specular reflection off a disk the outgoing ray passes the
    center at the same signed offset as the incoming one, so this is
    the identity in w (the incoming direction only fixes the frame).

    >>> exit_parameter((1.0, 0.0), 0.25)
    0.25
    """
    if not -1.0 <= w <= 1.0:
        raise ValueError("collision parameter must lie in [-1, 1]")
    return w


def scatter(v, w: float):
    """Outgoing unit velocity after a hard-disk collision.

    In the frame of the incoming velocity the outgoing direction is
    (2w^2 - 1, 2w*sqrt(1 - w^2)); head-on (w = 0) reverses, grazing
    (|w| -> 1) goes straight.

    >>> scatter((1.0, 0.0), 0.0)
    (-1.0, 0.0)
    """
    vx, vy = float(v[0]), float(v[1])
    norm = math.hypot(vx, vy)
    if norm == 0.0:
        raise ValueError("zero incoming velocity")
    vx /= norm
    vy /= norm
    c = 2.0 * w * w - 1.0
    s = 2.0 * w * math.sqrt(max(0.0, 1.0 - w * w))
    ox = c * vx - s * vy
    oy = c * vy + s * vx
    n = math.hypot(ox, oy)
    return (ox / n, oy / n)


def _event_from_hit(hit, xi_max, v_in):
    if hit is None:
        return FlightEvent(xi_max, None, math.nan, tuple(v_in), True)
    xi, y_rel, j, i = hit
    # The ray passes the new center at signed offset -y_rel in its own
    # frame: the impact parameter flips the transverse coordinate.
    w = -y_rel
    return FlightEvent(xi, (j, i), w, scatter(v_in, w), False)


def sample_initial(
    p: Presentation, rng, xi_max: float = 1e6, v_in=(1.0, 0.0)
) -> FlightEvent:
    """First leg: free path from a generic point of the union."""
    conf = random_configuration(p, ("generic",), rng)
    return _event_from_hit(first_passage(conf, xi_max), xi_max, v_in)


def sample_transition(
    p: Presentation, psi_prev, w_prev: float, rng, xi_max: float = 1e6,
    v_in=(1.0, 0.0),
) -> FlightEvent:
    """Leg from a collision on grid psi_prev with exit parameter w_prev.

    The configuration is conditioned on the previous scatterer (mark
    mode) and the outgoing ray runs at transverse offset w_prev from
    it, so the strip is shifted by w_prev.
    """
    conf = random_configuration(p, ("mark", tuple(psi_prev)), rng)
    return _event_from_hit(first_passage(conf, xi_max, shift=w_prev), xi_max, v_in)


def merged_transition(
    p: Presentation, psi_prev, w_prev: float, rng, xi_max: float = 1e6,
    v_in=(1.0, 0.0),
) -> FlightEvent:
    """Transition composed class by class: the previous scatterer's
    class evolves by its own class-local transition law, every other
    class restarts with a fresh class-local initial draw, and the
    shortest leg wins.  Distributionally this matches the direct
    transition sampler when classes decouple."""
    psi_prev = tuple(psi_prev)
    j_prev = psi_prev[0]
    best = None
    for j in range(p.n_classes):
        sub = p.restricted_to_class(j)
        if j == j_prev:
            conf = random_configuration(sub, ("mark", (0, psi_prev[1])), rng)
            hit = first_passage(conf, xi_max, shift=w_prev)
        else:
            conf = random_configuration(sub, ("generic",), rng)
            hit = first_passage(conf, xi_max)
        if hit is not None:
            xi, y_rel, _, i = hit
            if best is None or xi < best[0]:
                best = (xi, y_rel, j, i)
    return _event_from_hit(best, xi_max, v_in)


def run_flight(
    p: Presentation,
    n_events: int,
    rng,
    xi_max: float = 1e6,
    v0=(1.0, 0.0),
    q0=(0.0, 0.0),
):
    """Run one flight chain of up to n_events collisions.

    Returns (events, positions) with positions[k] the location of the
    k-th collision (positions[0] = q0); Q_k = Q_{k-1} + xi_k * V_{k-1},
    V_k the outgoing velocity of event k.  A censored leg ends the
    chain.  Velocities compose in the frame of the incoming velocity,
    so rotating v0 rotates the whole path while (xi, psi, w) streams
    are unchanged for the same rng.
    """
    if n_events <= 0:
        raise ValueError("n_events must be positive")
    norm = math.hypot(float(v0[0]), float(v0[1]))
    v_prev = (float(v0[0]) / norm, float(v0[1]) / norm)
    positions = [np.array(q0, dtype=float)]
    events = []
    ev = sample_initial(p, rng, xi_max, v_in=v_prev)
    while True:
        positions.append(positions[-1] + ev.xi * np.array(v_prev))
        events.append(ev)
        if ev.censored or len(events) >= n_events:
            break
        v_prev = ev.v
        ev = sample_transition(p, ev.psi, ev.w, rng, xi_max, v_in=v_prev)
    return events, np.array(positions)


# ----------------------------------------------------------------------
# Deterministic batch runners (chunked streams, worker-count invariant).


def _flight_ctx(p, n_events, xi_max, v0, q0):
    return (p, n_events, xi_max, v0, q0)


def _traj_chunk(ctx, rng, count):
    p, n_events, xi_max, v0, q0 = ctx
    out = []
    for _ in range(count):
        out.append(run_flight(p, n_events, rng, xi_max, v0, q0))
    return out


def run_trajectories(
    p: Presentation,
    n_traj: int,
    n_events: int,
    seed: int,
    *,
    xi_max: float = 1e6,
    v0=(1.0, 0.0),
    q0=(0.0, 0.0),
    workers: int = 1,
):
    """Run n_traj independent flight chains; returns a list of
    (events, positions) pairs, deterministic in (seed, n_traj)."""
    parts = run_chunked(
        _traj_chunk,
        _flight_ctx,
        (p, n_events, xi_max, tuple(v0), tuple(q0)),
        n_traj,
        seed,
        f"flight|events={n_events}",
        workers,
        chunk_size=1,
    )
    return [traj for part in parts for traj in part]


_BATCH_DTYPE = np.dtype(
    [
        ("xi", np.float64),
        ("mark_j", np.int64),
        ("mark_i", np.int64),
        ("w", np.float64),
        ("censored", np.bool_),
    ]
)


def _pack_event(row, ev):
    row["xi"] = ev.xi
    row["mark_j"] = -1 if ev.psi is None else ev.psi[0]
    row["mark_i"] = -1 if ev.psi is None else ev.psi[1]
    row["w"] = ev.w
    row["censored"] = ev.censored


def _initial_ctx(p, xi_max):
    return (p, xi_max)


def _initial_chunk(ctx, rng, count):
    p, xi_max = ctx
    out = np.empty(count, dtype=_BATCH_DTYPE)
    for k in range(count):
        _pack_event(out[k], sample_initial(p, rng, xi_max))
    return out


def initial_batch(
    p: Presentation, n: int, seed: int, *, xi_max: float = 1e6, workers: int = 1
) -> np.ndarray:
    """n independent first legs as a structured array."""
    parts = run_chunked(
        _initial_chunk, _initial_ctx, (p, xi_max), n, seed, "flight|initial", workers
    )
    return np.concatenate(parts)


def _transition_ctx(p, source, merged, xi_max):
    marks = p.marks()
    weights = np.array([p.weight(psi) for psi in marks])
    weights = weights / weights.sum()
    return (p, source, merged, xi_max, marks, weights)


def _transition_chunk(ctx, rng, count):
    p, source, merged, xi_max, marks, weights = ctx
    out = np.empty(count, dtype=_BATCH_DTYPE)
    draw = merged_transition if merged else sample_transition
    for k in range(count):
        if source[0] == "stationary":
            # Stationary collision state: exit parameter uniform on
            # (-1, 1), mark by relative density.
            w_prev = rng.uniform(-1.0, 1.0)
            psi_prev = marks[int(rng.choice(len(marks), p=weights))]
        else:
            _, psi_prev, w_prev = source
        _pack_event(out[k], draw(p, psi_prev, w_prev, rng, xi_max))
    return out


def transition_batch(
    p: Presentation,
    n: int,
    seed: int,
    *,
    source=("stationary",),
    merged: bool = False,
    xi_max: float = 1e6,
    workers: int = 1,
) -> np.ndarray:
    """n independent transition legs as a structured array.

    source is ("stationary",) for the uniform x density-weighted
    collision state, or ("fixed", psi, w) to hold the previous
    collision fixed.
    """
    source = tuple(source)
    if source[0] == "fixed":
        source = ("fixed", tuple(source[1]), float(source[2]))
        if source[1] not in set(p.marks()):
            raise GridError(f"unknown mark {source[1]}")
    elif source[0] != "stationary":
        raise ValueError(f"unknown source {source[0]!r}")
    label = f"flight|transition|{source}|merged={merged}"
    parts = run_chunked(
        _transition_chunk,
        _transition_ctx,
        (p, source, merged, xi_max),
        n,
        seed,
        label,
        workers,
    )
    return np.concatenate(parts)

"""The limiting flight process: scattering maps, leg samplers, chains."""

import math

import numpy as np
import pytest

from gridgas.flight import (
    FlightEvent,
    exit_parameter,
    initial_batch,
    merged_transition,
    run_flight,
    run_trajectories,
    sample_initial,
    sample_transition,
    scatter,
    transition_batch,
)
from gridgas.gridalg import GridError
from gridgas.homspace import TailEstimate, isotonic_nonincreasing, tail_estimate
from gridgas.labcli import ks_two_sample, ks_uniform, loglog_slope


def batch_equal(a, b):
    return all(
        np.array_equal(a[f], b[f]) for f in ("xi", "mark_j", "mark_i", "censored")
    ) and np.array_equal(a["w"], b["w"], equal_nan=True)


# ----------------------------------------------------------------------
# Scattering maps.


def test_exit_parameter_is_identity():
    assert exit_parameter((1.0, 0.0), 0.25) == 0.25
    assert exit_parameter((0.0, 1.0), -1.0) == -1.0
    with pytest.raises(ValueError, match="collision parameter"):
        exit_parameter((1.0, 0.0), 1.1)


def test_scatter_identities():
    assert scatter((1.0, 0.0), 0.0) == (-1.0, 0.0)  # head-on reverses
    s = math.sqrt(0.5)
    assert scatter((1.0, 0.0), s) == pytest.approx((0.0, 1.0))
    assert scatter((1.0, 0.0), -s) == pytest.approx((0.0, -1.0))
    assert scatter((0.3, 0.4), 1.0) == pytest.approx((0.6, 0.8))  # grazing
    with pytest.raises(ValueError, match="zero incoming"):
        scatter((0.0, 0.0), 0.5)


def test_scatter_angle_and_covariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        w = float(rng.uniform(-1.0, 1.0))
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        v = (math.cos(th), math.sin(th))
        out = np.array(scatter(v, w))
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12
        # Deflection depends on w only: cos(angle) = 2 w^2 - 1.
        assert float(np.dot(v, out)) == pytest.approx(2.0 * w * w - 1.0, abs=1e-12)
        # Rotating the incoming frame rotates the outgoing one.
        c, s = math.cos(0.7), math.sin(0.7)
        R = np.array([[c, -s], [s, c]])
        assert np.allclose(scatter(R @ v, w), R @ out, atol=1e-12)


# ----------------------------------------------------------------------
# Single legs.


def test_sample_initial_event(z2):
    rng = np.random.default_rng(2)
    ev = sample_initial(z2, rng, xi_max=100.0)
    assert isinstance(ev, FlightEvent)
    assert not ev.censored
    assert ev.xi > 0.0 and ev.psi == (0, 0) and abs(ev.w) <= 1.0
    assert ev.v == pytest.approx(scatter((1.0, 0.0), ev.w))


def test_censored_event_shape(z2):
    batch = initial_batch(z2, 300, 21, xi_max=0.5)
    cen = batch["censored"]
    assert cen.any() and not cen.all()
    assert np.all(batch["xi"][cen] == 0.5)
    assert np.all(batch["mark_j"][cen] == -1)
    assert np.all(np.isnan(batch["w"][cen]))


def test_initial_batch_matches_homspace_tail(z2):
    batch = initial_batch(z2, 10000, 22, xi_max=50.0)
    ref = tail_estimate(z2, [0.5, 1.0, 2.0], 20000, seed=7)
    emp = np.array([(batch["xi"] > x).mean() for x in ref.xi])
    sigma = np.sqrt(ref.stderr**2 + emp * (1.0 - emp) / len(batch))
    assert np.all(np.abs(emp - ref.F_raw) <= 4.0 * sigma + 0.005)


def test_small_leg_collision_parameter_uniform(z2):
    # As xi -> 0 the joint leg density flattens in w, so conditioning
    # on short legs leaves w nearly uniform on (-1, 1).
    batch = initial_batch(z2, 20000, 13, xi_max=60.0)
    w = batch["w"][(~batch["censored"]) & (batch["xi"] < 0.1)]
    assert len(w) > 2000
    stat, thresh = ks_uniform((w + 1.0) / 2.0)
    assert stat < thresh


def test_transition_truncated_mean_single_grid(z2):
    # Renewal identity: E[min(xi, T)] over transitions equals
    # (1 - F_generic(T)) / (nbar * V1) with nbar = 1.
    tr = transition_batch(z2, 4000, 14, xi_max=100.0)
    A = float(np.minimum(tr["xi"], 8.0).mean())
    tail = tail_estimate(z2, [8.0], 20000, seed=7)
    B = float(1.0 - tail.F_raw[0]) / 2.0
    assert A == pytest.approx(B, abs=0.04)


def test_transition_truncated_mean_union(z2m2):
    # Same identity at nbar = 2; the truncation correction is tiny, so
    # both sides sit near the mean free path 1/4.
    tr = transition_batch(z2m2, 4000, 15, xi_max=100.0)
    A = float(np.minimum(tr["xi"], 8.0).mean())
    tail = tail_estimate(z2m2, [8.0], 20000, seed=8)
    B = float(1.0 - tail.F_raw[0]) / 4.0
    assert A == pytest.approx(B, abs=0.02)
    assert B == pytest.approx(0.25, abs=0.01)


def test_transition_source_validation(z2m2):
    with pytest.raises(GridError, match="unknown mark"):
        transition_batch(z2m2, 4, 1, source=("fixed", (5, 5), 0.0))
    with pytest.raises(ValueError, match="unknown source"):
        transition_batch(z2m2, 4, 1, source=("somewhere",))
    fixed = transition_batch(z2m2, 200, 1, source=("fixed", (1, 0), 0.3))
    assert not fixed["censored"].all()
    assert np.all(np.abs(fixed["w"][~fixed["censored"]]) <= 1.0)


# ----------------------------------------------------------------------
# Merged transitions.


def test_merged_equals_direct_for_single_class(z2):
    # With one class the merged sampler reduces to the direct one and
    # consumes the identical random stream.
    for seed in (99, 100, 101):
        e1 = sample_transition(z2, (0, 0), 0.3, np.random.default_rng(seed), 50.0)
        e2 = merged_transition(z2, (0, 0), 0.3, np.random.default_rng(seed), 50.0)
        assert (e1.xi, e1.psi, e1.w) == (e2.xi, e2.psi, e2.w)


def test_merged_matches_direct_in_law(z2m2):
    merged = transition_batch(z2m2, 3000, 16, merged=True)
    direct = transition_batch(z2m2, 3000, 17, merged=False)
    stat, thresh = ks_two_sample(merged["xi"], direct["xi"])
    assert stat < thresh
    stat, thresh = ks_two_sample(
        merged["w"][~merged["censored"]], direct["w"][~direct["censored"]]
    )
    assert stat < thresh
    f1 = (merged["mark_j"] == 0).mean()
    f2 = (direct["mark_j"] == 0).mean()
    assert abs(f1 - f2) < 0.05


# ----------------------------------------------------------------------
# Chains.


def test_run_flight_geometry(z2m2):
    rng = np.random.default_rng(33)
    events, pos = run_flight(z2m2, 6, rng, xi_max=50.0)
    assert len(pos) == len(events) + 1
    v_prev = np.array([1.0, 0.0])
    for k, ev in enumerate(events):
        leg = pos[k + 1] - pos[k]
        assert np.linalg.norm(leg) == pytest.approx(ev.xi, abs=1e-9)
        assert np.allclose(leg, ev.xi * v_prev, atol=1e-9)
        v_prev = np.array(ev.v)
    if events[-1].censored:
        assert len(events) <= 6
    else:
        assert len(events) == 6
    with pytest.raises(ValueError, match="n_events"):
        run_flight(z2m2, 0, rng)


def test_run_flight_rotational_covariance(z2m2):
    ev1, pos1 = run_flight(z2m2, 5, np.random.default_rng(7), 50.0, v0=(1.0, 0.0))
    ev2, pos2 = run_flight(z2m2, 5, np.random.default_rng(7), 50.0, v0=(0.0, 1.0))
    assert [e.xi for e in ev1] == [e.xi for e in ev2]
    assert [e.w for e in ev1] == [e.w for e in ev2]
    assert [e.psi for e in ev1] == [e.psi for e in ev2]
    R = np.array([[0.0, -1.0], [1.0, 0.0]])  # v0 rotated by 90 degrees
    assert np.allclose(pos2, pos1 @ R.T, atol=1e-9)


def test_run_trajectories_worker_invariant(z2m2):
    a = run_trajectories(z2m2, 8, 4, 3, xi_max=50.0, workers=1)
    b = run_trajectories(z2m2, 8, 4, 3, xi_max=50.0, workers=3)
    assert len(a) == len(b) == 8
    for (ea, pa), (eb, pb) in zip(a, b):
        assert [x.xi for x in ea] == [x.xi for x in eb]
        assert np.array_equal(pa, pb)


def test_batch_worker_invariance(z2m2):
    a = initial_batch(z2m2, 2000, 5, workers=1)
    b = initial_batch(z2m2, 2000, 5, workers=2)
    assert batch_equal(a, b)
    c = transition_batch(z2m2, 1000, 5, workers=1)
    d = transition_batch(z2m2, 1000, 5, workers=2)
    assert batch_equal(c, d)


# ----------------------------------------------------------------------
# Tail exponent smoke test (the tight version is in acceptance).


def test_initial_tail_slope_single_class(z2):
    batch = initial_batch(z2, 25000, 13, xi_max=60.0)
    xs = np.array([2.5, 5.0, 10.0, 20.0])
    surv = np.array([(batch["xi"] > x).mean() for x in xs])
    se = np.sqrt(surv * (1.0 - surv) / len(batch))
    t = TailEstimate(xs, surv, isotonic_nonincreasing(surv), se, len(batch), "emp")
    slope, _ = loglog_slope(t, (2.5, 20.0))
    assert slope == pytest.approx(-1.0, abs=0.25)

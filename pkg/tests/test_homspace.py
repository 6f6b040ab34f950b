"""Homogeneous-space sampling and cylinder statistics.

The statistical tests run at small n with generous z windows; the tight
versions live in test_acceptance.py.  Deterministic identities (identity
configurations, synthetic tail objects) are asserted exactly.
"""

import math

import numpy as np
import pytest

from gridgas.gridalg import GridError, torus_components
from gridgas.homspace import (
    TailEstimate,
    V1,
    count_in_cylinder,
    explicit_configuration,
    first_passage,
    haar_sl2,
    isotonic_nonincreasing,
    phi_from_tail,
    product_tail,
    random_configuration,
    region_volume,
    sample_torus,
    siegel_check,
    tail_estimate,
)
from gridgas.labcli import ks_uniform

HERMITE_2D = (4.0 / 3.0) ** 0.25


def lagrange_shortest(B):
    """Length of a shortest nonzero vector of the row lattice of B."""
    b1, b2 = np.array(B[0], dtype=float), np.array(B[1], dtype=float)
    if b1 @ b1 > b2 @ b2:
        b1, b2 = b2, b1
    while True:
        mu = round(float(b1 @ b2) / float(b1 @ b1))
        b2 = b2 - mu * b1
        if b2 @ b2 >= b1 @ b1:
            return math.sqrt(float(b1 @ b1))
        b1, b2 = b2, b1


def brute_count_strip(conf, xi, shift=0.0):
    """Dense-enumeration oracle for count_in_cylinder.

    Maps the strip corners back through each member's affine map to get
    an integer search box, then applies the strict inequalities to every
    candidate point.
    """
    total = 0
    corners = [(x, y) for x in (0.0, xi) for y in (shift - 1.0, shift + 1.0)]
    for _, _, cx, cy, ox, oy, _ in conf.member_geometry():
        M = np.array([[cx[0], cx[1]], [cy[0], cy[1]]], dtype=float)
        Minv = np.linalg.inv(M)
        pre = np.array([Minv @ (np.array(p) - (ox, oy)) for p in corners])
        lo = np.floor(pre.min(axis=0)).astype(int) - 1
        hi = np.ceil(pre.max(axis=0)).astype(int) + 1
        m0, m1 = np.meshgrid(
            np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij"
        )
        x = m0 * cx[0] + m1 * cx[1] + ox
        y = m0 * cy[0] + m1 * cy[1] + oy
        keep = (x > 0.0) & (x < xi) & (y > shift - 1.0) & (y < shift + 1.0)
        total += int(np.count_nonzero(keep))
    return total


# ----------------------------------------------------------------------
# Haar sampling on SL(2, R).


def test_haar_sl2_unimodular():
    rng = np.random.default_rng(5)
    M = haar_sl2(rng)
    assert M.shape == (2, 2)
    batch = haar_sl2(rng, 500)
    assert batch.shape == (500, 2, 2)
    dets = np.linalg.det(batch)
    assert np.max(np.abs(dets - 1.0)) < 1e-11


def test_haar_sl2_reproducible():
    a = haar_sl2(np.random.default_rng(42), 64)
    b = haar_sl2(np.random.default_rng(42), 64)
    c = haar_sl2(np.random.default_rng(43), 64)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_haar_sl2_first_row_realizes_hermite_bound():
    # The sampler's fundamental-domain construction puts the shortest
    # basis vector in the first row, so |row 0| <= (4/3)^(1/4) always.
    batch = haar_sl2(np.random.default_rng(9), 2000)
    row0 = np.linalg.norm(batch[:, 0, :], axis=1)
    assert np.max(row0) <= HERMITE_2D + 1e-9
    for M in batch[:50]:
        lam1 = lagrange_shortest(M)
        assert lam1 <= HERMITE_2D + 1e-9
        assert lam1 <= np.linalg.norm(M[0]) + 1e-9


# ----------------------------------------------------------------------
# Torus sampling.


def test_sample_torus_mark_dirac(z2):
    tcs = torus_components(z2, 0, ("mark", (0, 0)))
    rng = np.random.default_rng(0)
    for _ in range(10):
        U = sample_torus(tcs, rng)
        assert U.shape == (1, 2)
        assert np.all(U == 0.0)


def test_sample_torus_marked_row_pinned(adm_pair):
    tcs = torus_components(adm_pair, 0, ("mark", (0, 1)))
    assert tcs.mark_row == 1
    rng = np.random.default_rng(3)
    free = []
    for _ in range(400):
        U = sample_torus(tcs, rng)
        assert U.shape == (2, 2)
        assert np.all(U[1] == 0.0)
        free.append(U[0])
    free = np.array(free)
    assert np.all((free >= 0.0) & (free < 1.0))
    # The unmarked row fills its full torus uniformly.
    for k in range(2):
        stat, thresh = ks_uniform(free[:, k])
        assert stat < thresh


def test_sample_torus_generic_uniform(z2):
    tcs = torus_components(z2, 0, ("generic",))
    rng = np.random.default_rng(4)
    U = np.array([sample_torus(tcs, rng)[0] for _ in range(500)])
    for k in range(2):
        stat, thresh = ks_uniform(U[:, k])
        assert stat < thresh


# ----------------------------------------------------------------------
# Random configurations.


def test_random_configuration_invariants(z2m2):
    rng = np.random.default_rng(8)
    for _ in range(25):
        conf = random_configuration(z2m2, ("generic",), rng)
        assert len(conf.B) == len(conf.U) == len(conf.comp) == 2
        for j in range(2):
            assert abs(np.linalg.det(conf.B[j]) - 1.0) < 1e-11
            assert conf.U[j].shape == (1, 2)
            assert 0 <= conf.comp[j] < conf.payload.classes[j].n_components
        assert conf.mode == ("generic",)
        assert conf.mark is None


def test_random_configuration_mark_payload(adm_pair):
    rng = np.random.default_rng(8)
    conf = random_configuration(adm_pair, ("mark", (0, 1)), rng)
    assert conf.mark == (0, 1)
    assert np.all(conf.U[0][1] == 0.0)
    geom = list(conf.member_geometry())
    assert [g[:2] for g in geom] == [(0, 0), (0, 1)]
    assert geom[1][-1] is True and geom[0][-1] is False


# ----------------------------------------------------------------------
# Cylinder counting.


def test_count_identity_examples(z2):
    conf = explicit_configuration(z2, ("generic",))
    # Z^2 in the open strip (0, xi) x (-1, 1): the points (1,0)..(k,0).
    assert count_in_cylinder(conf, 3.5) == 3
    assert count_in_cylinder(conf, 3.0) == 2  # x = 3 excluded, strip open
    assert count_in_cylinder(conf, 0.5) == 0
    # Shifted strip (-0.5, 1.5) picks up the y = 1 row as well.
    assert count_in_cylinder(conf, 3.5, shift=0.5) == 6


def test_count_matches_dense_enumeration(union3):
    rng = np.random.default_rng(17)
    for _ in range(20):
        conf = random_configuration(union3, ("generic",), rng)
        for xi in (0.8, 2.3):
            for shift in (0.0, 0.7):
                got = count_in_cylinder(conf, xi, shift)
                assert got == brute_count_strip(conf, xi, shift)


def test_first_passage_identity(z2):
    conf = explicit_configuration(z2, ("generic",))
    assert first_passage(conf, 5.0) == (1.0, 0.0, 0, 0)
    # Strip stays open at xi_max: the hit at x = 1 needs xi_max > 1.
    assert first_passage(conf, 0.9) is None
    assert first_passage(conf, 1.0) is None
    # Shift 1.0 rides the y = 1 row; y_rel is measured from the axis.
    assert first_passage(conf, 5.0, shift=1.0) == (1.0, 0.0, 0, 0)


def test_first_passage_agrees_with_count(z2m2):
    rng = np.random.default_rng(23)
    for _ in range(30):
        conf = random_configuration(z2m2, ("generic",), rng)
        hit = first_passage(conf, 8.0)
        if hit is None:
            assert count_in_cylinder(conf, 8.0) == 0
            continue
        xi, y_rel, j, i = hit
        assert 0.0 < xi < 8.0
        assert abs(y_rel) < 1.0
        assert (j, i) in {(0, 0), (1, 0)}
        # Probe a hair inside and outside the hit rather than at the
        # exact float, where the two strictness expressions can round
        # in opposite directions.
        assert count_in_cylinder(conf, xi * (1.0 - 1e-9) - 1e-12) == 0
        assert count_in_cylinder(conf, xi * (1.0 + 1e-9) + 1e-12) >= 1


# ----------------------------------------------------------------------
# Tail estimation.


def test_tail_estimate_anchor_and_monotone(z2):
    t = tail_estimate(z2, [0.05, 0.5, 1.0, 2.0, 4.0], 20000, seed=7)
    assert np.all(np.diff(t.F_raw) <= 0.0)
    assert np.array_equal(t.F_iso, t.F_raw)
    # Mean count in the strip at xi = 0.05 is exactly 0.1 (density *
    # area), so F(0.05) >= 0.9 up to Monte Carlo error.
    assert t.F_raw[0] >= 0.9 - 3.0 * t.stderr[0]
    assert t.F_raw[0] <= 0.92
    assert np.allclose(t.stderr, np.sqrt(t.F_raw * (1.0 - t.F_raw) / t.n))
    assert t.n == 20000 and t.mode == "generic" and t.scope is None
    rows = list(t.rows())
    assert len(rows) == 5 and rows[0][0] == 0.05 and rows[0][4] == 20000


def test_tail_estimate_worker_invariance(z2):
    grid = [0.5, 1.0, 2.0]
    a = tail_estimate(z2, grid, 4000, seed=11, workers=1)
    b = tail_estimate(z2, grid, 4000, seed=11, workers=3)
    assert np.array_equal(a.F_raw, b.F_raw)


def test_tail_estimate_grid_validation(z2):
    with pytest.raises(ValueError, match="strictly increasing"):
        tail_estimate(z2, [1.0, 0.5], 10)
    with pytest.raises(ValueError, match="strictly increasing"):
        tail_estimate(z2, [0.0, 1.0], 10)
    with pytest.raises(ValueError, match="strictly increasing"):
        tail_estimate(z2, [], 10)


def test_tail_estimate_scope(z2m2):
    grid = [0.5, 1.0, 2.0]
    single = tail_estimate(z2m2, grid, 3000, scope=0, seed=2)
    union = tail_estimate(z2m2, grid, 3000, seed=3)
    assert single.scope == 0 and union.scope is None
    # One class has half the density of the union, so its tail is
    # pointwise heavier by a wide statistical margin.
    assert np.all(single.F_raw > union.F_raw)


def test_tail_estimate_scope_mark_mismatch(z2m2):
    with pytest.raises(GridError, match="mark the scoped class"):
        tail_estimate(z2m2, [1.0], 10, scope=1, mode=("mark", (0, 0)))
    t = tail_estimate(z2m2, [1.0], 200, scope=1, mode=("mark", (1, 0)), seed=1)
    assert t.scope == 1 and t.mode == "mark:0,0"


def test_product_tail_synthetic():
    grid = np.array([1.0, 2.0])
    t1 = TailEstimate(
        grid, np.array([0.8, 0.5]), np.array([0.8, 0.5]),
        np.array([0.01, 0.02]), 100, "generic", 0.0, 0,
    )
    t2 = TailEstimate(
        grid, np.array([0.9, 0.6]), np.array([0.9, 0.6]),
        np.array([0.005, 0.01]), 50, "generic", 0.0, 1,
    )
    prod = product_tail([t1, t2])
    assert np.allclose(prod.F_raw, [0.72, 0.30])
    expect = np.sqrt(
        (np.array([0.01, 0.02]) * [0.9, 0.6]) ** 2
        + (np.array([0.005, 0.01]) * [0.8, 0.5]) ** 2
    )
    assert np.allclose(prod.stderr, expect)
    assert prod.n == 50 and prod.mode == "product" and prod.scope is None

    t3 = TailEstimate(
        np.array([1.0, 3.0]), np.array([0.9, 0.6]), np.array([0.9, 0.6]),
        np.array([0.005, 0.01]), 50, "generic", 0.0, 1,
    )
    with pytest.raises(ValueError, match="identical xi grids"):
        product_tail([t1, t3])
    with pytest.raises(ValueError, match="no estimates"):
        product_tail([])


def test_product_tail_matches_direct_union(z2m2):
    grid = [0.5, 1.0, 2.0]
    parts = [
        tail_estimate(z2m2, grid, 4000, scope=c, seed=40 + c) for c in (0, 1)
    ]
    prod = product_tail(parts)
    direct = tail_estimate(z2m2, grid, 4000, seed=50)
    sigma = np.sqrt(prod.stderr**2 + direct.stderr**2)
    assert np.all(np.abs(prod.F_raw - direct.F_raw) <= 3.0 * sigma + 0.01)


def test_phi_from_tail_synthetic():
    grid = np.array([1.0, 2.0, 4.0])
    F = np.array([0.8, 0.6, 0.5])
    t = TailEstimate(grid, F, F, np.zeros(3), 400, "generic", 0.0, None)
    d = phi_from_tail(t, nbar=1.0)
    assert np.allclose(d.xi, [1.5, 3.0])
    assert np.allclose(d.phi, [0.2, 0.05])
    assert np.allclose(
        d.stderr,
        [math.sqrt(0.2 * 0.8 / 400) / 1.0, math.sqrt(0.1 * 0.9 / 400) / 2.0],
    )
    # The a priori density cap nbar * V1 clips the first midpoint.
    capped = phi_from_tail(t, nbar=0.05)
    assert np.allclose(capped.phi, [0.05 * V1, 0.05])
    with pytest.raises(ValueError, match="two grid points"):
        phi_from_tail(
            TailEstimate(grid[:1], F[:1], F[:1], np.zeros(1), 400, "g", 0.0, None),
            nbar=1.0,
        )


def test_isotonic_nonincreasing_pools_violators():
    assert np.allclose(isotonic_nonincreasing([1.0, 2.0]), [1.5, 1.5])
    assert np.allclose(isotonic_nonincreasing([3.0, 1.0, 2.0]), [3.0, 1.5, 1.5])
    y = [0.9, 0.5, 0.2]
    assert np.array_equal(isotonic_nonincreasing(y), y)
    fit = isotonic_nonincreasing([0.5, 0.9, 0.4, 0.8])
    assert np.all(np.diff(fit) <= 1e-15)
    assert abs(fit.sum() - 2.6) < 1e-12  # block means preserve the total


# ----------------------------------------------------------------------
# Siegel-type mean counts.


def test_region_volume_examples():
    assert region_volume(("box", 2.0, 5.0, 1.0, 3.0)) == 6.0
    assert region_volume(("ball", 0.0, 0.0, 0.5)) == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError, match="empty box"):
        region_volume(("box", 2.0, 2.0, 1.0, 3.0))
    with pytest.raises(ValueError, match="radius"):
        region_volume(("ball", 0.0, 0.0, 0.0))
    with pytest.raises(ValueError, match="unknown region"):
        region_volume(("disk", 0.0, 0.0, 1.0))


def test_siegel_generic_box(z2):
    rep = siegel_check(z2, (0, 0), ("box", 2.0, 5.0, 1.0, 3.0), 3000, seed=11)
    assert rep.predicted == 6.0
    assert rep.predicted_continuous == 6.0
    assert rep.atom == 0 and rep.volume == 6.0
    assert rep.n == 3000 and rep.psi == (0, 0) and rep.mode == "generic"
    assert abs(rep.z) < 4.0


def test_siegel_mark_ball_atom(z2):
    rep = siegel_check(
        z2, (0, 0), ("ball", 0.0, 0.0, 0.5), 3000, mode=("mark", (0, 0)), seed=11
    )
    assert rep.atom == 1
    assert rep.predicted_continuous == pytest.approx(math.pi / 4)
    assert rep.predicted == pytest.approx(1.0 + math.pi / 4)
    assert rep.mode == "mark:0,0"
    assert abs(rep.z) < 4.0
    # A ball away from the origin keeps the full count: no atom.
    off = siegel_check(
        z2, (0, 0), ("ball", 3.0, 0.0, 0.5), 1000, mode=("mark", (0, 0)), seed=11
    )
    assert off.atom == 0


def test_siegel_scaled_density(adm_pair):
    # Members of the doubled pair have density 1/4 each.
    rep = siegel_check(adm_pair, (0, 1), ("box", -2.0, 2.0, -1.0, 1.0), 2500, seed=6)
    assert rep.predicted_continuous == pytest.approx(0.25 * 8.0)
    assert abs(rep.z) < 4.0


def test_siegel_unknown_member(z2):
    with pytest.raises(GridError, match="not present"):
        siegel_check(z2, (5, 5), ("box", 0.0, 1.0, 0.0, 1.0), 10)


def test_siegel_worker_invariance(z2):
    a = siegel_check(z2, (0, 0), ("box", 0.0, 2.0, 0.0, 2.0), 2000, seed=3, workers=1)
    b = siegel_check(z2, (0, 0), ("box", 0.0, 2.0, 0.0, 2.0), 2000, seed=3, workers=2)
    assert a.mean == b.mean and a.stderr == b.stderr

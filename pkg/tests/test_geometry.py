import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kfplab.geometry import (
    Cylinder,
    CylinderShape,
    GalileanTransform,
    KineticPoint,
    Paraboloid,
    compose,
    covering_threshold,
    iterated_cylinder,
    iterated_radius,
    iterated_times,
    scale_point,
    unit_ball_volume,
    verify_covering,
)

coord = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def pt(x, v, t):
    return KineticPoint.of(x, v, t)


class TestTransforms:
    def test_identity_at_origin(self):
        t = GalileanTransform(KineticPoint.origin(1))
        z = pt(1.0, 2.0, 3.0)
        out = t.apply(z)
        assert out.isclose(z, tol=0.0)

    def test_direct_substitution(self):
        t = GalileanTransform(pt(0.0, 1.0, 0.0))
        out = t.apply(pt(0.0, 0.0, 1.0))
        assert out.isclose(pt(1.0, 1.0, 1.0), tol=0.0)

    def test_inverse_substitution(self):
        t = GalileanTransform(pt(0.0, 1.0, 0.0))
        out = t.apply_inverse(pt(1.0, 1.0, 1.0))
        assert out.isclose(pt(0.0, 0.0, 1.0), tol=0.0)

    def test_round_trip_batch(self):
        rng = np.random.default_rng(0)
        t = GalileanTransform(KineticPoint(rng.normal(size=2), rng.normal(size=2), 0.37))
        xs = rng.normal(size=(1000, 2))
        vs = rng.normal(size=(1000, 2))
        ts = rng.normal(size=1000)
        fx, fv, ft = t.apply_arrays(xs, vs, ts)
        bx, bv, bt = t.apply_inverse_arrays(fx, fv, ft)
        assert np.max(np.abs(bx - xs)) < 1e-12
        assert np.max(np.abs(bv - vs)) < 1e-12
        assert np.max(np.abs(bt - ts)) < 1e-12

    @given(coord, coord, coord, coord, coord, coord, coord, coord, coord)
    @settings(max_examples=60, deadline=None)
    def test_group_law(self, x0, v0, t0, x1, v1, t1, x, v, t):
        z0, z1, z = pt(x0, v0, t0), pt(x1, v1, t1), pt(x, v, t)
        left = GalileanTransform(z0).apply(GalileanTransform(z1).apply(z))
        right = GalileanTransform(compose(z0, z1)).apply(z)
        assert left.isclose(right, tol=1e-10)

    def test_dimension_mismatch(self):
        t = GalileanTransform(KineticPoint.origin(2))
        with pytest.raises(ValueError):
            t.apply(pt(1.0, 1.0, 0.0))


class TestScaling:
    def test_identity(self):
        z = pt(0.3, -0.7, 0.2)
        assert scale_point(1.0, z).isclose(z, tol=0.0)

    def test_direct_substitution(self):
        out = scale_point(2.0, pt(1.0, 1.0, 1.0))
        assert out.isclose(pt(8.0, 2.0, 4.0), tol=0.0)

    @given(coord, coord, coord, st.floats(min_value=0.1, max_value=5.0))
    @settings(max_examples=40, deadline=None)
    def test_inverse(self, x, v, t, r):
        z = pt(x, v, t)
        assert scale_point(r, scale_point(1.0 / r, z)).isclose(z, tol=1e-9)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            scale_point(0.0, pt(1.0, 1.0, 1.0))


class TestCylinders:
    def test_top_time_included(self):
        q = Cylinder(KineticPoint.origin(1), 1.0)
        assert q.contains(pt(0.0, 0.0, 0.0))

    def test_bottom_time_excluded(self):
        q = Cylinder(KineticPoint.origin(1), 1.0)
        assert not q.contains(pt(0.0, 0.0, -1.0))

    def test_slanting_term(self):
        v0, r = 0.8, 1.0
        q = Cylinder(pt(0.0, v0, 0.0), r)
        eps = 0.5 * r**3
        assert q.contains(pt(v0 * (-0.5) + eps, v0, -0.5))
        # without accounting for the slant this point is far from the centre
        assert not q.contains(pt(v0 * (-0.5) + eps + 2 * r**3, v0, -0.5))

    @given(coord, coord, st.floats(min_value=-3.9, max_value=0.0),
           st.floats(min_value=0.3, max_value=2.0))
    @settings(max_examples=80, deadline=None)
    def test_scaling_covariance(self, x, v, t, r):
        # membership is a.e. scale-covariant; skip samples grazing a boundary
        # where 1/r roundoff can legitimately flip the strict inequalities
        margin = min(abs(abs(x) - r**3), abs(abs(v) - r), abs(t + r**2), abs(t))
        assume(margin > 1e-7)
        q_r = Cylinder(KineticPoint.origin(1), r)
        q_1 = Cylinder(KineticPoint.origin(1), 1.0)
        z = pt(x, v, t)
        assert q_r.contains(z) == q_1.contains(scale_point(1.0 / r, z))

    def test_nesting(self):
        rng = np.random.default_rng(1)
        inner = Cylinder(KineticPoint.origin(1), 0.6)
        outer = Cylinder(KineticPoint.origin(1), 0.9)
        xs = rng.uniform(-1, 1, size=(500, 1))
        vs = rng.uniform(-1, 1, size=(500, 1))
        ts = rng.uniform(-1, 0, size=500)
        m_in = inner.contains_arrays(xs, vs, ts)
        m_out = outer.contains_arrays(xs, vs, ts)
        assert not np.any(m_in & ~m_out)

    def test_membership_matches_group_pullback(self):
        rng = np.random.default_rng(2)
        center = pt(0.4, -0.6, 0.8)
        q = Cylinder(center, 0.7)
        t = GalileanTransform(center)
        for _ in range(100):
            z = pt(rng.normal(), rng.normal(), rng.normal())
            pulled = t.apply_inverse(z)
            ref = Cylinder(KineticPoint.origin(1), 0.7).contains(pulled)
            assert q.contains(z) == ref

    def test_unit_measure_d1(self):
        assert Cylinder(KineticPoint.origin(1), 1.0).measure() == 4.0

    def test_cube_measure(self):
        q = Cylinder(KineticPoint.origin(2), 0.5, CylinderShape.CUBE)
        assert q.measure() == pytest.approx((2 * 0.125) ** 2 * 1.0**2 * 0.25)

    def test_transformed_carries_center(self):
        q = Cylinder(KineticPoint.origin(1), 1.0)
        moved = q.transformed(pt(1.0, 2.0, 3.0))
        assert moved.center.isclose(pt(1.0, 2.0, 3.0), tol=0.0)

    def test_invalid_radius(self):
        with pytest.raises(ValueError):
            Cylinder(KineticPoint.origin(1), 0.0)


class TestIteratedCylinders:
    def test_level_one(self):
        omega = 0.25
        assert iterated_radius(1, omega) == omega / 2.0
        assert iterated_times(1) == (0.0, 4.0)

    def test_level_two(self):
        assert iterated_radius(2, 0.25) == 0.25
        assert iterated_times(2)[1] == 20.0

    def test_level_three(self):
        # (4/3)(4^3 - 1) evaluated directly
        assert iterated_times(3)[1] == pytest.approx(4.0 / 3.0 * 63.0)

    def test_index_zero_rejected(self):
        with pytest.raises(ValueError):
            iterated_cylinder(0, 0.25)


def _sample_inner_paraboloid(rng, omega, n, s_max, d=1):
    """Points of the inner paraboloid with positive time component."""
    rho_max = (omega / 4.0) * math.sqrt(3.0 * s_max / 4.0 + 1.0)
    rho = rho_max * rng.uniform(0.05, 1.0, size=n)
    w = rng.normal(size=(n, d))
    w *= (rho * rng.uniform(size=n) ** (1.0 / d) / np.linalg.norm(w, axis=1))[:, None]
    y = rng.normal(size=(n, d))
    y *= (rho**3 * rng.uniform(size=n) ** (1.0 / d) / np.linalg.norm(y, axis=1))[:, None]
    rho_eff = np.maximum(np.linalg.norm(w, axis=1), np.cbrt(np.linalg.norm(y, axis=1)))
    lo = np.maximum((4.0 / 3.0) * ((16.0 / omega**2) * rho_eff**2 - 1.0), 1e-9)
    s = lo + (s_max - lo) * rng.uniform(size=n)
    keep = s > lo
    return y[keep], w[keep], s[keep]


class TestParaboloidSandwich:
    def test_inner_contained_in_union(self):
        omega = 0.25
        rng = np.random.default_rng(3)
        s_max = 80.0
        ys, ws, ss = _sample_inner_paraboloid(rng, omega, 4000, s_max)
        k_max = 1 + int(math.ceil(math.log(3.0 * s_max / 4.0 + 1.0, 4.0)))
        covered = np.zeros(ss.shape, dtype=bool)
        for k in range(1, k_max + 1):
            q = iterated_cylinder(k, omega)
            covered |= q.contains_arrays(ys, ws, ss)
        assert covered.all()

    def test_union_contained_in_outer(self):
        omega = 0.25
        rng = np.random.default_rng(4)
        outer = Paraboloid(+1, omega)
        for k in range(1, 7):
            rk = iterated_radius(k, omega)
            t_lo, t_hi = iterated_times(k)
            n = 600
            w = rng.uniform(-rk, rk, size=(n, 1))
            y = rng.uniform(-(rk**3), rk**3, size=(n, 1))
            s = rng.uniform(t_lo, t_hi, size=n)
            q = iterated_cylinder(k, omega)
            inside = q.contains_arrays(y, w, s)
            assert outer.contains_arrays(y[inside], w[inside], s[inside]).all()

    def test_scale_round_trip(self):
        p = Paraboloid(-1, 0.25, scale=0.3)
        assert p.contains([0.0], [0.0], 0.05)
        assert not p.contains([0.0], [0.2], 0.0)


class TestCovering:
    def test_sufficient_condition_has_no_counterexamples(self):
        rep = verify_covering(0.2, 1e-11, 0.1, omega=0.25, n_samples=3000, seed=7)
        assert rep.claim_b_hypothesis_met
        assert rep.verdict_a == "pass"
        assert rep.verdict_b == "pass"

    def test_hypothesis_unmet_reported(self):
        rep = verify_covering(0.5, 0.1, 0.1, omega=0.25, n_samples=50, seed=7)
        assert not rep.claim_b_hypothesis_met
        assert rep.verdict_b == "hypothesis unmet"
        assert rep.claim_b_checked == 0

    def test_threshold_formula(self):
        r = 0.01
        expected = r**2 + 64.0 / (3.0 * 0.25**2) * (4.0 * r) ** (1.0 / 3.0)
        assert covering_threshold(r, 0.25) == pytest.approx(expected, rel=1e-14)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            verify_covering(2.0, 0.1, 0.1, n_samples=10)
        with pytest.raises(ValueError):
            verify_covering(0.25, 0.6, 0.1, n_samples=10)  # R > sqrt(delta)
        with pytest.raises(ValueError):
            verify_covering(0.25, 0.1, 0.6, n_samples=10)  # r0 > sqrt(delta)

    def test_reproducible_under_seed(self):
        a = verify_covering(0.2, 1e-11, 0.1, n_samples=500, seed=9).to_dict()
        b = verify_covering(0.2, 1e-11, 0.1, n_samples=500, seed=9).to_dict()
        assert a == b


def test_ball_volumes():
    assert unit_ball_volume(1) == 2.0
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2.0)

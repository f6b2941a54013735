import math

import numpy as np
import pytest

from kepler_billiard.billiard import (
    ConstantRCurve,
    R0_from_center,
    R0_from_geometry,
    R_from_R0,
    accessible_interval,
    conserved_R,
    invariant_report,
    level_set_R,
    next_wall_crossing,
    r_value_on_section,
    reflect,
    run,
    step,
    tangent_angle,
)
from kepler_billiard.errors import (
    DomainError,
    EmptyLevelSet,
    EmptyRegion,
    GrazingContact,
    NoCollision,
    NotOnWall,
)
from kepler_billiard.kepler import (
    CartesianState,
    OrbitalElements,
    Params,
    cartesian_from_elements,
    eccentric_of_state,
    state_at_eccentric,
)

TWO_PI = 2.0 * math.pi


def sampling_crossing_oracle(el, E_now, p, n_grid=10_000, iters=100):
    """Dense sampling of y(E) - h plus bisection: independent crossing finder."""

    def y_of(E):
        return state_at_eccentric(el, E, p).y

    Es = np.linspace(E_now, E_now + TWO_PI, n_grid)
    ys = np.array([y_of(float(E)) for E in Es]) - p.h
    for i in range(n_grid - 1):
        if ys[i] < 0.0 <= ys[i + 1]:  # upward crossing bracket
            lo, hi = float(Es[i]), float(Es[i + 1])
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                if y_of(mid) - p.h < 0.0:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
    raise AssertionError("oracle found no upward crossing")


class TestR0:
    def test_geometry_lambda_zero(self):
        assert abs(R0_from_geometry(0.7, 1.3, 0.0) - 1.3) < 1e-14

    def test_geometry_lambda_half_pi(self):
        assert abs(R0_from_geometry(0.7, 1.3, math.pi / 2) - 0.6) < 1e-14
        assert abs(R0_from_geometry(1.9, 1.3, math.pi / 2) - 0.6) < 1e-13

    def test_geometry_r_equals_aM(self):
        for lam in (0.3, 1.2, 2.9):
            got = R0_from_geometry(1.3, 1.3, lam)
            assert abs(got - 1.3 * abs(math.cos(lam))) < 1e-13

    def test_geometry_domain(self):
        with pytest.raises(DomainError):
            R0_from_geometry(2.6, 1.3, 0.5)
        with pytest.raises(DomainError):
            R0_from_geometry(0.0, 1.3, 0.5)

    def test_geometry_range(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            aM = rng.uniform(0.2, 3.0)
            r = rng.uniform(1e-6, 2.0 * aM - 1e-6)
            lam = rng.uniform(0.0, math.pi)
            R0 = R0_from_geometry(r, aM, lam)
            assert (aM - r) ** 2 - 1e-12 <= R0**2 <= aM**2 + 1e-12

    def test_center_circular(self, params):
        el = OrbitalElements(A=-0.5, a=math.sqrt(0.5), theta0=0.0, alpha=1.0)
        assert abs(R0_from_center(el, params) - params.h) < 1e-14

    def test_center_on_wall_foot(self, params):
        # aM*e = h with theta0 = pi/2 puts the center exactly on Q
        aM, e = 2.0, 0.5
        a = math.sqrt(0.5 * aM * (1.0 - e * e))
        el = OrbitalElements(A=-0.25, a=a, theta0=math.pi / 2, alpha=1.0)
        assert R0_from_center(el, params) < 1e-14

    def test_center_vs_geometry_at_crossing(self, params, reference_elements):
        el = reference_elements
        cr = next_wall_crossing(el, 0.0, params)
        geo = R0_from_geometry(cr.r, el.aM, cr.lam)
        assert abs(geo - R0_from_center(el, params)) < 1e-10


class TestRFromR0:
    def test_lower_bound_value(self, params):
        aM = 1.3
        got = R_from_R0(aM, aM, params)
        assert abs(got - params.alpha * params.h**2 / (2.0 * aM)) < 1e-14

    def test_zero(self, params):
        aM = 1.3
        R0 = math.sqrt(params.h**2 + aM**2)
        assert abs(R_from_R0(R0, aM, params)) < 1e-14

    def test_matches_conserved_R(self, params, reference_elements):
        el = reference_elements
        R0 = R0_from_center(el, params)
        assert abs(R_from_R0(R0, el.aM, params) - conserved_R(el, params)) < 1e-10


class TestConservedR:
    def test_circular(self, params):
        el = OrbitalElements(A=-0.5, a=math.sqrt(0.5), theta0=0.0, alpha=1.0)
        assert abs(conserved_R(el, params) - 0.5) < 1e-14

    def test_theta0_zero(self, params):
        el = OrbitalElements(A=-0.5, a=math.sqrt(0.32), theta0=0.0, alpha=1.0)
        assert abs(conserved_R(el, params) - 0.32) < 1e-14

    def test_requires_g_zero(self, reference_elements):
        with pytest.raises(ValueError):
            conserved_R(reference_elements, Params(g=0.1))


class TestCrossing:
    def test_circle_crossing_abscissa(self, params):
        rho = 1.5
        A = -params.alpha / (2.0 * rho)
        a = math.sqrt(params.mu * rho)
        for sgn, side in ((1.0, 1.0), (-1.0, -1.0)):
            el = OrbitalElements(A=A, a=sgn * a, theta0=0.0, alpha=1.0)
            s = cartesian_from_elements(el, 2.5, params)
            cr = next_wall_crossing(el, eccentric_of_state(el, s), params)
            assert abs(abs(cr.x_impact) - math.sqrt(rho**2 - 1.0)) < 1e-6
            assert math.copysign(1.0, cr.x_impact) == side

    def test_no_collision_below(self, params):
        el = OrbitalElements(A=-1.0, a=math.sqrt(0.2), theta0=0.1, alpha=1.0)
        assert el.max_y() < 1.0
        with pytest.raises(NoCollision):
            next_wall_crossing(el, 0.0, params)

    def test_tangent_circle_is_no_collision(self, params):
        # wall exactly tangent to the bounding circle: degenerate path
        el = OrbitalElements(A=-0.5, a=math.sqrt(0.5), theta0=0.0, alpha=1.0)
        s = cartesian_from_elements(el, 1.0, params)
        res = run(s, 3, params)
        assert res.no_collision and not res.events

    def test_grazing_via_tolerance(self, params, reference_elements):
        with pytest.raises(GrazingContact):
            next_wall_crossing(reference_elements, 0.0, params, tol_graze=10.0)

    def test_against_sampling_oracle(self, params):
        rng = np.random.default_rng(17)
        checked = 0
        while checked < 25:
            A = -rng.uniform(0.2, 1.5)
            e = rng.uniform(0.05, 0.9)
            th = rng.uniform(0.0, TWO_PI)
            sgn = 1.0 if rng.uniform() < 0.5 else -1.0
            aM = -1.0 / (2.0 * A)
            el = OrbitalElements(
                A=A, a=sgn * math.sqrt(0.5 * aM * (1.0 - e * e)), theta0=th, alpha=1.0
            )
            if el.max_y() < params.h + 0.05:
                continue
            E_now = rng.uniform(0.0, TWO_PI)
            if state_at_eccentric(el, E_now, params).y > params.h:
                continue
            cr = next_wall_crossing(el, E_now, params)
            E_oracle = sampling_crossing_oracle(el, E_now, params)
            assert abs(cr.E_hit - E_oracle) < 1e-10
            checked += 1


class TestReflect:
    def test_example(self, params):
        s = CartesianState(x=0.3, y=1.0, px=1.0, py=0.7)
        out = reflect(s, params)
        assert (out.x, out.y, out.px, out.py, out.t) == (0.3, 1.0, 1.0, -0.7, 0.0)

    def test_grazing_momentum_unchanged(self, params):
        s = CartesianState(x=0.3, y=1.0, px=1.0, py=0.0)
        out = reflect(s, params)
        assert out == CartesianState(0.3, 1.0, 1.0, -0.0, 0.0)
        assert out.py == 0.0

    def test_involution(self, params):
        s = CartesianState(x=-0.2, y=1.0, px=0.4, py=0.9)
        assert reflect(reflect(s, params), params) == s

    def test_preserves_speed(self, params):
        s = CartesianState(x=0.3, y=1.0, px=1.0, py=0.7)
        assert reflect(s, params).speed_sq == s.speed_sq

    def test_not_on_wall(self, params):
        with pytest.raises(NotOnWall):
            reflect(CartesianState(0.3, 0.5, 1.0, 0.7), params)


class TestStep:
    def test_preserves_A_and_aM(self, params, reference_state):
        state = reference_state
        for k in range(20):
            state, ev = step(state, params, n=k)
            assert abs(ev.pre.A - ev.post.A) < 1e-12
            assert abs(ev.pre.aM - ev.post.aM) < 1e-12

    def test_preserves_R(self, params, reference_state):
        state = reference_state
        for k in range(20):
            state, ev = step(state, params, n=k)
            assert abs(
                conserved_R(ev.pre, params) - conserved_R(ev.post, params)
            ) < 1e-10

    def test_lambda_reflection_relation(self, params, reference_state):
        state = reference_state
        for k in range(10):
            state, ev = step(state, params, n=k)
            lam_post = tangent_angle(ev.post, eccentric_of_state(ev.post, state))
            assert abs((math.pi - ev.lam) - lam_post) < 1e-9

    def test_mirror_symmetry(self, params, reference_state):
        s = reference_state
        mirrored = CartesianState(x=-s.x, y=s.y, px=-s.px, py=s.py, t=0.0)
        r1 = run(s, 50, params)
        r2 = run(mirrored, 50, params)
        for a, b in zip(r1.events, r2.events):
            assert abs(a.x_impact + b.x_impact) < 1e-9
            assert abs(a.t - b.t) < 1e-9

    def test_output_state_on_wall_departing(self, params, reference_state):
        out, ev = step(reference_state, params)
        assert out.y == params.h
        assert out.py < 0.0
        assert out.t == ev.t


class TestRun:
    def test_zero_events(self, params, reference_state):
        res = run(reference_state, 0, params)
        assert res.events == [] and res.reports == []
        assert res.samples.shape == (1, 5)

    def test_conservation_drift(self, params, reference_state):
        res = run(reference_state, 2000, params)
        R = np.array([rep.R_eq16 for rep in res.reports])
        A = np.array([rep.A for rep in res.reports])
        assert np.ptp(R) / abs(R[0]) < 1e-9
        assert np.ptp(A) / abs(A[0]) < 1e-9
        assert all(rep.bounds_ok for rep in res.reports)

    def test_identity_residual(self, params, reference_state):
        res = run(reference_state, 500, params)
        for rep in res.reports:
            assert rep.residual_identity <= 1e-10 * max(1.0, abs(rep.R_eq16))

    def test_no_collision_flagged(self, params):
        el = OrbitalElements(A=-1.0, a=math.sqrt(0.2), theta0=0.1, alpha=1.0)
        s = cartesian_from_elements(el, 0.0, params)
        res = run(s, 10, params)
        assert res.no_collision and not res.events
        assert res.samples.shape[0] > 1  # one sampled revolution

    def test_grazing_halts_with_partial_output(self, params, reference_state):
        # normal velocities on this orbit range over ~[0.41, 0.62]; a cutoff
        # inside that range forces the diagnostic halt after a few events
        res = run(reference_state, 50, params, tol_graze=0.425)
        assert res.halted is not None and "grazing" in res.halted
        assert 0 < len(res.events) < 50

    def test_event_numbering_and_time_order(self, params, reference_state):
        res = run(reference_state, 30, params)
        assert [ev.n for ev in res.events] == list(range(30))
        ts = [ev.t for ev in res.events]
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_samples_requested(self, params, reference_state):
        res = run(reference_state, 5, params, samples_per_arc=64)
        assert res.samples.shape == (5 * 64, 5)
        assert np.all(res.samples[:, 2] <= params.h + 1e-9)


class TestAccessibleInterval:
    def test_closed_form_g0(self, params):
        x_min, x_max = accessible_interval(-0.5, params)
        assert abs(x_max - math.sqrt(3.0)) < 1e-14
        assert x_min == -x_max

    def test_tangent_contact(self, params):
        x_min, x_max = accessible_interval(-1.0, params)
        assert x_max == 0.0

    def test_empty(self, params):
        with pytest.raises(EmptyRegion):
            accessible_interval(-1.5, params)

    def test_g_positive_vs_bisection_oracle(self):
        p = Params(alpha=1.0, g=0.1, h=1.0)
        A = -0.5

        def f(x):
            r = math.hypot(x, p.h)
            return A - p.g / (r * r) + p.alpha / r

        lo, hi = 0.0, 10.0
        assert f(lo) > 0.0 > f(hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        x_oracle = 0.5 * (lo + hi)
        _, x_max = accessible_interval(A, p)
        assert abs(x_max - x_oracle) < 1e-12

    def test_positive_A_rejected(self, params):
        with pytest.raises(ValueError):
            accessible_interval(0.5, params)


class TestLevelSet:
    def test_lower_bound_degenerate(self, params):
        A = -0.5
        aM = 1.0
        with pytest.raises(EmptyLevelSet):
            level_set_R(A, params.alpha * params.h**2 / (2.0 * aM), params)

    def test_r0_zero_excluded(self, params):
        # R beyond the value at R0 = 0 has no level set at all
        A = -0.5
        R_max = params.alpha / (2.0 * 1.0) * (params.h**2 + 1.0)
        with pytest.raises(EmptyLevelSet):
            level_set_R(A, R_max * 1.5, params)

    def test_lambda_half_pi_line_identity(self, params):
        # along lambda = pi/2 the section value reduces to R(|aM - r|)
        A = -0.5
        aM = 1.0
        for x in (0.1, 0.7, 1.4):
            r = math.hypot(x, params.h)
            lhs = r_value_on_section(x, math.pi / 2, A, params)
            rhs = R_from_R0(abs(aM - r), aM, params)
            assert abs(lhs - rhs) < 1e-13

    def test_points_carry_level(self, params):
        curve = level_set_R(-0.5, 0.8, params)
        assert isinstance(curve, ConstantRCurve)
        assert len(curve.points) > 100
        for x, lam in curve.points[::7]:
            assert abs(r_value_on_section(float(x), float(lam), -0.5, params) - 0.8) < 1e-10

    def test_collision_points_on_level(self, params, reference_state):
        res = run(reference_state, 300, params)
        R = res.reports[0].R_eq16
        for ev in res.events:
            val = r_value_on_section(ev.x_impact, ev.lam, ev.post.A, params)
            assert abs(val - R) < 1e-8


class TestInvariantReport:
    def test_fields_and_bounds(self, params, reference_state):
        _, ev = step(reference_state, params)
        rep = invariant_report(ev, params)
        assert rep.n == ev.n
        aM = ev.post.aM
        lower = params.alpha * params.h**2 / (2.0 * aM)
        upper = (1.0 + (aM / params.h) ** 2 - ((aM - ev.r) / params.h) ** 2) * lower
        assert rep.bounds_ok
        assert lower < rep.R_eq16 < upper
        assert (aM - ev.r) ** 2 < rep.R0**2 < aM**2

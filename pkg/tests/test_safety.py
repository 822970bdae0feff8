import math

import numpy as np
import pytest

from caccsim.kinematics import RelativeState, build_system
from caccsim.safety import (
    NUM_SAFETY_ROWS,
    BrakingSpec,
    ComfortSpec,
    Row,
    constraint_block,
    emergency_gap_profile,
    linearize_safety,
    min_distance_curve,
    min_safe_distance,
    min_safe_distance_oracle,
    required_delay_for_clearance,
    time_to_contact,
)

SPEC_9 = BrakingSpec(a_e_b=9.0, a_l_b=9.0, phi=0.27)


def random_tuples(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield (
            float(rng.uniform(0, 40)),
            float(rng.uniform(0, 40)),
            BrakingSpec(
                a_e_b=float(rng.uniform(4, 12)),
                a_l_b=float(rng.uniform(4, 12)),
                phi=float(rng.uniform(0, 0.5)),
            ),
        )


class TestMinSafeDistance:
    def test_both_stopped(self):
        assert min_safe_distance(0.0, 0.0, SPEC_9) == 0.0

    def test_equal_speeds_equal_braking(self):
        # the braking terms cancel, only the delay travel remains
        assert min_safe_distance(35.0, 35.0, SPEC_9) == pytest.approx(9.45, abs=1e-9)
        assert min_safe_distance(25.0, 25.0, SPEC_9) == pytest.approx(6.75, abs=1e-9)

    def test_weaker_ego_braking(self):
        # oracle-derived value for v_e=18, v_l=15, a_e_b=7, a_l_b=10, phi=0.27
        spec = BrakingSpec(7.0, 10.0, 0.27)
        expect = 18.0 * 0.27 + 18.0**2 / 14.0 - 15.0**2 / 20.0
        got = min_safe_distance(18.0, 15.0, spec)
        assert got == pytest.approx(expect, abs=1e-12)
        assert got == pytest.approx(min_safe_distance_oracle(18.0, 15.0, spec), abs=1e-6)

    def test_fast_lead_clamps_to_zero(self):
        assert min_safe_distance(10.0, 30.0, SPEC_9) == 0.0

    def test_interior_maximum_branch(self):
        # ego brakes harder than the lead; speeds cross during braking
        spec = BrakingSpec(12.0, 6.0, 0.2)
        got = min_safe_distance(18.0, 15.0, spec)
        assert got == pytest.approx(min_safe_distance_oracle(18.0, 15.0, spec), abs=1e-6)
        # interior max is below the value with both stopped
        ub = 18.0 * 0.2 + 18.0**2 / 24.0 - 15.0**2 / 12.0
        assert got > max(0.0, ub)

    def test_rejects_negative_speeds(self):
        with pytest.raises(ValueError):
            min_safe_distance(-1.0, 10.0, SPEC_9)
        with pytest.raises(ValueError):
            min_safe_distance(10.0, -1.0, SPEC_9)

    def test_always_nonnegative_and_finite(self):
        for v_e, v_l, spec in random_tuples(200, seed=3):
            d = min_safe_distance(v_e, v_l, spec)
            assert np.isfinite(d) and d >= 0.0


class TestOracle:
    def test_matches_closed_form_on_random_grid(self):
        worst = 0.0
        for v_e, v_l, spec in random_tuples(200, seed=11):
            diff = abs(min_safe_distance(v_e, v_l, spec) - min_safe_distance_oracle(v_e, v_l, spec))
            worst = max(worst, diff)
        assert worst <= 1e-4

    def test_equal_speeds_value(self):
        assert min_safe_distance_oracle(25.0, 25.0, SPEC_9) == pytest.approx(6.75, abs=1e-6)

    def test_stopped_ego(self):
        assert min_safe_distance_oracle(0.0, 20.0, SPEC_9) == 0.0

    def test_rejects_coarse_step(self):
        with pytest.raises(ValueError):
            min_safe_distance_oracle(10.0, 10.0, SPEC_9, dt=0.01)
        with pytest.raises(ValueError):
            min_safe_distance_oracle(10.0, 10.0, SPEC_9, dt=0.0)


class TestEmergencyReplay:
    def test_gap_stays_nonnegative_from_d_safe(self):
        for v_e, v_l, spec in random_tuples(60, seed=5):
            d_safe = min_safe_distance(v_e, v_l, spec)
            gap = emergency_gap_profile(d_safe, v_e, v_l, spec)
            assert gap.min() >= -1e-6

    def test_tightness_slightly_below_d_safe(self):
        for v_e, v_l, spec in random_tuples(60, seed=6):
            d_safe = min_safe_distance(v_e, v_l, spec)
            if d_safe > 0.1:
                gap = emergency_gap_profile(d_safe - 0.1, v_e, v_l, spec)
                assert gap.min() < 0.0


class TestMonotonicity:
    def test_nondecreasing_in_ego_speed_and_delay(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            v_l = float(rng.uniform(0, 40))
            a_e, a_l = float(rng.uniform(4, 12)), float(rng.uniform(4, 12))
            phi = float(rng.uniform(0, 0.5))
            ds = [min_safe_distance(v, v_l, BrakingSpec(a_e, a_l, phi)) for v in np.linspace(0, 40, 30)]
            assert all(b >= a - 1e-9 for a, b in zip(ds, ds[1:]))
            v_e = float(rng.uniform(0, 40))
            dp = [min_safe_distance(v_e, v_l, BrakingSpec(a_e, a_l, p)) for p in np.linspace(0, 0.5, 20)]
            assert all(b >= a - 1e-9 for a, b in zip(dp, dp[1:]))

    def test_nonincreasing_in_lead_speed(self):
        rng = np.random.default_rng(9)
        for _ in range(40):
            v_e = float(rng.uniform(0, 40))
            a_e, a_l = float(rng.uniform(4, 12)), float(rng.uniform(4, 12))
            phi = float(rng.uniform(0, 0.5))
            ds = [min_safe_distance(v_e, v, BrakingSpec(a_e, a_l, phi)) for v in np.linspace(0, 40, 30)]
            assert all(b <= a + 1e-9 for a, b in zip(ds, ds[1:]))


class TestRequiredDelay:
    def test_reference_speeds(self):
        assert required_delay_for_clearance(2.0, 25.0) == pytest.approx(0.080, abs=1e-4)
        assert required_delay_for_clearance(2.0, 35.0) == pytest.approx(0.0571, abs=1e-4)

    def test_zero_clearance(self):
        assert required_delay_for_clearance(0.0, 20.0) == 0.0

    def test_rejects_nonpositive_speed(self):
        with pytest.raises(ValueError):
            required_delay_for_clearance(2.0, 0.0)

    def test_inverts_min_safe_distance_at_equal_braking(self):
        phi = required_delay_for_clearance(9.45, 35.0)
        assert phi == pytest.approx(0.27, abs=1e-12)
        assert min_safe_distance(35.0, 35.0, BrakingSpec(9.0, 9.0, phi)) == pytest.approx(9.45)


class TestMinDistanceCurve:
    def test_equal_braking_points(self):
        curve = dict(min_distance_curve(35.0, 9.0, [9.0], 0.27))
        assert curve[9.0] == pytest.approx(9.45, abs=1e-9)
        curve = dict(min_distance_curve(25.0, 9.0, [9.0], 0.27))
        assert curve[9.0] == pytest.approx(6.75, abs=1e-9)

    def test_nondecreasing_in_lead_braking_capacity(self):
        # a lead that can stop harder closes the gap more
        pts = min_distance_curve(35.0, 9.0, np.linspace(4, 12, 40), 0.27)
        vals = [d for _, d in pts]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_bad_capacity_propagates(self):
        with pytest.raises(ValueError):
            min_distance_curve(35.0, 9.0, [9.0, 0.0], 0.27)


class TestTimeToContact:
    def test_closing(self):
        assert time_to_contact(10.0, 20.0, 15.0) == pytest.approx(2.0)

    def test_opening_is_infinite(self):
        assert math.isinf(time_to_contact(10.0, 10.0, 15.0))

    def test_zero_gap(self):
        assert time_to_contact(0.0, 20.0, 15.0) == 0.0

    def test_rejects_negative_gap(self):
        with pytest.raises(ValueError):
            time_to_contact(-1.0, 20.0, 15.0)


class TestLinearization:
    def test_v_min_reference_point(self):
        # v_l = 10, a_e_b = 7, a_l_b = 10 puts the linear-region edge at sqrt(70)
        spec = BrakingSpec(7.0, 10.0, 0.0)
        v_min = 10.0 * math.sqrt(7.0 / 10.0)
        assert v_min == pytest.approx(math.sqrt(70.0), abs=1e-12)
        f, g = linearize_safety(10.0, 0.0, 0.0, spec, v_max=40.0)
        # first chord starts exactly at v_min: value there equals d_safe
        chord1 = f[1] + g[1] * v_min
        assert chord1 == pytest.approx(min_safe_distance(v_min, 10.0, spec), abs=1e-9)

    def test_linear_region_row_is_zero(self):
        f, g = linearize_safety(20.0, 0.0, 0.0, SPEC_9, v_max=40.0)
        assert f[0] == 0.0 and g[0] == 0.0

    def test_chords_interpolate_knots_exactly(self):
        spec = BrakingSpec(10.0, 10.0, 0.3)
        v_l_t = 22.0
        f, g = linearize_safety(v_l_t, 0.0, 0.0, spec, v_max=40.0)
        v_min = v_l_t * math.sqrt(spec.a_e_b / spec.a_l_b)
        knots = v_min + np.arange(8) * (40.0 - v_min) / 7.0
        for i in range(1, NUM_SAFETY_ROWS):
            lo, hi = knots[i - 1], knots[i]
            assert f[i] + g[i] * lo == pytest.approx(min_safe_distance(lo, v_l_t, spec), abs=1e-9)
            assert f[i] + g[i] * hi == pytest.approx(min_safe_distance(hi, v_l_t, spec), abs=1e-9)

    def test_chords_overapproximate_between_knots(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            spec = BrakingSpec(float(rng.uniform(4, 12)), float(rng.uniform(4, 12)), float(rng.uniform(0, 0.5)))
            v_l_t = float(rng.uniform(0, 38))
            v_max = 40.0
            f, g = linearize_safety(v_l_t, 0.0, 0.0, spec, v_max)
            v_min = v_l_t * math.sqrt(spec.a_e_b / spec.a_l_b)
            if v_max <= v_min:
                continue
            knots = v_min + np.arange(8) * (v_max - v_min) / 7.0
            for i in range(1, NUM_SAFETY_ROWS):
                for v in np.linspace(knots[i - 1], knots[i], 23):
                    chord = f[i] + g[i] * v
                    assert chord >= min_safe_distance(v, v_l_t, spec) - 1e-9

    def test_predicted_lead_speed_floors_at_zero(self):
        spec = BrakingSpec(10.0, 10.0, 0.3)
        # braking lead predicted past standstill: v_l(t) floored at 0
        f1, g1 = linearize_safety(5.0, -10.0, 1.0, spec, v_max=40.0)
        f2, g2 = linearize_safety(0.0, 0.0, 0.0, spec, v_max=40.0)
        assert np.allclose(f1, f2) and np.allclose(g1, g2)

    def test_degenerate_region_replicates_linear_row(self):
        # lead faster than any admissible ego speed: all rows collapse to -d <= 0
        spec = BrakingSpec(12.0, 4.0, 0.3)  # v_min = v_l * sqrt(3) > v_max
        f, g = linearize_safety(30.0, 0.0, 0.0, spec, v_max=40.0)
        assert np.all(f == 0.0) and np.all(g == 0.0)


class TestConstraintBlock:
    COMFORT = ComfortSpec(t_c_min=2.0, a_min=-2.5, a_max=2.5, v_max=40.0)
    SPEC = BrakingSpec(10.0, 10.0, 0.3)

    def block(self, x=RelativeState(15.0, 15.0, 15.0), k=1, a_l=0.0):
        sys = build_system(0.05, a_l=a_l)
        return constraint_block(x, k, self.SPEC, self.COMFORT, sys)

    def test_shape_and_labels(self):
        blk = self.block()
        assert blk.A.shape == (14, 4)
        assert blk.B.shape == (14,)
        assert blk.c.shape == (14,)
        assert tuple(blk.row_labels) == tuple(Row)

    def test_ttc_row_active_at_boundary(self):
        blk = self.block()
        res = blk.residuals(RelativeState(10.0, 15.0, 20.0), u=0.0, s=0.0)
        assert res[Row.TTC] == pytest.approx(0.0, abs=1e-12)

    def test_brake_row_active_at_capacity(self):
        blk = self.block()
        res = blk.residuals(RelativeState(15.0, 15.0, 15.0), u=-10.0, s=0.0)
        assert res[Row.BRAKE_CAPACITY] == pytest.approx(0.0, abs=1e-12)

    def test_comfort_rows_slack_absorbs_excess(self):
        blk = self.block()
        res = blk.residuals(RelativeState(15.0, 15.0, 15.0), u=3.0, s=0.0)
        assert res[Row.COMFORT_UPPER] == pytest.approx(0.5, abs=1e-12)
        res = blk.residuals(RelativeState(15.0, 15.0, 15.0), u=3.0, s=0.5)
        assert res[Row.COMFORT_UPPER] == pytest.approx(0.0, abs=1e-12)

    def test_only_comfort_rows_touch_slack(self):
        blk = self.block()
        slack_rows = set(np.flatnonzero(blk.A[:, 3] != 0.0))
        assert slack_rows == {Row.COMFORT_LOWER, Row.COMFORT_UPPER}

    def test_speed_limit_rows(self):
        blk = self.block()
        res = blk.residuals(RelativeState(15.0, 15.0, 40.0), u=0.0, s=0.0)
        assert res[Row.V_E_UPPER] == pytest.approx(0.0, abs=1e-12)
        res = blk.residuals(RelativeState(15.0, 15.0, 0.0), u=0.0, s=0.0)
        assert res[Row.V_E_LOWER] == pytest.approx(0.0, abs=1e-12)

    def test_safety_rows_match_chords_on_the_prediction(self):
        # on the lead-speed prediction the rows reduce to the plain chords
        x = RelativeState(12.0, 22.0, 25.0)
        k, a_l = 4, -1.0
        blk = self.block(x, k=k, a_l=a_l)
        t = k * 0.05
        v_l_pred = max(0.0, x.v_l + t * a_l)
        f, g = linearize_safety(x.v_l, a_l, t, self.SPEC, self.COMFORT.v_max)
        for v_e in (5.0, 18.0, 26.0, 39.0):
            probe = RelativeState(x.d, v_l_pred, v_e)
            res = blk.residuals(probe, u=0.0, s=0.0)
            for i in range(NUM_SAFETY_ROWS):
                assert res[Row.SAFETY_0 + i] == pytest.approx(-x.d + f[i] + g[i] * v_e, abs=1e-9)

    def test_safety_rows_read_lead_speed(self):
        blk = self.block(RelativeState(12.0, 22.0, 25.0), k=4, a_l=-1.0)
        # chord rows carry the braking-distance sensitivity -v_l_pred / a_l_b
        v_l_pred = 22.0 - 1.0 * 0.2
        for i in range(1, NUM_SAFETY_ROWS):
            assert blk.A[Row.SAFETY_0 + i, 1] == pytest.approx(-v_l_pred / self.SPEC.a_l_b)
        assert blk.A[Row.SAFETY_0, 1] == 0.0


def test_braking_spec_validation():
    with pytest.raises(ValueError):
        BrakingSpec(0.0, 10.0, 0.3)
    with pytest.raises(ValueError):
        BrakingSpec(10.0, -1.0, 0.3)
    with pytest.raises(ValueError):
        BrakingSpec(10.0, 10.0, -0.1)


def test_comfort_spec_validation():
    with pytest.raises(ValueError):
        ComfortSpec(t_c_min=-1.0, a_min=-2.5, a_max=2.5, v_max=40.0)
    with pytest.raises(ValueError):
        ComfortSpec(t_c_min=2.0, a_min=2.5, a_max=2.5, v_max=40.0)
    with pytest.raises(ValueError):
        ComfortSpec(t_c_min=2.0, a_min=-2.5, a_max=2.5, v_max=0.0)

import math

import numpy as np
import pytest

from caccsim.sim import (
    ActuatorSpec,
    Channel,
    ChannelSpec,
    DisturbanceEvent,
    LeadProfile,
    NoiseSpec,
    ScenarioConfig,
    SimTrace,
    _advance,
    default_profile,
    metrics,
    run,
)


def short_cfg(**kwargs):
    """Default scenario shortened for unit tests."""
    base = dict(duration=5.0, disturbances=())
    base.update(kwargs)
    return ScenarioConfig(**base)


class TestLeadProfile:
    def test_default_profile_speeds(self):
        p = default_profile()
        assert p.speed_at(0.0) == 15.0
        assert p.speed_at(5.0) == 25.0
        assert p.speed_at(10.0) == 35.0
        assert p.speed_at(20.0) == 35.0
        assert p.speed_at(30.0) == 25.0
        assert p.speed_at(32.0) == 5.0
        assert p.speed_at(35.0) == 0.0

    def test_acceleration_segments(self):
        p = default_profile()
        assert p.accel_at(0.0) == 2.0
        assert p.accel_at(9.99) == 2.0
        assert p.accel_at(10.0) == 0.0
        assert p.accel_at(25.0) == -1.0
        assert p.accel_at(31.0) == -10.0

    def test_rejects_unordered_breakpoints(self):
        with pytest.raises(ValueError):
            LeadProfile(initial_speed=10.0, breakpoints=((0.0, 1.0), (0.0, 2.0)))


class TestPlantIntegration:
    def test_advance_matches_closed_form(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            p0, v0 = float(rng.uniform(-10, 10)), float(rng.uniform(0.5, 30))
            a, dt = float(rng.uniform(-3, 3)), 0.05
            p1, v1 = _advance(p0, v0, a, dt)
            assert v1 == pytest.approx(v0 + a * dt, abs=1e-12)
            assert p1 == pytest.approx(p0 + v0 * dt + 0.5 * a * dt * dt, abs=1e-12)

    def test_advance_stops_exactly_mid_interval(self):
        # braking to zero inside the tick: travel v^2 / (2|a|), speed exactly 0
        p1, v1 = _advance(0.0, 1.0, -10.0, 0.5)
        assert v1 == 0.0
        assert p1 == pytest.approx(0.05)

    def test_lead_follows_profile_exactly(self):
        cfg = short_cfg(duration=6.0)
        tr = run(cfg)
        for k in range(len(tr)):
            assert tr.lead_vel[k] == pytest.approx(cfg.profile.speed_at(tr.time[k]), abs=1e-9)

    def test_ego_trace_is_consistent_with_actuated_accel(self):
        tr = run(short_cfg(duration=4.0))
        T_s = 0.05
        for k in range(len(tr) - 1):
            if tr.ego_vel[k] + tr.a_act[k] * T_s >= 0.0:
                assert tr.ego_vel[k + 1] == pytest.approx(tr.ego_vel[k] + tr.a_act[k] * T_s, abs=1e-12)
                assert tr.ego_pos[k + 1] == pytest.approx(
                    tr.ego_pos[k] + tr.ego_vel[k] * T_s + 0.5 * tr.a_act[k] * T_s**2, abs=1e-12
                )


class TestActuatorLag:
    def test_exact_first_order_discretization(self):
        # recursion a+ = u + (a - u) exp(-T_s/tau)
        tau, T_s, u = 0.1, 0.05, 2.0
        a = 0.0
        for _ in range(2):  # one time constant = two ticks
            a = u + (a - u) * math.exp(-T_s / tau)
        assert a / u == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)

    def test_step_response_63_percent_in_trace(self):
        # the catch-up phase commands a constant 2.5 from the first tick
        tr = run(short_cfg(duration=1.0))
        u = tr.u_cmd[0]
        assert u == pytest.approx(2.5, abs=1e-6)
        assert tr.u_cmd[1] == pytest.approx(u, abs=1e-6)
        # actuated acceleration one time constant (2 ticks) after the command
        assert tr.a_act[2] / u == pytest.approx(0.632, abs=0.005)


class TestChannel:
    def test_delay_ticks_rounding(self):
        rng = np.random.default_rng(0)
        assert Channel(ChannelSpec(delay=0.022, loss_probability=0.0), 0.05, rng).delay_ticks == 1
        assert Channel(ChannelSpec(delay=0.05, loss_probability=0.0), 0.05, rng).delay_ticks == 1
        assert Channel(ChannelSpec(delay=0.06, loss_probability=0.0), 0.05, rng).delay_ticks == 2
        assert Channel(ChannelSpec(delay=0.0, loss_probability=0.0), 0.05, rng).delay_ticks == 0

    def test_messages_arrive_exactly_one_delay_late(self):
        ch = Channel(ChannelSpec(delay=0.022, loss_probability=0.0), 0.05, np.random.default_rng(0))
        ch.send(0, "a")
        assert ch.receive(0) == (None, False)
        assert ch.receive(1) == ("a", False)

    def test_lost_message_flags_and_holds(self):
        ch = Channel(ChannelSpec(delay=0.0, loss_probability=1.0), 0.05, np.random.default_rng(0))
        ch.send(0, "a")
        payload, dropped = ch.receive(0)
        assert payload is None and dropped

    def test_lead_state_change_visible_after_delay(self):
        # the lead-speed step at t = 1.0 s (tick 20) reaches the controller at tick 21
        cfg = short_cfg(
            duration=2.0,
            disturbances=(DisturbanceEvent(1.0, "lead_speed", -3.0),),
            channel=ChannelSpec(delay=0.022, loss_probability=0.0, seed=1),
        )
        tr = run(cfg)
        assert tr.lead_vel[20] == pytest.approx(tr.lead_vel[19] + 2.0 * 0.05 - 3.0, abs=1e-9)
        assert tr.meas_vl[20] == pytest.approx(tr.lead_vel[19], abs=1e-9)  # not yet visible
        assert tr.meas_vl[21] == pytest.approx(tr.lead_vel[20], abs=1e-9)  # visible now

    def test_loss_rate_roughly_one_percent(self):
        cfg = ScenarioConfig(mode="nominal", duration=40.0)
        # count losses without running the controller: replay the channel stream
        rng = np.random.default_rng(cfg.channel.seed)
        draws = rng.random(800)
        expected = int((draws < cfg.channel.loss_probability).sum())
        assert 1 <= expected <= 25  # binomial(800, 1%) within a wide band


class TestDisturbances:
    def test_distance_step_jumps_between_adjacent_ticks(self):
        cfg = short_cfg(duration=3.0, disturbances=(DisturbanceEvent(1.0, "distance", -3.0),))
        tr = run(cfg)
        k = 20  # first tick at t >= 1.0
        drift = tr.lead_vel[k - 1] - tr.ego_vel[k - 1]
        jump = tr.gap[k] - tr.gap[k - 1]
        assert jump == pytest.approx(-3.0 + drift * 0.05, abs=0.05)

    def test_lead_speed_floor_at_zero(self):
        cfg = short_cfg(duration=1.0, disturbances=(DisturbanceEvent(0.5, "lead_speed", -100.0),))
        tr = run(cfg)
        assert tr.lead_vel[int(0.5 * 20)] == 0.0

    def test_rejects_unknown_target(self):
        with pytest.raises(ValueError):
            DisturbanceEvent(1.0, "yaw", -3.0)


class TestDeterminism:
    def test_same_seed_same_trace(self, tmp_path):
        cfg = short_cfg(duration=3.0, noise=NoiseSpec(enabled=True, d_std=0.05, v_l_std=0.05))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(cfg).to_csv(a)
        run(cfg).to_csv(b)
        assert a.read_bytes() == b.read_bytes()

    def test_different_seed_different_losses(self):
        def pattern(seed):
            ch = Channel(ChannelSpec(delay=0.0, loss_probability=0.3, seed=seed), 0.05,
                         np.random.default_rng(seed))
            out = []
            for k in range(100):
                ch.send(k, k)
                out.append(ch.receive(k)[1])
            return out

        assert pattern(1) != pattern(2)


class TestMetrics:
    def test_synthetic_margin(self):
        n = 10
        zeros = np.zeros(n)
        tr = SimTrace(
            time=np.arange(n) * 0.05,
            lead_pos=np.linspace(10, 20, n) + 1.0,
            lead_vel=zeros + 5.0,
            lead_acc=zeros,
            ego_pos=np.linspace(0, 10, n),
            ego_vel=zeros + 5.0,
            meas_d=zeros + 11.0,
            meas_vl=zeros + 5.0,
            meas_ve=zeros + 5.0,
            u_cmd=zeros,
            a_act=zeros,
            d_safe=np.linspace(10, 20, n) + 1.0 - np.linspace(0, 10, n) - 1.0,
            margin_safety=zeros + 1.0,
            margin_ttc=zeros + 11.0,
            solver_status=["Optimal"] * n,
            fallback=np.zeros(n, dtype=bool),
            dropped=np.zeros(n, dtype=bool),
        )
        m = metrics(tr)
        assert m.min_safety_margin == pytest.approx(1.0)
        assert m.violation_duration == 0.0
        assert m.rms_speed_tracking == 0.0

    def test_empty_trace_rejected(self):
        tr = SimTrace(*[np.zeros(0)] * 14, solver_status=[],
                      fallback=np.zeros(0, dtype=bool), dropped=np.zeros(0, dtype=bool))
        with pytest.raises(ValueError):
            metrics(tr)


class TestScenarioConfigValidation:
    def test_rejects_bad_mode(self):
        with pytest.raises(ValueError):
            ScenarioConfig(mode="aggressive")

    def test_rejects_bad_braking(self):
        with pytest.raises(ValueError):
            ScenarioConfig(a_e_brake=0.0)

    def test_rejects_inverted_comfort_band(self):
        with pytest.raises(ValueError):
            ScenarioConfig(a_min=3.0, a_max=2.5)

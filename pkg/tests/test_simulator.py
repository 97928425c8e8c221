import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdyn.kernel import build_kernel
from fracdyn.maps import Family, MapSpec, map_eval
from fracdyn.simulator import (
    NO_CONTROL,
    ControlMode,
    ControlSchedule,
    KernelMismatchError,
    SimConfig,
    Status,
    memory_value,
    simulate,
    with_param,
)

GOMPERTZ = MapSpec(Family.GOMPERTZ, r=1.0)


def direct_recurrence(spec, x0, steps):
    """Integer-order difference equation x(n) = x(n-1) + f(x(n-1)), plain floats."""
    xs = [x0]
    for _ in range(steps):
        xs.append(xs[-1] + map_eval(spec, xs[-1]))
    return np.array(xs)


def random_draws(count, seed, r_max=2.5):
    """Alternating Gompertz / logistic draws for the integer-order system.

    The integer-order logistic system ``x + r x (1 - x)`` is conjugate to the
    logistic map with parameter ``1 + r``: chaotic above ``r ~ 2.57`` and
    unbounded above 3.  The Gompertz family is non-chaotic at ``q = 1`` on
    its whole range.
    """
    rng = np.random.default_rng(seed)
    draws = []
    for i in range(count):
        if i % 2 == 0:
            spec = MapSpec(Family.GOMPERTZ, r=rng.uniform(0.0, 1.0), p=rng.uniform(0.66, 0.765))
        else:
            spec = MapSpec(Family.LOGISTIC, r=rng.uniform(0.5, r_max))
        draws.append((spec, float(rng.uniform(0.05, 0.95))))
    return draws


class TestConfig:
    def test_defaults(self):
        config = SimConfig()
        assert (config.q, config.x0, config.steps) == (0.8, 0.3, 1000)
        assert config.divergence_threshold == 1e6

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(q=0.0),
            dict(q=1.5),
            dict(steps=0),
            dict(steps=10.5),
            dict(x0=-0.1),
            dict(x0=1.6),
            dict(x0=float("nan")),
            dict(divergence_threshold=0.0),
            dict(scheme="euler"),
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(GOMPERTZ, **kwargs)

    def test_logistic_x0_unrestricted(self):
        SimConfig(MapSpec(Family.LOGISTIC, r=2.0), x0=-0.5)

    @pytest.mark.parametrize("kwargs", [dict(delta=0), dict(delta=1.5), dict(n_star=-1), dict(mode="scale")])
    def test_schedule_rejects(self, kwargs):
        with pytest.raises(ValueError):
            ControlSchedule(**kwargs)


class TestFirstStep:
    @pytest.mark.parametrize("q", [0.3, 0.8, 1.0])
    def test_x1_is_x0_plus_f(self, q):
        traj = simulate(SimConfig(GOMPERTZ, q=q, x0=0.3, steps=1))
        assert traj.samples[1] == pytest.approx(0.3 + map_eval(GOMPERTZ, 0.3), rel=1e-14)


class TestIntegerOrder:
    def test_matches_direct_recurrence(self, kernel_q1):
        for spec, x0 in random_draws(20, seed=11):
            traj = simulate(SimConfig(spec, q=1.0, x0=x0, steps=200), kernel_q1)
            ref = direct_recurrence(spec, x0, 200)
            assert traj.completed
            assert np.max(np.abs(traj.samples - ref)) <= 1e-9

    def test_one_step_residual_full_range(self, kernel_q1):
        # On chaotic draws two roundings of the same recurrence separate, so
        # check every step against the recurrence applied to the stored state.
        for spec, x0 in random_draws(20, seed=12, r_max=3.0):
            traj = simulate(SimConfig(spec, q=1.0, x0=x0, steps=200), kernel_q1)
            x = traj.samples
            residual = x[1:] - x[:-1] - map_eval(spec, x[:-1])
            assert np.max(np.abs(residual)) <= 1e-9

    def test_map_scheme_iterates_plain_map(self):
        spec = MapSpec(Family.LOGISTIC, r=3.9)
        traj = simulate(SimConfig(spec, q=1.0, x0=0.2, steps=50, scheme="map"))
        x = 0.2
        for n in range(1, 51):
            x = 3.9 * x * (1 - x)
            assert traj.samples[n] == x


class TestFractional:
    def test_chaotic_orbit_stays_in_range(self, kernel08):
        traj = simulate(SimConfig(GOMPERTZ, x0=0.3), kernel08)
        assert traj.status is Status.COMPLETED
        assert traj.n_end == 1000
        assert traj.samples.min() >= 0.0 and traj.samples.max() <= 1.5

    @pytest.mark.xfail(strict=True, reason="orbits from about 10% of x0 peak slightly above 1.5 (up to 1.504)")
    def test_range_holds_for_every_x0(self, kernel08):
        for x0 in np.linspace(0.01, 0.99, 99):
            traj = simulate(SimConfig(GOMPERTZ, x0=x0), kernel08)
            assert traj.completed
            assert traj.samples.min() >= 0.0 and traj.samples.max() <= 1.5

    def test_completed_for_every_x0(self, kernel08):
        for x0 in np.linspace(0.01, 0.99, 25):
            traj = simulate(SimConfig(GOMPERTZ, x0=x0), kernel08)
            assert traj.completed
            assert traj.samples.min() >= 0.0 and traj.samples.max() <= 1.51

    def test_full_memory_consistency(self, kernel08):
        control = ControlSchedule(ControlMode.MULTIPLICATIVE, -0.0132, 1, 500)
        traj = simulate(SimConfig(GOMPERTZ), kernel08, control)
        rng = np.random.default_rng(5)
        for n in rng.choice(np.arange(1, 1001), 10, replace=False):
            expected = memory_value(traj, kernel08, int(n))
            if n - 1 in traj.control_events:
                expected = control.apply(expected)
            assert traj.samples[n] == expected

    def test_deterministic(self, kernel08):
        a = simulate(SimConfig(GOMPERTZ, x0=0.41), kernel08)
        b = simulate(SimConfig(GOMPERTZ, x0=0.41), kernel08)
        assert a.samples.tobytes() == b.samples.tobytes()

    def test_builds_kernel_when_missing(self, kernel08):
        a = simulate(SimConfig(GOMPERTZ, steps=300))
        b = simulate(SimConfig(GOMPERTZ, steps=300), kernel08)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_kernel_mismatch(self):
        with pytest.raises(KernelMismatchError):
            simulate(SimConfig(GOMPERTZ, q=0.8), build_kernel(0.5, 1000))
        with pytest.raises(KernelMismatchError):
            simulate(SimConfig(GOMPERTZ, steps=1000), build_kernel(0.8, 999))


class TestControl:
    def test_zero_gamma_is_uncontrolled(self, kernel08):
        config = SimConfig(GOMPERTZ)
        plain = simulate(config, kernel08)
        for mode in (ControlMode.MULTIPLICATIVE, ControlMode.ADDITIVE):
            ctrl = simulate(config, kernel08, ControlSchedule(mode, 0.0, 1, 500))
            np.testing.assert_array_equal(plain.samples, ctrl.samples)

    @pytest.mark.parametrize("delta,n_star", [(1, 500), (3, 500), (5, 101), (7, 0)])
    def test_events_match_predicate(self, kernel08, delta, n_star):
        control = ControlSchedule(ControlMode.MULTIPLICATIVE, -0.001, delta, n_star)
        traj = simulate(SimConfig(GOMPERTZ), kernel08, control)
        expected = {n for n in range(traj.n_end) if n >= n_star and n % delta == 0}
        assert traj.control_events == expected
        assert np.flatnonzero(traj.impulse_mask()).tolist() == sorted(expected)

    def test_no_events_without_control(self, kernel08):
        assert simulate(SimConfig(GOMPERTZ), kernel08).control_events == frozenset()

    def test_impulse_scales_next_state(self, kernel08):
        control = ControlSchedule(ControlMode.MULTIPLICATIVE, -0.05, 1, 10)
        traj = simulate(SimConfig(GOMPERTZ, steps=20), kernel08, control)
        raw = memory_value(traj, kernel08, 11)
        assert traj.samples[11] == 0.95 * raw
        plain = simulate(SimConfig(GOMPERTZ, steps=20), kernel08)
        np.testing.assert_array_equal(traj.samples[:11], plain.samples[:11])

    def test_additive_shift(self, kernel08):
        control = ControlSchedule(ControlMode.ADDITIVE, 0.01, 2, 10)
        traj = simulate(SimConfig(GOMPERTZ, steps=20), kernel08, control)
        assert traj.samples[11] == memory_value(traj, kernel08, 11) + 0.01
        assert 11 not in traj.control_events

    def test_divergence_reported(self, kernel08):
        control = ControlSchedule(ControlMode.MULTIPLICATIVE, 0.1, 1, 500)
        traj = simulate(SimConfig(GOMPERTZ), kernel08, control)
        assert traj.status is Status.DIVERGED
        assert traj.diverged_at == traj.n_end + 1 == 504
        assert np.all(traj.samples >= 0)
        assert traj.reason == "state outside map domain"

    def test_threshold_divergence(self):
        spec = MapSpec(Family.LOGISTIC, r=4.0)
        traj = simulate(SimConfig(spec, q=1.0, x0=0.5, steps=100, divergence_threshold=10.0))
        assert not traj.completed
        assert "exceeds" in traj.reason

    @settings(max_examples=25, deadline=None)
    @given(x0=st.floats(0.0, 1.5), steps=st.integers(1, 150))
    def test_completed_samples_finite(self, x0, steps):
        traj = simulate(SimConfig(GOMPERTZ, x0=x0, steps=steps))
        if traj.completed:
            assert traj.n_end == steps
            assert np.all(np.isfinite(traj.samples))
        else:
            assert traj.diverged_at is not None


class TestWithParam:
    def test_axes(self):
        config = SimConfig(GOMPERTZ)
        assert with_param(config, NO_CONTROL, "r", 0.5)[0].map.r == 0.5
        assert with_param(config, NO_CONTROL, "p", 0.7)[0].map.p == 0.7
        assert with_param(config, NO_CONTROL, "q", 0.6)[0].q == 0.6
        assert with_param(config, NO_CONTROL, "gamma", -0.02)[1].gamma == -0.02
        with pytest.raises(ValueError):
            with_param(config, NO_CONTROL, "x0", 0.1)

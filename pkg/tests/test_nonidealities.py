import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xbarsim.core import seeded_stream
from xbarsim.errors import ParameterError, RangeError
from xbarsim.mapping import ConductanceWindow
from xbarsim.nonidealities import (
    D2DSpec,
    IVNonlinearityParam,
    RTNParams,
    StuckSpec,
    apply_d2d,
    apply_stuck,
    iv_current,
    rtn_multipliers,
    secant_conductance,
)

WINDOW = ConductanceWindow(1e-4, 1e-3)


def mid_matrix(shape, seed=0):
    return seeded_stream(seed).uniform(WINDOW.g_off, WINDOW.g_on, size=shape)


class TestStuck:
    def test_zero_probability(self):
        g = mid_matrix((6, 6))
        out, mask = apply_stuck(g, StuckSpec(0.0), WINDOW, seeded_stream(1))
        assert np.array_equal(out, g)
        assert mask.count == 0

    def test_certain_event_at_g_off(self):
        g = mid_matrix((5, 4))
        out, mask = apply_stuck(g, StuckSpec(1.0, "at_G_off"), WINDOW, seeded_stream(1))
        assert np.all(out == WINDOW.g_off)
        assert mask.count == 20

    def test_certain_event_at_g_on(self):
        g = mid_matrix((3, 3))
        out, _ = apply_stuck(g, StuckSpec(1.0, "at_G_on"), WINDOW, seeded_stream(1))
        assert np.all(out == WINDOW.g_on)

    def test_flagged_fraction_binomial(self):
        # n = 10^4, p = 0.05: 99.9% interval roughly [0.037, 0.064]
        g = mid_matrix((100, 100))
        _, mask = apply_stuck(g, StuckSpec(0.05), WINDOW, seeded_stream(7))
        frac = mask.count / g.size
        assert 0.037 <= frac <= 0.064

    def test_random_level_within_window(self):
        g = mid_matrix((20, 20))
        out, mask = apply_stuck(
            g, StuckSpec(0.5, "at_random_level"), WINDOW, seeded_stream(3)
        )
        stuck_vals = out[mask.flags]
        assert (stuck_vals >= WINDOW.g_off).all() and (stuck_vals <= WINDOW.g_on).all()
        assert np.array_equal(mask.values[mask.flags], stuck_vals)

    def test_deterministic_for_fixed_stream(self):
        g = mid_matrix((8, 8))
        spec = StuckSpec(0.2, "at_random_level")
        out1, mask1 = apply_stuck(g, spec, WINDOW, seeded_stream(5, "s"))
        out2, mask2 = apply_stuck(g, spec, WINDOW, seeded_stream(5, "s"))
        assert np.array_equal(out1, out2)
        assert np.array_equal(mask1.flags, mask2.flags)

    def test_invalid_probability(self):
        with pytest.raises(ParameterError):
            StuckSpec(1.5)

    def test_invalid_mode(self):
        with pytest.raises(ParameterError):
            StuckSpec(0.1, "sideways")


class TestD2D:
    def test_sigma_zero_identity(self):
        g = mid_matrix((4, 4))
        assert np.array_equal(apply_d2d(g, D2DSpec(0.0), WINDOW, seeded_stream(1)), g)

    def test_median_factor_one(self):
        draws = seeded_stream(2).lognormal_median1(0.1, size=10**5)
        assert 0.997 <= np.median(draws) <= 1.003

    def test_clipped_to_window(self):
        g = mid_matrix((30, 30))
        out = apply_d2d(g, D2DSpec(1.5), WINDOW, seeded_stream(4))
        assert (out >= WINDOW.g_off).all() and (out <= WINDOW.g_on).all()

    def test_requires_positive_conductance(self):
        with pytest.raises(RangeError):
            apply_d2d(np.zeros((2, 2)), D2DSpec(0.1), WINDOW, seeded_stream(0))

    def test_negative_sigma_rejected(self):
        with pytest.raises(ParameterError):
            D2DSpec(-0.1)


class TestIVCurrent:
    PARAM = IVNonlinearityParam(gamma=2.0, v_read=0.25)

    def test_ohmic_limit(self):
        param = IVNonlinearityParam(gamma=0.0, v_read=0.25)
        assert iv_current(2e-4, 0.1, param) == 2e-4 * 0.1

    def test_normalized_at_v_read(self):
        for gamma in (0.5, 1.0, 2.0, 5.0):
            param = IVNonlinearityParam(gamma=gamma, v_read=0.25)
            got = iv_current(3e-4, 0.25, param)
            assert got == pytest.approx(3e-4 * 0.25, rel=1e-14)

    def test_half_v_read_value(self):
        # sinh(1)/sinh(2) ~ 0.3240 of the full-scale current, vs 0.5 ohmic
        got = iv_current(1.0, 0.125, self.PARAM)
        want = 0.25 * np.sinh(1.0) / np.sinh(2.0)
        assert got == pytest.approx(want, rel=1e-12)
        assert got / 0.25 == pytest.approx(0.3240, abs=5e-4)

    def test_odd_in_v(self):
        v = np.linspace(0, 0.25, 11)
        plus = iv_current(4e-4, v, self.PARAM)
        minus = iv_current(4e-4, -v, self.PARAM)
        assert np.array_equal(plus, -minus)

    def test_monotone_in_v(self):
        for gamma in (0.0, 0.3, 2.0, 6.0):
            param = IVNonlinearityParam(gamma=gamma, v_read=0.25)
            v = np.linspace(-0.25, 0.25, 101)
            i = iv_current(5e-4, v, param)
            assert np.all(np.diff(i) > 0)

    def test_small_gamma_matches_ohmic(self):
        param = IVNonlinearityParam(gamma=1e-6, v_read=0.25)
        v = np.linspace(-0.25, 0.25, 51)
        i = iv_current(5e-4, v, param)
        assert np.all(np.abs(i - 5e-4 * v) <= 1e-9 * np.maximum(np.abs(5e-4 * v), 1e-30))

    def test_voltage_bound(self):
        with pytest.raises(RangeError):
            iv_current(1e-4, 0.3, self.PARAM)

    def test_secant_limit_at_zero(self):
        sec = secant_conductance(np.array(2e-4), np.array(0.0), self.PARAM)
        assert sec == pytest.approx(2e-4 * 2.0 / np.sinh(2.0), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 6.0), st.floats(-1.0, 1.0))
    def test_odd_property(self, gamma, frac):
        param = IVNonlinearityParam(gamma=gamma, v_read=0.2)
        v = frac * 0.2
        assert iv_current(1e-4, -v, param) == -iv_current(1e-4, v, param)


class TestRTN:
    def test_delta_zero_all_ones(self):
        params = RTNParams(delta=0.0, tau_high=2.0, tau_low=8.0)
        mult = rtn_multipliers(params, 1000, seeded_stream(1))
        assert np.all(mult == 1.0)

    def test_stationary_fraction(self):
        params = RTNParams(delta=0.5, tau_high=2.0, tau_low=8.0)
        mult = rtn_multipliers(params, 10**5, seeded_stream(2))
        high_frac = np.mean(mult > 1.0)
        assert abs(high_frac - 0.2) <= 0.02

    def test_dwell_times_converge(self):
        params = RTNParams(delta=0.5, tau_high=4.0, tau_low=6.0)
        mult = rtn_multipliers(params, 10**5, seeded_stream(3))
        states = (mult > 1.0).astype(int)
        # Split into runs and average run lengths per state.
        change = np.flatnonzero(np.diff(states)) + 1
        runs = np.split(states, change)
        high_runs = [len(r) for r in runs[1:-1] if r[0] == 1]
        low_runs = [len(r) for r in runs[1:-1] if r[0] == 0]
        assert abs(np.mean(high_runs) - params.tau_high) / params.tau_high <= 0.1
        assert abs(np.mean(low_runs) - params.tau_low) / params.tau_low <= 0.1

    def test_deterministic(self):
        params = RTNParams(delta=0.3, tau_high=2.0, tau_low=2.0)
        a = rtn_multipliers(params, 500, seeded_stream(4))
        b = rtn_multipliers(params, 500, seeded_stream(4))
        assert np.array_equal(a, b)

    def test_multi_cell_shape(self):
        params = RTNParams(delta=0.3, tau_high=2.0, tau_low=2.0)
        mult = rtn_multipliers(params, 10, seeded_stream(5), n_cells=7)
        assert mult.shape == (10, 7)

    def test_requires_reads(self):
        params = RTNParams(delta=0.3, tau_high=2.0, tau_low=2.0)
        with pytest.raises(ParameterError):
            rtn_multipliers(params, 0, seeded_stream(0))

    def test_dwell_below_one_rejected(self):
        with pytest.raises(ParameterError):
            RTNParams(delta=0.1, tau_high=0.5, tau_low=2.0)

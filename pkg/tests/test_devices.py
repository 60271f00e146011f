import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import quantize_oracle
from xbarsim.core import seeded_stream
from xbarsim.devices import (
    DeviceModel,
    drift,
    preset,
    preset_table,
    program_pulses,
    quantize,
)
from xbarsim.errors import ParameterError, PresetError, RangeError
from xbarsim.mapping import ConductanceWindow

MILLI = 1e-3


class TestPresets:
    def test_fefet_bits(self):
        assert preset("FeFET").bits == 5

    def test_stt_mram_ratio_within_range(self):
        model = preset("STT-MRAM")
        assert 1.5 <= model.on_off_ratio <= 2.0
        assert model.on_off_ratio_range == (1.5, 2.0)

    def test_drift_flags(self):
        assert preset("PCM").drift_nu > 0
        assert 0 < preset("RRAM").drift_nu < preset("PCM").drift_nu
        for name in ("NOR-flash", "NAND-flash", "STT-MRAM", "FeRAM", "FeFET",
                     "SOT-MRAM", "Li-ion"):
            assert preset(name).drift_nu == 0.0

    def test_geometric_midpoints(self):
        assert preset("RRAM").on_off_ratio == pytest.approx(np.sqrt(10 * 100))
        assert preset("PCM").on_off_ratio == pytest.approx(1e3)
        assert preset("Li-ion").on_off_ratio == pytest.approx(np.sqrt(40 * 1e3))

    def test_unknown_name_lists_valid(self):
        with pytest.raises(PresetError, match="NOR-flash"):
            preset("bogus")

    def test_case_insensitive(self):
        assert preset("pcm").name == "PCM"

    def test_g_on_from_ratio(self):
        model = preset("PCM")
        assert model.g_on == model.g_off * model.on_off_ratio

    def test_linearity_mapping(self):
        assert preset("Li-ion").linear_programming
        assert preset("Li-ion").programmable
        assert not preset("RRAM").linear_programming
        assert preset("RRAM").programmable
        for name in ("STT-MRAM", "FeRAM", "SOT-MRAM"):
            assert not preset(name).programmable

    def test_inference_suitability(self):
        assert preset("PCM").suitable_for_inference
        assert preset("RRAM").suitable_for_inference  # "Moderate" counts as usable
        assert not preset("STT-MRAM").suitable_for_inference

    def test_table_covers_all(self):
        table = preset_table()
        assert len(table) == 9
        assert {row["name"] for row in table} == {
            "NOR-flash", "NAND-flash", "RRAM", "PCM", "STT-MRAM", "FeRAM",
            "FeFET", "SOT-MRAM", "Li-ion",
        }


class TestQuantize:
    WINDOW = ConductanceWindow(0.1 * MILLI, 1.1 * MILLI)

    def test_two_bit_levels(self):
        levels = np.array([0.1, 0.1 + 1 / 3, 0.1 + 2 / 3, 1.1]) * MILLI
        g = np.array([[0.1, 0.3, 0.62, 1.05]]) * MILLI
        out = quantize(g, self.WINDOW, 2)
        expected = np.array([[levels[0], levels[1], levels[2], levels[3]]])
        assert np.allclose(out, expected, rtol=1e-12)

    def test_large_bits_identity(self):
        g = seeded_stream(0).uniform(self.WINDOW.g_off, self.WINDOW.g_on, size=(4, 4))
        assert np.array_equal(quantize(g, self.WINDOW, 52), g)

    def test_level_is_fixed_point(self):
        g = np.array([[self.WINDOW.g_off, self.WINDOW.g_on]])
        assert np.array_equal(quantize(g, self.WINDOW, 3), g)

    def test_ties_round_up(self):
        window = ConductanceWindow(1.0, 3.0)  # 1-bit levels {1, 3}, midpoint 2
        assert quantize(np.array([[2.0]]), window, 1)[0, 0] == 3.0

    def test_bits_below_one_rejected(self):
        with pytest.raises(ParameterError):
            quantize(np.array([[1e-4]]), self.WINDOW, 0)

    def test_out_of_window_rejected(self):
        with pytest.raises(RangeError):
            quantize(np.array([[2.0 * MILLI]]), self.WINDOW, 4)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.floats(0.0, 1.0))
    def test_matches_enumeration_oracle(self, bits, frac):
        g = self.WINDOW.g_off + frac * self.WINDOW.span
        got = quantize(np.array([[g]]), self.WINDOW, bits)[0, 0]
        want = quantize_oracle(g, self.WINDOW.g_off, self.WINDOW.g_on, bits)
        assert got == pytest.approx(want, rel=1e-12, abs=0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 2**31 - 1))
    def test_idempotent_and_bounded_error(self, bits, seed):
        g = seeded_stream(seed).uniform(self.WINDOW.g_off, self.WINDOW.g_on, size=(3, 5))
        q1 = quantize(g, self.WINDOW, bits)
        assert np.array_equal(quantize(q1, self.WINDOW, bits), q1)
        bound = self.WINDOW.span / (2 * (2**bits - 1)) * (1 + 1e-12)
        assert np.all(np.abs(q1 - g) <= bound)


def _norm_device(alpha=0.1, linear=False):
    # Normalized window [g_off, g_on] = [1, 2] so spans read naturally.
    return DeviceModel(
        name="test", on_off_ratio=2.0, g_off=1.0, bits=8,
        programming_alpha=alpha, linear_programming=linear,
    )


class TestProgramPulses:
    def test_already_at_target(self):
        model = _norm_device()
        g, pulses = program_pulses(1.4, 1.4, model, 100)
        assert g == 1.4 and pulses == 0

    def test_linear_steps(self):
        # constant step 0.1: from 1.0 toward 1.35 stops at 1.3 within 4 pulses
        model = _norm_device(alpha=0.1, linear=True)
        g, pulses = program_pulses(1.0, 1.35, model, 100)
        assert g == pytest.approx(1.3, rel=1e-12)
        assert pulses <= 4

    def test_saturating_steps_shrink(self):
        model = _norm_device(alpha=0.25)
        g = 1.0
        steps = []
        for _ in range(5):
            g_next, _ = program_pulses(g, 2.0, model, 1)
            steps.append(g_next - g)
            g = g_next
        assert all(s2 < s1 for s1, s2 in zip(steps, steps[1:]))

    def test_never_exits_window_and_respects_budget(self):
        model = _norm_device(alpha=0.3)
        stream = seeded_stream(4)
        start = stream.uniform(1.0, 2.0, size=200)
        target = stream.uniform(1.0, 2.0, size=200)
        g, pulses = program_pulses(start, target, model, 17)
        assert (g >= 1.0).all() and (g <= 2.0).all()
        assert (pulses <= 17).all()

    def test_budget_error_larger_near_g_on(self):
        # With a small pulse budget the saturating device cannot climb far
        # from g_off, so targets near g_on are missed by more than targets
        # near the middle of the window.
        model = _norm_device(alpha=0.1)
        targets_mid = np.linspace(1.4, 1.6, 21)
        targets_top = np.linspace(1.9, 2.0, 21)
        g_mid, _ = program_pulses(np.full(21, 1.0), targets_mid, model, 8)
        g_top, _ = program_pulses(np.full(21, 1.0), targets_top, model, 8)
        err_mid = np.abs(g_mid - targets_mid).mean()
        err_top = np.abs(g_top - targets_top).mean()
        assert err_top > err_mid

    def test_target_outside_window(self):
        with pytest.raises(RangeError):
            program_pulses(1.0, 2.5, _norm_device(), 10)

    def test_unprogrammable_device_rejected(self):
        from xbarsim.devices import preset

        with pytest.raises(ParameterError):
            program_pulses(1e-5, 1.5e-5, preset("STT-MRAM"), 10)


class TestDrift:
    def test_zero_exponent(self):
        model = _norm_device()
        assert drift(1.5, 1e6, model) == 1.5

    def test_reference_time(self):
        model = preset("PCM")
        g = 2.0 * model.g_off
        assert drift(g, 1.0, model) == g

    def test_power_law_value(self):
        model = DeviceModel(name="d", on_off_ratio=100.0, g_off=1e-5, drift_nu=0.1)
        g = 5e-4
        assert drift(g, 10.0, model) == pytest.approx(g * 10 ** (-0.1), rel=1e-12)

    def test_floor_at_g_off(self):
        model = DeviceModel(name="d", on_off_ratio=2.0, g_off=1e-5, drift_nu=0.5)
        assert drift(1.2e-5, 1e9, model) == model.g_off

    def test_monotone_and_composes(self):
        model = DeviceModel(name="d", on_off_ratio=100.0, g_off=1e-6, drift_nu=0.08)
        g = 5e-4
        times = [1.0, 3.0, 10.0, 100.0]
        values = [drift(g, t, model) for t in times]
        assert all(a >= b for a, b in zip(values, values[1:]))
        # drifting to a*b in one go equals drifting to a then re-referencing
        ab = drift(g, 6.0 * 7.0, model)
        composed = drift(drift(g, 6.0, model), 7.0, model)
        assert composed == pytest.approx(ab, rel=1e-12)

    def test_time_before_reference_rejected(self):
        with pytest.raises(ParameterError):
            drift(1.5, 0.5, _norm_device())

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from clickkit.classifier import extract_features
from clickkit.errors import ConfigError, InvalidInputError
from clickkit.events import EventBox
from clickkit.synth import (LOW_SNR_DB, PRESET_NAMES, EventSpec, SceneSpec, burst_events,
                            mean_power, noise_sigma_for_snr, preset_scene, preset_scenes,
                            synth_click, synth_scene)

FS = 192_000


class TestSynthClick:
    def test_zero_amplitude_is_silence(self):
        assert not synth_click(EventSpec("click", 0.0, peak_amplitude=0.0)).any()

    @pytest.mark.parametrize("kind, sign, expected", [
        ("click", None, 1), ("echo", None, -1), ("click", -1, -1), ("echo", 1, 1)])
    def test_first_nonzero_sample_carries_sign(self, kind, sign, expected):
        wave = synth_click(EventSpec(kind, 0.0, phase_sign=sign))
        first = wave[np.flatnonzero(wave)[0]]
        assert np.sign(first) == expected

    def test_length(self):
        assert synth_click(EventSpec("click", 0.0, duration=0.0005)).size == 96

    def test_peak_bin_of_20khz_click(self):
        wave = synth_click(EventSpec("click", 0.0, center_frequency=20_000.0))
        k = oracles.naive_peak_bin(wave.tolist(), 512)
        assert abs(k * FS / 512 - 20_000.0) <= FS / 512

    def test_closed_form(self):
        spec = EventSpec("click", 0.0, 0.3, 10_000.0, 0.0004, decay_rate=5_000.0)
        t = np.arange(77) / FS
        expected = 0.3 * np.exp(-5_000.0 * t) * np.sin(2 * np.pi * 10_000.0 * t)
        np.testing.assert_allclose(synth_click(spec), expected, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("freq", [96_000.0, 100_000.0, 0.0])
    def test_nyquist(self, freq):
        with pytest.raises(ConfigError):
            synth_click(EventSpec("click", 0.0, center_frequency=freq))

    def test_too_long(self):
        with pytest.raises(ConfigError):
            synth_click(EventSpec("echo", 0.0, duration=0.0025))

    def test_interference_may_be_long(self):
        wave = synth_click(EventSpec("interference", 0.0, 0.1, 4_000.0, 0.003))
        assert wave.size == 576
        assert abs(wave[0]) < 1e-6 and abs(wave[-1]) < 1e-6

    @pytest.mark.parametrize("kwargs", [{"kind": "whistle"}, {"duration": 0.0},
                                        {"phase_sign": 0}])
    def test_bad_spec(self, kwargs):
        base = {"kind": "click", "onset": 0.0}
        base.update(kwargs)
        with pytest.raises(ConfigError):
            EventSpec(**base)


class TestSynthScene:
    def test_empty_is_silence(self):
        audio, truth = synth_scene(SceneSpec(0.01))
        assert len(audio) == 1920 and not audio.samples.any()
        assert truth == []

    def test_burst_at_two_ms_spacing(self):
        events = burst_events(0.005, 20, interval=0.002)
        audio, truth = synth_scene(SceneSpec(0.06, events=tuple(events)))
        assert len(truth) == 40
        labels = [a.label for a in truth]
        assert labels == ["click", "echo"] * 20
        for click, echo in zip(truth[::2], truth[1::2]):
            assert echo.start - click.start == pytest.approx(0.0015, abs=1 / FS)
        for click, echo in zip(events[::2], events[1::2]):
            assert echo.peak_amplitude == 0.5 * click.peak_amplitude
            assert echo.sign == -1 and click.sign == 1

    def test_truth_extents(self):
        spec = SceneSpec(0.01, events=(EventSpec("click", 0.002, duration=0.0005),))
        _, truth = synth_scene(spec)
        assert (truth[0].start, truth[0].end) == (384 / FS, 480 / FS)

    def test_same_seed_bit_identical(self):
        spec = preset_scene("mixed_scene")
        a, ta = synth_scene(spec)
        b, tb = synth_scene(spec)
        assert a.samples.tobytes() == b.samples.tobytes()
        assert ta == tb

    def test_seed_changes_noise(self):
        a, _ = synth_scene(preset_scene("high_snr_burst", seed=1))
        b, _ = synth_scene(preset_scene("high_snr_burst", seed=2))
        assert not np.array_equal(a.samples, b.samples)

    def test_truncation_warns(self):
        spec = SceneSpec(0.001, events=(EventSpec("click", 0.0009),))
        with pytest.warns(UserWarning, match="truncated"):
            audio, truth = synth_scene(spec)
        assert len(audio) == 192
        assert truth[0].end == pytest.approx(0.001)

    def test_no_warning_when_inside(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            synth_scene(SceneSpec(0.01, events=(EventSpec("click", 0.001),)))

    @pytest.mark.parametrize("kwargs", [{"duration": 0.0}, {"duration": 0.01, "noise_sigma": -1},
                                        {"duration": 0.01,
                                         "events": (EventSpec("click", 0.02),)}])
    def test_bad_scene(self, kwargs):
        with pytest.raises(ConfigError):
            SceneSpec(**kwargs)

    @settings(max_examples=30)
    @given(st.lists(st.tuples(st.sampled_from(["click", "echo", "interference"]),
                              st.floats(0.0, 0.018), st.floats(1_000, 60_000)),
                    min_size=1, max_size=8),
           st.integers(0, 2**16), st.integers(1, 7))
    def test_linear_superposition(self, rows, seed, cut):
        events = tuple(EventSpec(k, t, 0.3, f, 0.0005) for k, t, f in rows)
        part_a, part_b = events[:cut], events[cut:]
        sigma = 0.01
        both, _ = synth_scene(SceneSpec(0.02, events=events, noise_sigma=sigma, seed=seed))
        a, _ = synth_scene(SceneSpec(0.02, events=part_a, noise_sigma=sigma, seed=seed))
        b, _ = synth_scene(SceneSpec(0.02, events=part_b, noise_sigma=sigma, seed=seed))
        noise, _ = synth_scene(SceneSpec(0.02, noise_sigma=sigma, seed=seed))
        np.testing.assert_allclose(both.samples, a.samples + b.samples - noise.samples,
                                   rtol=0, atol=1e-14)


class TestPresets:
    def test_golden_names(self):
        assert PRESET_NAMES == ("high_snr_burst", "low_snr_burst", "click_echo_pairs",
                                "interference_only", "mixed_scene")
        assert tuple(preset_scenes()) == PRESET_NAMES

    def test_unknown(self):
        with pytest.raises(InvalidInputError, match="unknown preset"):
            preset_scene("loud_whale")

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_synthesizes_without_overlap(self, name):
        audio, truth = synth_scene(preset_scene(name))
        assert audio.sample_rate == FS
        assert np.isfinite(audio.samples).all()
        for a, b in zip(truth, truth[1:]):
            assert a.end <= b.start

    def test_high_snr_burst_contents(self):
        _, truth = synth_scene(preset_scene("high_snr_burst"))
        assert [a.label for a in truth] == ["click", "echo"] * 20

    def test_low_snr_is_six_db(self):
        spec = preset_scene("low_snr_burst")
        click = spec.events[0]
        wave = synth_click(click)
        snr = 10 * np.log10(np.mean(wave ** 2) / spec.noise_sigma ** 2)
        assert snr == pytest.approx(LOW_SNR_DB, abs=1e-9)
        audio, _ = synth_scene(spec)
        assert np.std(audio.samples[:900]) == pytest.approx(spec.noise_sigma, rel=0.1)

    def test_noise_sigma_for_snr(self):
        ev = EventSpec("click", 0.0)
        sigma = noise_sigma_for_snr(ev, 20.0)
        assert mean_power(ev) / sigma ** 2 == pytest.approx(100.0)

    def test_presets_seeded(self):
        for name in PRESET_NAMES:
            assert preset_scene(name) == preset_scene(name)


class TestStrongestFrequency:
    @pytest.mark.parametrize("freq", [3_000.0, 12_000.0, 20_000.0, 35_000.0, 55_000.0])
    @pytest.mark.parametrize("seed", range(3))
    def test_within_one_bin_at_20db(self, freq, seed):
        ev = EventSpec("click", 0.002, 0.5, freq, 0.0005)
        sigma = noise_sigma_for_snr(ev, 20.0)
        audio, truth = synth_scene(SceneSpec(0.005, events=(ev,), noise_sigma=sigma, seed=seed))
        box = EventBox(int(round(truth[0].start * FS)), int(round(truth[0].end * FS)))
        f = extract_features(box, None, audio).strongest_frequency
        assert abs(f - freq) <= FS / 512

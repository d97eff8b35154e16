"""Deterministic synthetic scenes: clicks, phase-inverted echoes, interference
and Gaussian noise, with exact ground-truth labels.

Clicks are exponentially decaying sinusoids whose first half-cycle carries
``phase_sign``; echoes are attenuated, inverted, slightly detuned copies
that may carry a delayed reverberation tail. Interference is a smooth
(Hann-enveloped) tone burst, i.e. energy without a sharp onset.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .annotations import Annotation
from .errors import ConfigError, InvalidInputError
from .transforms import DEFAULT_SAMPLE_RATE, AudioBuffer

KINDS = ("click", "echo", "interference")
MAX_PULSE_DURATION = 0.002
# label written to ground truth for each event kind
KIND_LABELS = {"click": "click", "echo": "echo", "interference": "other"}


@dataclass(frozen=True)
class EventSpec:
    kind: str
    onset: float
    peak_amplitude: float = 0.5
    center_frequency: float = 20_000.0
    duration: float = 0.0003
    phase_sign: int | None = None  # None: +1 for clicks, -1 for echoes
    decay_rate: float | None = None  # None: decays to 1% by the end
    reverb_gain: float = 0.0
    reverb_delay: float = 0.0001

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if self.duration <= 0:
            raise ConfigError("event duration must be positive")
        if self.phase_sign not in (None, 1, -1):
            raise ConfigError("phase_sign must be +1 or -1")

    @property
    def sign(self) -> int:
        if self.phase_sign is not None:
            return self.phase_sign
        return -1 if self.kind == "echo" else 1

    @property
    def decay(self) -> float:
        if self.decay_rate is not None:
            return self.decay_rate
        return math.log(100.0) / self.duration

    @property
    def label(self) -> str:
        return KIND_LABELS[self.kind]


@dataclass(frozen=True)
class SceneSpec:
    duration: float
    sample_rate: int = DEFAULT_SAMPLE_RATE
    events: tuple[EventSpec, ...] = field(default_factory=tuple)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("scene duration must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        for ev in self.events:
            if not 0.0 <= ev.onset < self.duration:
                raise ConfigError(f"event onset {ev.onset} outside scene of {self.duration} s")


def synth_click(spec: EventSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    """Waveform of one event, ``round(duration * sample_rate)`` samples long."""
    if spec.center_frequency >= sample_rate / 2 or spec.center_frequency <= 0:
        raise ConfigError(
            f"center_frequency {spec.center_frequency} Hz not below Nyquist ({sample_rate / 2} Hz)")
    if spec.kind != "interference" and spec.duration > MAX_PULSE_DURATION:
        raise ConfigError(f"{spec.kind} duration {spec.duration} s exceeds 2 ms")
    n = max(int(round(spec.duration * sample_rate)), 1)
    t = np.arange(n) / sample_rate
    carrier = np.sin(2.0 * np.pi * spec.center_frequency * t)
    if spec.kind == "interference":
        env = np.sin(np.pi * (np.arange(n) + 0.5) / n) ** 2
        return spec.sign * spec.peak_amplitude * env * carrier
    wave = spec.sign * spec.peak_amplitude * np.exp(-spec.decay * t) * carrier
    if spec.reverb_gain:
        lag = int(round(spec.reverb_delay * sample_rate))
        if 0 < lag < n:
            wave[lag:] += spec.reverb_gain * wave[:n - lag].copy()
    return wave


def synth_scene(spec: SceneSpec) -> tuple[AudioBuffer, list[Annotation]]:
    """Superpose all events onto seeded Gaussian noise.

    Noise is drawn first from ``default_rng(seed)`` and does not depend on
    the events, so scenes sharing a seed differ only by their event sum.
    Events running past the end are truncated with a warning.
    """
    fs = spec.sample_rate
    n = int(round(spec.duration * fs))
    rng = np.random.default_rng(spec.seed)
    audio = rng.normal(0.0, spec.noise_sigma, n) if spec.noise_sigma > 0 else np.zeros(n)
    truth = []
    for ev in sorted(spec.events, key=lambda e: e.onset):
        wave = synth_click(ev, fs)
        start = int(round(ev.onset * fs))
        stop = start + wave.size
        if stop > n:
            warnings.warn(f"{ev.kind} at {ev.onset:.6f} s truncated at scene end", stacklevel=2)
            wave = wave[:n - start]
            stop = n
        audio[start:stop] += wave
        truth.append(Annotation(start / fs, stop / fs, ev.label))
    return AudioBuffer(audio, fs), truth


def burst_events(first_onset: float, n_clicks: int, interval: float = 0.004,
                 echo_delay: float | None = 0.0015, click_amplitude: float = 0.5,
                 echo_gain: float = 0.5, frequency: float = 20_000.0,
                 echo_shift: float = -1_000.0, duration: float = 0.0003,
                 echo_reverb: float = 0.0, rng: np.random.Generator | None = None,
                 jitter: float = 0.0) -> list[EventSpec]:
    """A click train, each click optionally followed by its echo.

    ``jitter`` perturbs each inter-click interval by a uniform fraction.
    """
    events = []
    t = first_onset
    for _ in range(n_clicks):
        events.append(EventSpec("click", t, click_amplitude, frequency, duration))
        if echo_delay is not None:
            events.append(EventSpec("echo", t + echo_delay, click_amplitude * echo_gain,
                                    frequency + echo_shift, duration, reverb_gain=echo_reverb))
        step = interval
        if rng is not None and jitter:
            step *= 1.0 + rng.uniform(-jitter, jitter)
        t += step
    return events


def mean_power(spec: EventSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> float:
    wave = synth_click(spec, sample_rate)
    return float(np.mean(wave * wave))


def noise_sigma_for_snr(spec: EventSpec, snr_db: float,
                        sample_rate: int = DEFAULT_SAMPLE_RATE) -> float:
    """Noise sigma giving ``snr_db`` = 10 log10(event mean power / sigma^2)."""
    return math.sqrt(mean_power(spec, sample_rate) / 10.0 ** (snr_db / 10.0))


# ---------------------------------------------------------------------------
# Preset catalog
# ---------------------------------------------------------------------------

PRESET_NAMES = ("high_snr_burst", "low_snr_burst", "click_echo_pairs",
                "interference_only", "mixed_scene")
LOW_SNR_DB = 6.0


def _high_snr_burst(seed):
    return SceneSpec(0.1, events=tuple(burst_events(0.005, 20)), noise_sigma=0.001, seed=seed)


def _low_snr_burst(seed):
    events = burst_events(0.005, 20)
    sigma = noise_sigma_for_snr(events[0], LOW_SNR_DB)
    return SceneSpec(0.1, events=tuple(events), noise_sigma=sigma, seed=seed)


def _click_echo_pairs(seed):
    rng = np.random.default_rng(seed)
    events = []
    freqs = (3_000.0, 12_000.0, 20_000.0, 30_000.0, 55_000.0)
    for k in range(10):
        onset = 0.004 + 0.010 * k
        f = freqs[k % len(freqs)]
        amp = float(rng.uniform(0.2, 0.6))
        dur = 0.0005 if f < 5_000 else 0.0003
        events.append(EventSpec("click", onset, amp, f, dur))
        delay = float(rng.uniform(0.0013, 0.003))
        shift = float(rng.uniform(100.0, 2_000.0)) * (1 if rng.random() < 0.5 else -1)
        events.append(EventSpec("echo", onset + delay, amp * float(rng.uniform(0.3, 0.7)),
                                f + shift, dur, reverb_gain=0.3))
    return SceneSpec(0.11, events=tuple(events), noise_sigma=0.002, seed=seed)


def _interference_only(seed):
    rng = np.random.default_rng(seed)
    events = [EventSpec("interference", 0.005 + 0.012 * k, float(rng.uniform(0.05, 0.2)),
                        float(rng.uniform(2_000.0, 8_000.0)), float(rng.uniform(0.001, 0.003)))
              for k in range(8)]
    return SceneSpec(0.1, events=tuple(events), noise_sigma=0.002, seed=seed)


def _mixed_scene(seed):
    rng = np.random.default_rng(seed)
    events = burst_events(0.005, 12, interval=0.004, click_amplitude=0.5,
                          echo_reverb=0.3, rng=rng, jitter=0.1)
    events += burst_events(0.075, 8, interval=0.0045, click_amplitude=0.25,
                           frequency=35_000.0, echo_gain=0.4, rng=rng, jitter=0.1)
    events += [EventSpec("interference", 0.125 + 0.010 * k, 0.1, 4_000.0 + 1_000.0 * k, 0.002)
               for k in range(3)]
    events += [EventSpec("click", 0.165 + 0.012 * k, 0.4, 10_000.0, 0.0004) for k in range(3)]
    events += [EventSpec("echo", 0.1668 + 0.012 * k, 0.2, 10_600.0, 0.0004, reverb_gain=0.3)
               for k in range(3)]
    return SceneSpec(0.21, events=tuple(events), noise_sigma=0.002, seed=seed)


_PRESETS = {
    "high_snr_burst": (_high_snr_burst, 7),
    "low_snr_burst": (_low_snr_burst, 8),
    "click_echo_pairs": (_click_echo_pairs, 9),
    "interference_only": (_interference_only, 10),
    "mixed_scene": (_mixed_scene, 11),
}


def preset_scene(name: str, seed: int | None = None) -> SceneSpec:
    """Named scene; ``seed`` replaces the preset's default seed."""
    try:
        build, default_seed = _PRESETS[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
    return build(default_seed if seed is None else seed)


def preset_scenes() -> dict[str, SceneSpec]:
    return {name: preset_scene(name) for name in PRESET_NAMES}


# ---------------------------------------------------------------------------
# Randomized training scenes
# ---------------------------------------------------------------------------


def _fits(onset: float, length: float, taken: list[tuple[float, float]],
          guard: float = 0.0003) -> bool:
    return all(onset + length + guard <= s or onset >= e + guard for s, e in taken)


def random_training_scene(rng: np.random.Generator, duration: float = 0.2) -> SceneSpec:
    """A drifting click train with surface and late echoes plus interference.

    Per-burst randomization covers the inter-click interval (which drifts
    click to click), the surface-echo delay (anywhere in the gap to the
    next click), echo attenuation and frequency. Some clicks also return a
    late echo several intervals later, landing among subsequent clicks.
    Phase cues are unreliable on purpose: some clicks start negative and
    some echoes keep the click's phase. Events that would collide with an
    already placed one are skipped, so ground truth never overlaps.
    """
    fs = DEFAULT_SAMPLE_RATE
    interval = float(rng.uniform(0.004, 0.008))
    drift = float(rng.uniform(-0.02, 0.02))
    delay = float(rng.uniform(0.001, interval - 0.0015))
    amp = float(rng.uniform(0.15, 0.6))
    freq = float(rng.choice([3_000.0, 8_000.0, 15_000.0, 25_000.0, 45_000.0]))
    dur = float(rng.uniform(0.0003, 0.0006))
    gain = float(rng.uniform(0.4, 0.95))
    late_prob = float(rng.uniform(0.0, 0.6))
    n_clicks = int(rng.integers(8, 24))

    clicks, echoes = [], []
    t = float(rng.uniform(0.002, 0.01))
    for _ in range(n_clicks):
        if t + interval > duration - 0.004:
            break
        a = min(amp * float(rng.uniform(0.75, 1.25)), 0.9)
        clicks.append(EventSpec("click", t, a, freq, dur,
                                phase_sign=1 if rng.random() < 0.8 else -1))
        if rng.random() < 0.8:
            echoes.append((t + delay * float(rng.uniform(0.95, 1.05)), a * gain))
        if rng.random() < late_prob:
            echoes.append((t + float(rng.uniform(1.2, 4.0)) * interval,
                           a * gain * float(rng.uniform(0.5, 1.0))))
        t += interval * float(rng.uniform(0.95, 1.05))
        interval = min(max(interval * (1.0 + drift), 0.003), 0.012)

    events = list(clicks)
    taken = [(c.onset, c.onset + c.duration) for c in clicks]
    for onset, a in echoes:
        if onset + dur >= duration or not _fits(onset, dur, taken):
            continue
        sign = -1 if rng.random() < 0.6 else 1
        shift = float(rng.uniform(100.0, 2_000.0)) * (1 if rng.random() < 0.5 else -1)
        events.append(EventSpec("echo", onset, min(a * float(rng.uniform(0.85, 1.15)), 0.9),
                                max(freq + shift, 500.0), dur, phase_sign=sign,
                                reverb_gain=float(rng.uniform(0.0, 0.4))))
        taken.append((onset, onset + dur))
    for _ in range(int(rng.integers(1, 5))):
        d = float(rng.uniform(0.0008, 0.002))
        onset = float(rng.uniform(0.001, duration - d - 0.001))
        if not _fits(onset, d, taken, guard=0.0005):
            continue
        events.append(EventSpec("interference", onset, amp * float(rng.uniform(0.2, 0.8)),
                                float(rng.uniform(1_500.0, 9_000.0)), d))
        taken.append((onset, onset + d))
    sigma = float(rng.uniform(0.0005, 0.004))
    return SceneSpec(duration, fs, tuple(events), sigma, int(rng.integers(0, 2**31 - 1)))


def with_seed(spec: SceneSpec, seed: int) -> SceneSpec:
    return replace(spec, seed=seed)

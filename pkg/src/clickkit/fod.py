"""First-order Dirac-like impulse detector.

The signal is differenced, each gradient sample is gated against a
threshold driven by the local mean absolute gradient, and the surviving
peaks are grouped by sample distance and padded into event intervals.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError
from .events import EventBox
from .transforms import AudioBuffer, moving_average, noise_gate


@dataclass(frozen=True)
class GatedPeak:
    sample_index: int
    gradient_value: float

    @property
    def magnitude(self) -> float:
        return abs(self.gradient_value)


@dataclass(frozen=True)
class FodEvent:
    """Peak group spanning the half-open interval ``[start_sample, end_sample)``."""

    start_sample: int
    end_sample: int
    peaks: tuple[GatedPeak, ...]
    strongest_peak: GatedPeak


@dataclass(frozen=True)
class FodConfig:
    ma_window: int = 1000
    max_gap: int = 192
    pad: int = 96
    # groups failing either floor are discarded before padding
    min_peaks: int = 1
    min_peak_magnitude: float = 0.0

    def __post_init__(self):
        if self.ma_window < 1:
            raise ConfigError(f"ma_window must be >= 1, got {self.ma_window}")
        if self.max_gap < 1:
            raise ConfigError(f"max_gap must be >= 1, got {self.max_gap}")
        if self.pad < 0:
            raise ConfigError(f"pad must be >= 0, got {self.pad}")
        if self.min_peaks < 1:
            raise ConfigError(f"min_peaks must be >= 1, got {self.min_peaks}")
        if self.min_peak_magnitude < 0:
            raise ConfigError("min_peak_magnitude must be >= 0")


def gated_gradient(samples, ma_window: int) -> np.ndarray:
    """Gradient with every sub-threshold sample zeroed."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise InvalidInputError("need at least 2 samples to compute a gradient")
    if ma_window < 1:
        raise InvalidInputError(f"ma_window must be >= 1, got {ma_window}")
    grad = np.diff(x)
    return noise_gate(grad, moving_average(grad, ma_window))


def extract_peaks(audio, ma_window: int = 1000, offset: int = 0) -> list[GatedPeak]:
    """Every nonzero gated gradient sample, in index order.

    A gradient value ``x[i+1] - x[i]`` is attributed to sample ``i + 1``,
    the sample where the jump lands. ``offset`` shifts indices when
    ``audio`` is a slice of a longer recording.
    """
    x = audio.samples if isinstance(audio, AudioBuffer) else audio
    gated = gated_gradient(x, ma_window)
    idx = np.flatnonzero(gated)
    return [GatedPeak(int(offset + i + 1), float(gated[i])) for i in idx]


def group_peaks(peaks: Sequence[GatedPeak], max_gap: int) -> list[FodEvent]:
    """Chain consecutive peaks at most ``max_gap`` samples apart into events."""
    if max_gap < 1:
        raise InvalidInputError(f"max_gap must be >= 1, got {max_gap}")
    events: list[FodEvent] = []
    if not peaks:
        return events
    indices = np.array([p.sample_index for p in peaks])
    if np.any(np.diff(indices) < 0):
        raise InvalidInputError("peaks must be sorted by sample index")
    breaks = np.flatnonzero(np.diff(indices) > max_gap) + 1
    bounds = np.concatenate(([0], breaks, [len(peaks)]))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        group = tuple(peaks[lo:hi])
        mags = np.array([p.magnitude for p in group])
        strongest = group[int(np.argmax(mags))]  # argmax keeps the earliest tie
        events.append(FodEvent(group[0].sample_index, group[-1].sample_index + 1,
                               group, strongest))
    return events


def pad_events(events: Sequence[FodEvent], pad: int, signal_length: int,
               lower: int = 0) -> list[FodEvent]:
    """Widen each event by ``pad`` on both sides without crossing neighbours.

    Where two padded events would collide they meet at the (floored)
    midpoint of the gap between them. Results stay inside
    ``[lower, signal_length)``.
    """
    out = []
    n = len(events)
    for i, ev in enumerate(events):
        start = ev.start_sample - pad
        end = ev.end_sample + pad
        if i > 0:
            prev = events[i - 1]
            start = max(start, (prev.end_sample + ev.start_sample) // 2)
        if i + 1 < n:
            nxt = events[i + 1]
            end = min(end, (ev.end_sample + nxt.start_sample) // 2)
        start = max(start, lower)
        end = min(end, signal_length)
        out.append(FodEvent(start, end, ev.peaks, ev.strongest_peak))
    return out


def filter_events(events: Sequence[FodEvent], config: FodConfig) -> list[FodEvent]:
    return [ev for ev in events
            if len(ev.peaks) >= config.min_peaks
            and ev.strongest_peak.magnitude >= config.min_peak_magnitude]


def detect(audio: AudioBuffer, config: FodConfig | None = None) -> list[EventBox]:
    """Standalone impulse detection over a whole recording."""
    config = config or FodConfig()
    x = audio.samples
    if x.size < 2:
        raise InvalidInputError("need at least 2 samples to detect events")
    peaks = extract_peaks(x, config.ma_window)
    events = filter_events(group_peaks(peaks, config.max_gap), config)
    events = pad_events(events, config.pad, x.size)
    if not events:
        return []
    max_grad = float(np.max(np.abs(np.diff(x))))
    return [
        EventBox(ev.start_sample, ev.end_sample,
                 confidence=min(ev.strongest_peak.magnitude / max_grad, 1.0),
                 label="event", provenance="fod")
        for ev in events
    ]

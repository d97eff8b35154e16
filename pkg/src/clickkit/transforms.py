"""Numeric signal transforms: gradient, noise gate, STFT, Mexican-Hat CWT and
rasterization of each representation into square 8-bit planes.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import convolve, get_window

from .errors import InvalidInputError

DEFAULT_SAMPLE_RATE = 192_000
DEFAULT_WINDOW = 960
MEXICAN_HAT_CENTER_FREQUENCY = 0.25
DB_FLOOR = 1e-10

# noise-gate threshold polynomial: tau(m) = 8 m^2 + 2.4 m + 0.024
GATE_COEFFS = (8.0, 2.4, 0.024)


@dataclass(frozen=True)
class AudioBuffer:
    """Mono samples (nominally in [-1, 1]) with their sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError(f"samples must be 1-D, got shape {samples.shape}")
        if int(self.sample_rate) <= 0:
            raise InvalidInputError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def segment(self, start: int, end: int) -> "AudioBuffer":
        return AudioBuffer(self.samples[start:end], self.sample_rate)


@dataclass(frozen=True)
class GradientSignal:
    values: np.ndarray
    source_length: int


@dataclass(frozen=True)
class SpectrogramMatrix:
    """One-sided STFT, arrays shaped ``[freq_bins, frames]``."""

    magnitudes: np.ndarray
    phases: np.ndarray
    frame_length: int
    hop: int
    sample_rate: int

    @property
    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.frame_length, d=1.0 / self.sample_rate)


@dataclass(frozen=True)
class Scalogram:
    """CWT coefficients shaped ``[n_scales, n_samples]``; scales ascending."""

    coefficients: np.ndarray
    scales: np.ndarray
    sample_rate: int

    def frequencies(self, center_frequency: float = MEXICAN_HAT_CENTER_FREQUENCY) -> np.ndarray:
        return scale_to_frequency(self.scales, self.sample_rate, center_frequency)


@dataclass(frozen=True)
class ImagePlane:
    pixels: np.ndarray  # uint8, [H, W]
    channel_role: str = field(default="waveform")


def _as_array(audio) -> np.ndarray:
    if isinstance(audio, AudioBuffer):
        return audio.samples
    return np.asarray(audio, dtype=np.float64)


# ---------------------------------------------------------------------------
# Gradient and noise gate
# ---------------------------------------------------------------------------


def first_order_gradient(audio) -> GradientSignal:
    """Unpadded first difference, ``values[i] = x[i+1] - x[i]``."""
    x = _as_array(audio)
    if x.size < 2:
        raise InvalidInputError("first_order_gradient needs at least 2 samples")
    return GradientSignal(np.diff(x), int(x.size))


def moving_average(values, window: int) -> np.ndarray:
    """Centered running mean of ``|values|`` with edge truncation.

    Sample ``i`` averages indices ``i - window//2 .. i + (window-1)//2``
    clipped to the sequence, so the output has the input's length.
    """
    if window < 1:
        raise InvalidInputError(f"moving-average window must be >= 1, got {window}")
    a = np.abs(np.asarray(values, dtype=np.float64))
    n = a.size
    if n == 0:
        return a
    csum = np.concatenate(([0.0], np.cumsum(a)))
    idx = np.arange(n)
    lo = np.maximum(idx - window // 2, 0)
    hi = np.minimum(idx + (window - 1) // 2 + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def gate_threshold(local_mean):
    a, b, c = GATE_COEFFS
    m = np.asarray(local_mean, dtype=np.float64)
    tau = a * m * m + b * m + c
    return float(tau) if tau.ndim == 0 else tau


def noise_gate(gradient_sample, local_mean):
    """Keep a gradient sample whose magnitude reaches tau(local_mean), else 0.

    Accepts scalars or equally shaped arrays.
    """
    s = np.asarray(gradient_sample, dtype=np.float64)
    keep = np.abs(s) >= gate_threshold(local_mean)
    out = np.where(keep, s, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Short-time Fourier transform
# ---------------------------------------------------------------------------


def stft(audio, frame_length: int, hop: int, sample_rate: int | None = None) -> SpectrogramMatrix:
    """Hann-windowed one-sided STFT, no padding; frames start at ``k * hop``."""
    x = _as_array(audio)
    if sample_rate is None:
        sample_rate = audio.sample_rate if isinstance(audio, AudioBuffer) else DEFAULT_SAMPLE_RATE
    if frame_length < 1 or frame_length & (frame_length - 1):
        raise InvalidInputError(f"frame_length must be a power of two, got {frame_length}")
    if hop < 1:
        raise InvalidInputError(f"hop must be >= 1, got {hop}")
    if x.size < frame_length:
        raise InvalidInputError(
            f"audio has {x.size} samples, shorter than frame_length {frame_length}")
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_length)[::hop]
    window = get_window("hann", frame_length)
    spec = np.fft.rfft(frames * window, axis=1).T
    mags = np.abs(spec)
    phases = np.angle(spec)
    phases[phases <= -np.pi] = np.pi
    return SpectrogramMatrix(mags, phases, frame_length, hop, int(sample_rate))


# ---------------------------------------------------------------------------
# Mexican-Hat continuous wavelet transform
# ---------------------------------------------------------------------------


def mexican_hat(t):
    """Unit-energy Mexican-Hat (Ricker) mother wavelet."""
    t = np.asarray(t, dtype=np.float64)
    return 2.0 / (math.sqrt(3.0) * math.pi ** 0.25) * (1.0 - t * t) * np.exp(-0.5 * t * t)


def default_scales(n: int = 20, lo: float = 1.0, hi: float = 50.0) -> np.ndarray:
    """Geometric scale ladder ``lo * (hi/lo) ** (k/(n-1))``; 20 scales from 1 to 50."""
    k = np.arange(n, dtype=np.float64)
    return lo * (hi / lo) ** (k / (n - 1))


def scale_to_frequency(scale, sample_rate: float,
                       center_frequency: float = MEXICAN_HAT_CENTER_FREQUENCY):
    return center_frequency * sample_rate / np.asarray(scale, dtype=np.float64)


def cwt_mexican_hat(audio, scales: Sequence[float] | None = None,
                    sample_rate: int | None = None) -> Scalogram:
    """CWT with the scaled wavelet ``psi(d / a) / sqrt(a)`` at every sample shift.

    Samples outside the signal count as zero. The kernel is cut at ``10 a``
    (or the signal length, whichever is shorter), beyond which the wavelet
    is below 1e-19.
    """
    x = _as_array(audio)
    if sample_rate is None:
        sample_rate = audio.sample_rate if isinstance(audio, AudioBuffer) else DEFAULT_SAMPLE_RATE
    scales = default_scales() if scales is None else np.asarray(scales, dtype=np.float64)
    if scales.size == 0:
        raise InvalidInputError("cwt_mexican_hat needs at least one scale")
    if np.any(scales < 1.0):
        raise InvalidInputError("scales must all be >= 1")
    if np.any(np.diff(scales) <= 0):
        raise InvalidInputError("scales must be strictly increasing")
    n = x.size
    out = np.empty((scales.size, n))
    for row, a in enumerate(scales):
        half = max(min(math.ceil(10.0 * a), n - 1), 0)
        offsets = np.arange(-half, half + 1, dtype=np.float64)
        kernel = mexican_hat(offsets / a) / math.sqrt(a)
        # correlation; the wavelet is symmetric, reversal kept for clarity
        full = convolve(x, kernel[::-1], mode="full")
        out[row] = full[half:half + n]
    return Scalogram(out, scales, int(sample_rate))


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------


def _minmax_to_byte(a: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 255] floats; a constant array maps to zeros."""
    lo, hi = float(a.min()), float(a.max())
    if hi - lo <= 0.0:
        return np.zeros(a.shape)
    return (a - lo) / (hi - lo) * 255.0


def _to_uint8(a: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(a), 0, 255).astype(np.uint8)


def _linear_axis(n_in: int, n_out: int):
    if n_in == 1 or n_out == 1:
        src = np.zeros(n_out)
    else:
        src = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    i0 = np.floor(src).astype(int)
    i0 = np.minimum(i0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling grids."""
    a = np.asarray(a, dtype=np.float64)
    r0, r1, rf = _linear_axis(a.shape[0], out_h)
    rows = a[r0] * (1.0 - rf)[:, None] + a[r1] * rf[:, None]
    c0, c1, cf = _linear_axis(a.shape[1], out_w)
    return rows[:, c0] * (1.0 - cf) + rows[:, c1] * cf


def rasterize_waveform(audio, size: int = DEFAULT_WINDOW) -> ImagePlane:
    """Column ``j`` lit from the middle row to ``mid * (1 - x[j])``."""
    x = _as_array(audio)
    if x.size != size:
        raise InvalidInputError(f"waveform has {x.size} samples, expected {size}")
    mid = size // 2
    tip = np.rint(mid * (1.0 - np.clip(x, -1.0, 1.0))).astype(int)
    tip = np.clip(tip, 0, size - 1)
    lo = np.minimum(tip, mid)
    hi = np.maximum(tip, mid)
    rows = np.arange(size)[:, None]
    lit = (rows >= lo[None, :]) & (rows <= hi[None, :])
    return ImagePlane(np.where(lit, 255, 0).astype(np.uint8), "waveform")


def rasterize_scalogram(s: Scalogram, size: int = DEFAULT_WINDOW) -> ImagePlane:
    """|coefficients| scaled to bytes, each scale row stretched into a block.

    The smallest scale sits at the top so low frequencies end up at the
    bottom. Every block is ``size // n_scales`` rows; the bottom block
    absorbs the remainder.
    """
    coef = np.asarray(s.coefficients)
    n_scales, n_cols = coef.shape
    if n_cols != size:
        raise InvalidInputError(f"scalogram has {n_cols} columns, expected {size}")
    if n_scales > size:
        raise InvalidInputError(f"cannot fit {n_scales} scale rows into {size} pixels")
    norm = _minmax_to_byte(np.abs(coef))
    repeats = np.full(n_scales, size // n_scales)
    repeats[-1] += size - repeats.sum()
    return ImagePlane(_to_uint8(np.repeat(norm, repeats, axis=0)), "cwt")


def rasterize_spectrogram(m: SpectrogramMatrix, size: int = DEFAULT_WINDOW) -> ImagePlane:
    db = 20.0 * np.log10(np.asarray(m.magnitudes) + DB_FLOOR)
    norm = _minmax_to_byte(db)[::-1]  # frequency bin 0 at the bottom
    return ImagePlane(_to_uint8(resize_bilinear(norm, size, size)), "spectrogram")


def window_spectrogram(audio, frame_length: int = 16, hop: int = 1) -> SpectrogramMatrix:
    """STFT padded so a hop-1 analysis yields one frame per input sample.

    ``frame_length - 1`` samples of symmetric (mirror) padding are split
    between the ends, the extra one going to the right.
    """
    x = _as_array(audio)
    sr = audio.sample_rate if isinstance(audio, AudioBuffer) else DEFAULT_SAMPLE_RATE
    total = frame_length - 1
    padded = np.pad(x, (total // 2, total - total // 2), mode="symmetric")
    return stft(padded, frame_length, hop, sample_rate=sr)


def scwtspec_planes(audio, size: int = DEFAULT_WINDOW,
                    scales: Sequence[float] | None = None) -> tuple[ImagePlane, ImagePlane, ImagePlane]:
    """Waveform, scalogram and spectrogram planes for one analysis window."""
    buf = audio if isinstance(audio, AudioBuffer) else AudioBuffer(audio)
    red = rasterize_waveform(buf, size)
    green = rasterize_scalogram(cwt_mexican_hat(buf, scales), size)
    blue = rasterize_spectrogram(window_spectrogram(buf), size)
    return red, green, blue

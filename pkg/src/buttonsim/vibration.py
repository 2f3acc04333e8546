"""Vibration onset detection, feature extraction, decaying-sinusoid templates,
and waveform synthesis for the render engine's vibration channel."""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass, asdict

import numpy as np

from .capture import GRID_STEP_MM
from .errors import FeatureError, ValidationError

MAX_AMPLITUDE_V = 2.43
FREQUENCY_RANGE_HZ = (50.0, 20000.0)
# Fraction of travel ignored at each end when looking for the burst: head and
# tail transients come from the finger hitting the keycap / the keycap hitting
# the bottom, not from the snap.
EDGE_EXCLUDE_FRACTION = 0.15
DEFAULT_ONSET_THRESHOLD = 5.0


@dataclass
class VibrationDescriptor:
    onset_mm: float
    duration_ms: float
    frequency_hz: float
    template_id: str = ""

    def validate(self, travel_range_mm: float) -> None:
        if not (0 < self.onset_mm < travel_range_mm):
            raise ValidationError(
                f"vibration onset {self.onset_mm:g} mm outside (0, {travel_range_mm:g})"
            )
        if self.duration_ms <= 0:
            raise ValidationError("vibration duration must be positive")
        lo, hi = FREQUENCY_RANGE_HZ
        if not (lo <= self.frequency_hz <= hi):
            raise ValidationError(
                f"vibration frequency {self.frequency_hz:g} Hz outside [{lo:g}, {hi:g}]"
            )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WaveTemplate:
    """Linear-decay sinusoid: amplitude runs from amplitude_start_v down to
    amplitude_end_v over duration_ms."""

    frequency_hz: float
    duration_ms: float
    amplitude_start_v: float
    amplitude_end_v: float
    template_id: str
    envelope: str = "linear-decay"

    def __post_init__(self):
        if abs(self.amplitude_start_v) > MAX_AMPLITUDE_V + 1e-12:
            raise ValidationError(f"amplitude exceeds +/-{MAX_AMPLITUDE_V} V")
        if abs(self.amplitude_end_v) > abs(self.amplitude_start_v) + 1e-12:
            raise ValidationError("end amplitude cannot exceed start amplitude")

    def to_dict(self) -> dict:
        return asdict(self)


def detect_onset(
    sound_per_bin: np.ndarray,
    travel_range_mm: float,
    threshold: float = DEFAULT_ONSET_THRESHOLD,
) -> float | None:
    """First displacement in the central travel region where the sound channel
    departs from its baseline by threshold * sigma. None when nothing fires,
    which routes the model to the human-in-the-loop path."""
    sound = np.asarray(sound_per_bin, dtype=float)
    n = len(sound)
    lo = int(math.floor(n * EDGE_EXCLUDE_FRACTION))
    hi = int(math.ceil(n * (1.0 - EDGE_EXCLUDE_FRACTION)))
    central = sound[lo:hi]
    if central.size == 0:
        return None
    baseline = float(np.median(central))
    sigma = 1.4826 * float(np.median(np.abs(central - baseline)))  # MAD estimate
    if sigma <= 0:
        sigma = 1e-12
    above = np.abs(central - baseline) > threshold * sigma
    if not np.any(above):
        return None
    return float((lo + int(np.argmax(above))) * GRID_STEP_MM)


def extract_features(samples: np.ndarray, sample_rate_hz: float) -> tuple[float, float]:
    """(duration_ms, frequency_hz) of a burst window.

    Duration is the span where the rectified envelope stays above 10% of its
    peak; frequency is the mean zero-crossing rate over that span, with
    crossing times interpolated between samples.
    """
    x = np.asarray(samples, dtype=float)
    x = x - np.mean(x)
    if x.size < 4:
        raise FeatureError("window too short for feature extraction")
    env = np.abs(x)
    peak = float(np.max(env))
    if peak <= 0:
        raise FeatureError("window has no signal")
    above = np.where(env > 0.1 * peak)[0]
    span = slice(int(above[0]), int(above[-1]) + 1)
    duration_ms = (span.stop - span.start) / sample_rate_hz * 1000.0

    seg = x[span]
    signs = np.sign(seg)
    signs[signs == 0] = 1
    flips = np.where(np.diff(signs) != 0)[0]
    if len(flips) < 2:
        raise FeatureError("no oscillation in window (needs two zero crossings)")
    # Linear interpolation of each crossing instant.
    t_cross = flips + seg[flips] / (seg[flips] - seg[flips + 1])
    half_period = float(np.mean(np.diff(t_cross)))  # in samples
    frequency_hz = sample_rate_hz / (2.0 * half_period)
    if duration_ms < 1000.0 / frequency_hz:
        raise FeatureError("window shorter than one oscillation period")
    return duration_ms, frequency_hz


def generate_templates(
    duration_ms: float,
    frequency_hz: float,
    end_amplitudes_v: tuple[float, ...] = (0.0, 0.3, 0.6),
    frequency_spread: float = 0.2,
) -> list[WaveTemplate]:
    """Template bank around the measured burst.

    End amplitudes vary the decay floor; frequency variants sit at
    +/- frequency_spread around the measurement.
    """
    templates = []
    for f_scale in (1.0, 1.0 - frequency_spread, 1.0 + frequency_spread):
        freq = frequency_hz * f_scale
        for end_v in end_amplitudes_v:
            tid = f"f{freq:.0f}hz_d{duration_ms:.0f}ms_e{end_v:.1f}v"
            templates.append(
                WaveTemplate(
                    frequency_hz=freq,
                    duration_ms=duration_ms,
                    amplitude_start_v=MAX_AMPLITUDE_V,
                    amplitude_end_v=end_v,
                    template_id=tid,
                )
            )
    return templates


def template_distance(t: WaveTemplate, duration_ms: float, frequency_hz: float) -> float:
    """Relative distance between a template and measured burst features."""
    return abs(t.frequency_hz - frequency_hz) / max(frequency_hz, 1e-9) + abs(
        t.duration_ms - duration_ms
    ) / max(duration_ms, 1e-9)


def synthesize(template: WaveTemplate, sample_rate_hz: float) -> np.ndarray:
    """Sample the template at t = k / rate for k = 0 .. floor(duration * rate)."""
    if sample_rate_hz < 2.0 * template.frequency_hz:
        raise ValidationError(
            f"sample rate {sample_rate_hz:g} Hz below Nyquist for "
            f"{template.frequency_hz:g} Hz"
        )
    duration_s = template.duration_ms / 1000.0
    count = int(math.floor(duration_s * sample_rate_hz)) + 1
    t = np.arange(count) / sample_rate_hz
    envelope = template.amplitude_start_v + (
        template.amplitude_end_v - template.amplitude_start_v
    ) * (t / duration_s)
    return envelope * np.sin(2.0 * math.pi * template.frequency_hz * t)


def write_wav(path, samples_v: np.ndarray, sample_rate_hz: int) -> None:
    """16-bit PCM mono export; full scale maps to the +/-2.43 V drive limit."""
    scaled = np.clip(samples_v / MAX_AMPLITUDE_V, -1.0, 1.0)
    pcm = (scaled * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate_hz))
        w.writeframes(pcm.tobytes())


def read_wav(path) -> tuple[np.ndarray, int]:
    with wave.open(str(path), "rb") as w:
        rate = w.getframerate()
        frames = w.readframes(w.getnframes())
    pcm = np.array(struct.unpack(f"<{len(frames) // 2}h", frames), dtype=float)
    return pcm / 32767.0 * MAX_AMPLITUDE_V, rate

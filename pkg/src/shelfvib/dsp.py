"""Reference-aligned windowing and spectral magnitude features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .simulator import VibrationRecord

BAND_LO_HZ = 50
BAND_HI_HZ = 240
N_FEATURES = BAND_HI_HZ - BAND_LO_HZ + 1
WINDOW_S = 1.0
PRE_TRIGGER_S = 0.1


def rms_envelope(x: np.ndarray, sampling_rate: float, hop_s: float = 0.01) -> np.ndarray:
    """Trailing RMS over ``hop_s`` evaluated at every sample."""
    x = np.asarray(x, dtype=float)
    width = max(1, int(round(hop_s * sampling_rate)))
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    lo = np.maximum(np.arange(1, x.size + 1) - width, 0)
    energy = csum[1:] - csum[lo]
    return np.sqrt(np.maximum(energy, 0.0) / width)


def detect_onsets(
    reference,
    sampling_rate: float,
    threshold_factor: float = 5.0,
    refractory_s: float = 1.5,
    hop_s: float = 0.01,
    floor_fraction: float = 1e-4,
) -> np.ndarray:
    """Onset times (s) of excitation bursts on the reference channel.

    An onset is the first sample whose 10 ms RMS envelope rises above
    ``threshold_factor`` times the median of the frame RMS values (frames on
    a ``hop_s`` grid). The threshold never drops below ``floor_fraction`` of
    the envelope peak, so records that are mostly silence still trigger at
    the burst edge. Onsets closer than ``refractory_s`` to the previous one
    are suppressed. A silent channel yields an empty array.
    """
    x = np.asarray(reference, dtype=float)
    if x.size == 0:
        raise ValueError("reference channel is empty")
    env = rms_envelope(x, sampling_rate, hop_s)
    peak = float(env.max())
    if peak <= 0:
        return np.empty(0)
    width = max(1, int(round(hop_s * sampling_rate)))
    frames = env[width - 1 :: width]
    threshold = max(threshold_factor * float(np.median(frames)), floor_fraction * peak)
    quiet = frames[frames <= threshold]
    # backtrack each trigger to where the envelope left the quiet-frame floor
    floor = max(float(np.median(quiet)) if quiet.size else 0.0, floor_fraction * peak)
    floor = min(floor, threshold)
    above = env > threshold
    rising = np.flatnonzero(above & ~np.concatenate([[False], above[:-1]]))
    active = env > floor
    run_start = np.maximum.accumulate(
        np.where(active & ~np.concatenate([[False], active[:-1]]), np.arange(env.size), 0)
    )
    refractory = int(round(refractory_s * sampling_rate))
    onsets = []
    last = None
    for i in rising:
        if last is None or i - last >= refractory:
            onsets.append(i)
            last = i
    starts = [int(run_start[i]) for i in onsets]
    return np.asarray(starts, dtype=float) / sampling_rate


@dataclass(frozen=True, eq=False)
class SampleWindow:
    samples: np.ndarray  # (channels, n)
    onset_time_s: float
    sampling_rate_hz: float
    channel_roles: tuple
    window_s: float = WINDOW_S
    pre_trigger_s: float = PRE_TRIGGER_S

    @property
    def start_time_s(self) -> float:
        return self.onset_time_s - self.pre_trigger_s


def segment(
    record: VibrationRecord,
    onsets: Sequence[float],
    window_s: float = WINDOW_S,
    pre_trigger_s: float = PRE_TRIGGER_S,
) -> list:
    """Cut one window per onset; windows overrunning the record are dropped."""
    fs = record.sampling_rate_hz
    n = int(round(window_s * fs))
    total = record.samples.shape[1]
    windows = []
    for t in onsets:
        start = int(round((t - pre_trigger_s) * fs))
        if start < 0 or start + n > total:
            continue
        windows.append(
            SampleWindow(
                record.samples[:, start : start + n],
                float(t),
                fs,
                record.channel_roles,
                window_s,
                pre_trigger_s,
            )
        )
    return windows


@dataclass(frozen=True, eq=False)
class FeatureVector:
    magnitudes: np.ndarray
    channel: int
    onset_time_s: float = float("nan")

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float)
        if mags.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} entries, got {mags.shape}")
        if not np.all(np.isfinite(mags)) or np.any(mags < 0):
            raise ValueError("feature magnitudes must be finite and non-negative")
        object.__setattr__(self, "magnitudes", mags)


def band_magnitudes(x, sampling_rate: float, lo_hz: int = BAND_LO_HZ, hi_hz: int = BAND_HI_HZ):
    """|DFT| / fs at integer frequencies lo..hi of a 1 s block (last axis)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n != int(round(sampling_rate)) or abs(sampling_rate - n) > 1e-9:
        raise ValueError(
            f"feature extraction needs exactly 1.0 s of samples ({sampling_rate} Hz), got {n}"
        )
    if sampling_rate <= 2 * hi_hz:
        raise ValueError("sampling rate too low for the feature band")
    spec = np.fft.rfft(x, axis=-1)
    return np.abs(spec[..., lo_hz : hi_hz + 1]) / sampling_rate


def extract_features(window: SampleWindow, channel_id: int) -> FeatureVector:
    """Rectangular-window spectral magnitudes of one channel, 50..240 Hz in 1 Hz bins."""
    if abs(window.samples.shape[1] - window.sampling_rate_hz) > 1e-9:
        raise ValueError(
            f"window holds {window.samples.shape[1]} samples; 1.0 s at "
            f"{window.sampling_rate_hz} Hz is required"
        )
    mags = band_magnitudes(window.samples[channel_id], window.sampling_rate_hz)
    return FeatureVector(mags, channel_id, window.onset_time_s)


def featurize_record(
    record: VibrationRecord,
    channels: Optional[Sequence[int]] = None,
    *,
    threshold_factor: float = 5.0,
    refractory_s: float = 1.5,
    window_s: float = WINDOW_S,
    pre_trigger_s: float = PRE_TRIGGER_S,
) -> np.ndarray:
    """Features of every complete burst window: array ``(windows, channels, 191)``."""
    if channels is None:
        channels = record.shelf_indices
    onsets = detect_onsets(
        record.reference, record.sampling_rate_hz, threshold_factor, refractory_s
    )
    windows = segment(record, onsets, window_s, pre_trigger_s)
    if not windows:
        return np.empty((0, len(channels), N_FEATURES))
    block = np.stack([w.samples[list(channels)] for w in windows])
    return band_magnitudes(block, record.sampling_rate_hz)

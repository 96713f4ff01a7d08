"""Synthetic shelf recordings under a periodic sinc excitation.

Synthesis runs in the frequency domain on the record's own FFT grid: the
shelf channel is the inverse transform of the plate transfer function times
the transform of the excitation. The record is therefore one period of the
steady-state response to a burst train that has been running indefinitely.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .plate import (
    DEFAULT_TRUNCATION,
    PlateModel,
    PointLoad,
    ResonanceError,
    SensorPosition,
    transfer_matrix,
)

REFERENCE = "reference"
SHELF = "shelf"
NOISE_BAND_HZ = (50.0, 240.0)
MIN_PERIOD_S = 1.2  # pre-trigger plus window plus margin


def derive_seed(master: int, purpose: str, *indices) -> int:
    """Per-purpose 64-bit seed: SHA-256 of ``"master|purpose|i|j|..."``."""
    key = "|".join([str(int(master)), purpose, *(str(i) for i in indices)])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class ImpulseTrainSpec:
    central_frequency: float = 10.0
    period_s: float = 2.0
    amplitude: float = 1.0
    count: int = 1
    sinc_half_width_s: float = 0.5
    taper_s: float = 0.01

    def __post_init__(self):
        if self.period_s <= 0:
            raise ValueError("period_s must be positive")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.central_frequency <= 0:
            raise ValueError("central_frequency must be positive")
        if not 0 < self.sinc_half_width_s <= self.period_s / 2:
            raise ValueError("sinc_half_width_s must lie in (0, period_s / 2]")
        if not 0 <= self.taper_s <= self.sinc_half_width_s:
            raise ValueError("taper_s must lie in [0, sinc_half_width_s]")

    @property
    def duration_s(self) -> float:
        return self.count * self.period_s

    def burst_centers(self) -> np.ndarray:
        return (np.arange(self.count) + 0.5) * self.period_s

    def burst_starts(self) -> np.ndarray:
        """Start of each burst's support; what onset detection should find."""
        return self.burst_centers() - self.sinc_half_width_s

    def waveform(self, sampling_rate: float) -> np.ndarray:
        n = int(round(self.duration_s * sampling_rate))
        t = np.arange(n) / sampling_rate
        out = np.zeros(n)
        for tc in self.burst_centers():
            out += self.amplitude * _tapered_sinc(
                t - tc, self.central_frequency, self.sinc_half_width_s, self.taper_s
            )
        return out


def _tapered_sinc(tau, fc, half_width, taper):
    """``sinc(2 fc tau)`` on ``|tau| <= half_width`` with Hann ramps of length ``taper``."""
    out = np.sinc(2.0 * fc * tau)
    edge = half_width - np.abs(tau)
    out = np.where(edge >= 0, out, 0.0)
    if taper > 0:
        ramp = np.clip(edge / taper, 0.0, 1.0)
        out = out * 0.5 * (1.0 - np.cos(np.pi * ramp))
    return out


@dataclass(frozen=True, eq=False)
class VibrationRecord:
    samples: np.ndarray  # (channels, n)
    sampling_rate_hz: float
    channel_roles: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 2:
            raise ValueError("samples must be a (channels, n) array")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_roles", tuple(self.channel_roles))
        if len(self.channel_roles) != samples.shape[0]:
            raise ValueError("one role per channel required")
        if sum(r == REFERENCE for r in self.channel_roles) != 1:
            raise ValueError("exactly one reference channel required")
        bad = set(self.channel_roles) - {REFERENCE, SHELF}
        if bad:
            raise ValueError(f"unknown channel roles {sorted(bad)}")
        if not self.sampling_rate_hz > 2 * 240.0:
            raise ValueError("sampling rate must exceed 480 Hz")

    @property
    def duration_s(self) -> float:
        return self.samples.shape[1] / self.sampling_rate_hz

    @property
    def reference_index(self) -> int:
        return self.channel_roles.index(REFERENCE)

    @property
    def reference(self) -> np.ndarray:
        return self.samples[self.reference_index]

    @property
    def shelf_indices(self) -> list:
        return [i for i, r in enumerate(self.channel_roles) if r == SHELF]


@dataclass(frozen=True)
class SimulationSetup:
    """Everything fixed across a dataset except load and noise draws."""

    plate: PlateModel = PlateModel()
    source: tuple = (0.80, 0.10)
    sensors: tuple = (
        SensorPosition(0.8644, 0.2336),
        SensorPosition(0.4572, 0.05),
        SensorPosition(0.05, 0.2336),
    )
    train: ImpulseTrainSpec = ImpulseTrainSpec()
    sampling_rate_hz: float = 51200.0
    truncation: tuple = DEFAULT_TRUNCATION

    def validate(self) -> None:
        if not self.plate.contains(*self.source):
            raise ValueError(f"excitation source {self.source} lies outside the plate")
        for s in self.sensors:
            s.validate(self.plate)
        if self.train.period_s < MIN_PERIOD_S:
            raise ValueError(f"impulse period must be at least {MIN_PERIOD_S} s to hold one analysis window")
        n = self.train.duration_s * self.sampling_rate_hz
        if abs(n - round(n)) > 1e-6:
            raise ValueError("record duration must map to an integer sample count")


def clean_response(setup: SimulationSetup, load: PointLoad) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free (reference, shelf) channels for one load; shelf is (sensors, n)."""
    setup.validate()
    load.validate(setup.plate)
    fs = setup.sampling_rate_hz
    ref = setup.train.waveform(fs)
    n = ref.size
    omega = 2 * np.pi * np.fft.rfftfreq(n, d=1.0 / fs)
    h = transfer_matrix(
        setup.plate,
        load,
        setup.source,
        setup.sensors,
        omega,
        truncation=setup.truncation,
        zeta=setup.plate.modal_damping_zeta,
    )
    spec = np.fft.rfft(ref)
    shelf = np.fft.irfft(h.T * spec[None, :], n=n, axis=1)
    return ref, shelf


def band_power(x: np.ndarray, sampling_rate: float, band=NOISE_BAND_HZ) -> np.ndarray:
    """Mean power of ``x`` (last axis) carried by frequencies inside ``band``."""
    n = x.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / sampling_rate)
    sel = (freqs >= band[0]) & (freqs <= band[1])
    spec = np.fft.rfft(x, axis=-1)[..., sel]
    return 2.0 * np.sum(np.abs(spec) ** 2, axis=-1) / n**2


def noise_sigma(
    shelf: np.ndarray, snr_db: float, sampling_rate: float, band=NOISE_BAND_HZ
) -> np.ndarray:
    """Per-channel white-noise std giving ``snr_db`` inside ``band``.

    White noise of variance s^2 puts ``2 k s^2 / n`` of power into the ``k``
    one-sided bins of the band, so the in-band ratio is exact in expectation.
    """
    n = shelf.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / sampling_rate)
    k = int(np.count_nonzero((freqs >= band[0]) & (freqs <= band[1])))
    target = band_power(shelf, sampling_rate, band) / 10.0 ** (snr_db / 10.0)
    return np.sqrt(target * n / (2.0 * k))


def add_noise(
    shelf: np.ndarray,
    snr_db: Optional[float],
    rng: np.random.Generator,
    sampling_rate: float = 51200.0,
    band=NOISE_BAND_HZ,
    sigma: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Add white Gaussian noise at ``snr_db`` measured inside the feature band.

    ``None`` or ``inf`` means noise-free. ``sigma`` short-circuits the
    calibration when the caller already knows it.
    """
    if snr_db is None or np.isinf(snr_db):
        return shelf.copy()
    if sigma is None:
        sigma = noise_sigma(shelf, snr_db, sampling_rate, band)
    sigma = np.asarray(sigma, dtype=float).reshape(-1, 1)
    return shelf + sigma * rng.standard_normal(shelf.shape)


def measured_snr_db(clean: np.ndarray, noisy: np.ndarray, sampling_rate: float, band=NOISE_BAND_HZ):
    """In-band SNR of ``noisy`` against its clean version, per channel."""
    return 10.0 * np.log10(
        band_power(clean, sampling_rate, band) / band_power(noisy - clean, sampling_rate, band)
    )


def synthesize_record(
    plate: PlateModel,
    load: PointLoad,
    sensors: Sequence[SensorPosition],
    train: ImpulseTrainSpec,
    noise_snr_db: Optional[float],
    seed: int,
    *,
    source: tuple = (0.80, 0.10),
    sampling_rate_hz: float = 51200.0,
    truncation=DEFAULT_TRUNCATION,
) -> VibrationRecord:
    """One multi-channel record: channel 0 is the clean excitation (reference).

    Raises :class:`ResonanceError` when damping is zero and an undamped pole
    falls on the FFT grid.
    """
    setup = SimulationSetup(plate, tuple(source), tuple(sensors), train, sampling_rate_hz, tuple(truncation))
    ref, shelf = clean_response(setup, load)
    rng = np.random.default_rng(seed)
    shelf = add_noise(shelf, noise_snr_db, rng, sampling_rate_hz)
    return VibrationRecord(
        np.vstack([ref[None, :], shelf]),
        sampling_rate_hz,
        (REFERENCE,) + (SHELF,) * len(sensors),
        {"mass_kg": load.mass_m0, "seed": int(seed)},
    )


@dataclass(frozen=True)
class SampleEntry:
    location_id: str
    weight_g: float
    sample_index: int
    seed: int
    file_name: str = ""


@dataclass
class DatasetManifest:
    setup: SimulationSetup
    locations: dict  # location_id -> (x0, y0)
    weights_g: list
    samples_per_class: int
    noise_snr_db: Optional[float]
    master_seed: int
    entries: list = field(default_factory=list)


def location_ids(n: int) -> list:
    return [f"L{i + 1}" for i in range(n)]


def generate_dataset(
    setup: SimulationSetup,
    locations: Sequence[tuple[float, float]],
    weights_g: Sequence[float],
    samples_per_class: int,
    noise_snr_db: Optional[float],
    seed: int,
    *,
    location_names: Optional[Sequence[str]] = None,
):
    """Yield ``(manifest, iterator of (entry, record))`` following the collection protocol.

    Records are produced lazily in manifest order; the clean response is
    computed once per (location, weight) class and only the noise differs
    between samples of a class.
    """
    if not locations or not weights_g:
        raise ValueError("locations and weights must be nonempty")
    if samples_per_class < 1:
        raise ValueError("samples_per_class must be >= 1")
    setup.validate()
    names = list(location_names) if location_names is not None else location_ids(len(locations))
    for name, (x, y) in zip(names, locations):
        if not setup.plate.contains(x, y):
            raise ValueError(f"location {name} ({x}, {y}) lies outside the plate")
    manifest = DatasetManifest(
        setup, dict(zip(names, map(tuple, locations))), list(weights_g), samples_per_class,
        noise_snr_db, int(seed),
    )
    for li, name in enumerate(names):
        for wi, w in enumerate(weights_g):
            for k in range(samples_per_class):
                manifest.entries.append(
                    SampleEntry(name, float(w), k, derive_seed(seed, "noise", li, wi, k),
                                f"{name}_w{_fmt_weight(w)}_s{k:03d}.wvb")
                )

    def records():
        cache_key, shelf, ref = None, None, None
        for e in manifest.entries:
            key = (e.location_id, e.weight_g)
            if key != cache_key:
                x, y = manifest.locations[e.location_id]
                ref, shelf = clean_response(setup, PointLoad(e.weight_g / 1000.0, x, y))
                sigma = None
                if noise_snr_db is not None and not np.isinf(noise_snr_db):
                    sigma = noise_sigma(shelf, noise_snr_db, setup.sampling_rate_hz)
                cache_key = key
            noisy = add_noise(shelf, noise_snr_db, np.random.default_rng(e.seed), sigma=sigma)
            yield e, VibrationRecord(
                np.vstack([ref[None, :], noisy]),
                setup.sampling_rate_hz,
                (REFERENCE,) + (SHELF,) * len(setup.sensors),
            )

    return manifest, records()


def _fmt_weight(w: float) -> str:
    return f"{w:g}".replace(".", "p")


__all__ = [
    "ImpulseTrainSpec",
    "VibrationRecord",
    "SimulationSetup",
    "DatasetManifest",
    "SampleEntry",
    "ResonanceError",
    "synthesize_record",
    "generate_dataset",
    "clean_response",
    "add_noise",
    "derive_seed",
]

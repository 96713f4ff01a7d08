"""Labelled feature tables built from records, containers, or the simulator."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import io
from .dsp import N_FEATURES, featurize_record
from .plate import PointLoad
from .simulator import (
    SimulationSetup,
    VibrationRecord,
    add_noise,
    clean_response,
    derive_seed,
    generate_dataset,
    noise_sigma,
)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Features ``X[sample, sensor, bin]`` with per-sample labels.

    ``sensor_ids[j]`` names the physical sensor behind ``X[:, j]``; lookups
    go through the id, never the storage position.
    """

    X: np.ndarray
    sensor_ids: tuple
    weights_g: np.ndarray
    location_ids: np.ndarray
    sample_index: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        if self.X.ndim != 3 or self.X.shape[1:] != (len(self.sensor_ids), N_FEATURES):
            raise ValueError(f"feature block has shape {self.X.shape}")
        n = self.X.shape[0]
        if not (len(self.weights_g) == len(self.location_ids) == len(self.sample_index) == n):
            raise ValueError("labels and features disagree in length")

    def __len__(self):
        return self.X.shape[0]

    @property
    def locations(self) -> list:
        return list(dict.fromkeys(self.location_ids.tolist()))

    def matrix(self, sensor_ids: Sequence[int]) -> np.ndarray:
        """Concatenated features of the chosen sensors in ascending id order."""
        cols = []
        for sid in sorted(set(int(s) for s in sensor_ids)):
            if sid not in self.sensor_ids:
                raise KeyError(f"sensor {sid} not in table (have {self.sensor_ids})")
            cols.append(self.X[:, self.sensor_ids.index(sid)])
        return np.concatenate(cols, axis=1)

    def subset(self, rows) -> "FeatureTable":
        rows = np.asarray(rows)
        names = tuple(np.asarray(self.names, dtype=object)[rows]) if self.names else ()
        return FeatureTable(
            self.X[rows], self.sensor_ids, self.weights_g[rows], self.location_ids[rows],
            self.sample_index[rows], names,
        )

    def find(self, ref: str) -> int:
        """Row of a sample given its file name or ``location/weight/index``."""
        if ref in self.names:
            return self.names.index(ref)
        parts = ref.split("/")
        if len(parts) == 3:
            loc, w, k = parts
            hit = np.flatnonzero(
                (self.location_ids == loc)
                & (self.weights_g == float(w))
                & (self.sample_index == int(k))
            )
            if hit.size == 1:
                return int(hit[0])
        raise KeyError(f"no sample matches {ref!r}")

    def to_kv(self) -> dict:
        return {
            "kind": "feature-table",
            "X": self.X,
            "sensor_ids": np.asarray(self.sensor_ids, dtype=np.int64),
            "weights_g": np.asarray(self.weights_g, dtype=float),
            "sample_index": np.asarray(self.sample_index, dtype=np.int64),
            "location_ids": "\n".join(self.location_ids.tolist()),
            "names": "\n".join(self.names),
        }

    @classmethod
    def from_kv(cls, d) -> "FeatureTable":
        if d.get("kind") != "feature-table":
            raise io.FormatError("not a feature-table file")
        names = tuple(d["names"].split("\n")) if d["names"] else ()
        return cls(
            np.asarray(d["X"], dtype=float),
            tuple(int(s) for s in d["sensor_ids"]),
            np.asarray(d["weights_g"], dtype=float),
            np.asarray(d["location_ids"].split("\n"), dtype=object),
            np.asarray(d["sample_index"], dtype=np.int64),
            names,
        )


def featurize_entries(
    items: Iterable,
    channel_sensor_ids: Sequence[Optional[int]],
    *,
    threshold_factor: float = 5.0,
    refractory_s: float = 1.5,
    pre_trigger_s: float = 0.1,
) -> FeatureTable:
    """Featurise ``(entry, record)`` pairs; the first complete burst window of each record is used.

    ``channel_sensor_ids[c]`` is the sensor id stored in channel ``c`` (None
    for the reference). Entries are mappings or objects with
    ``location_id``, ``weight_g``, ``sample_index`` and a file name.
    """
    order = sorted(
        (sid, c) for c, sid in enumerate(channel_sensor_ids) if sid is not None
    )
    channels = [c for _, c in order]
    sensor_ids = tuple(sid for sid, _ in order)
    rows, w, loc, idx, names = [], [], [], [], []
    for entry, record in items:
        get = entry.get if isinstance(entry, dict) else lambda k, e=entry: getattr(e, k)
        name = get("file") if isinstance(entry, dict) else entry.file_name
        feats = featurize_record(
            record, channels, threshold_factor=threshold_factor, refractory_s=refractory_s,
            pre_trigger_s=pre_trigger_s,
        )
        if feats.shape[0] == 0:
            raise ValueError(f"no complete burst window found in sample {name!r}")
        rows.append(feats[0])
        w.append(float(get("weight_g")))
        loc.append(str(get("location_id")))
        idx.append(int(get("sample_index")))
        names.append(str(name))
    X = np.stack(rows) if rows else np.empty((0, len(sensor_ids), N_FEATURES))
    return FeatureTable(
        X, sensor_ids, np.asarray(w), np.asarray(loc, dtype=object), np.asarray(idx, dtype=np.int64),
        tuple(names),
    )


def featurize_container(dataset_dir, **pipeline) -> FeatureTable:
    man = io.read_manifest(dataset_dir)
    channel_ids = [c.get("sensor_id") if c["role"] == "shelf" else None for c in man["channels"]]
    return featurize_entries(io.iter_dataset(dataset_dir, man), channel_ids, **pipeline)


@functools.lru_cache(maxsize=48)
def _cached_clean(setup: SimulationSetup, load: PointLoad):
    ref, shelf = clean_response(setup, load)
    ref.setflags(write=False)
    shelf.setflags(write=False)
    return ref, shelf


def simulate_table(
    setup: SimulationSetup,
    locations: dict,
    weights_g: Sequence[float],
    samples_per_class: int,
    noise_snr_db: Optional[float],
    seed: int,
    *,
    physical_mass_g=None,
    **pipeline,
) -> FeatureTable:
    """Simulate and featurise a dataset in memory, without writing records.

    Equivalent to ``generate_dataset`` followed by featurisation of every
    record. ``physical_mass_g`` maps a label to the point mass actually
    placed on the plate (identity by default).
    """
    names = list(locations)
    manifest, _ = generate_dataset(
        setup, [locations[k] for k in names], weights_g, samples_per_class, noise_snr_db, seed,
        location_names=names,
    )
    mass = physical_mass_g or (lambda w: w)
    n_ch = len(setup.sensors)

    def records():
        for e in manifest.entries:
            x, y = manifest.locations[e.location_id]
            ref, shelf = _cached_clean(setup, PointLoad(mass(e.weight_g) / 1000.0, x, y))
            sigma = None
            if noise_snr_db is not None and not np.isinf(noise_snr_db):
                sigma = noise_sigma(shelf, noise_snr_db, setup.sampling_rate_hz)
            noisy = add_noise(shelf, noise_snr_db, np.random.default_rng(e.seed), sigma=sigma)
            yield e, VibrationRecord(
                np.vstack([ref[None, :], noisy]), setup.sampling_rate_hz,
                ("reference",) + ("shelf",) * n_ch,
            )

    return featurize_entries(records(), [None] + list(range(1, n_ch + 1)), **pipeline)


def table_from_config(cfg, seed: Optional[int] = None) -> FeatureTable:
    """Default protocol dataset (locations x weight ladder) featurised in memory."""
    names = [f"L{i + 1}" for i in range(len(cfg.geometry.locations))]
    p = cfg.pipeline
    return simulate_table(
        cfg.setup(),
        dict(zip(names, cfg.locations())),
        [float(w) for w in cfg.dataset.weights_g],
        int(cfg.dataset.samples_per_class),
        cfg.dataset.noise_snr_db,
        cfg.seed if seed is None else seed,
        threshold_factor=p.threshold_factor,
        refractory_s=p.refractory_s,
        pre_trigger_s=p.pre_trigger_s,
    )


def study_seed(master: int, i: int) -> int:
    """Seed of the ``i``-th repetition of a study (repetition 0 is the master seed)."""
    return int(master) if i == 0 else derive_seed(master, "study", i) % (2**31)

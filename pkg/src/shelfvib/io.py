"""On-disk formats: WVB1 signal files, dataset containers, key-value text, tables.

WVB1 layout (little-endian)::

    bytes 0-3    magic b"WVB1"
    bytes 4-7    channel count       uint32
    bytes 8-11   samples per channel uint32
    bytes 12-15  sampling rate, Hz   uint32
    payload      float32, channel-interleaved (frame by frame)

Key-value text files start with ``# shelfvib-kv 1`` and hold one entry per
line, tab separated: ``key  type  shape  values``. ``type`` is ``str``
(JSON string), ``int``, ``f64`` or ``i64``; ``shape`` is ``-`` for scalars
or ``d0xd1...``; floats are written with ``float.hex`` so a read returns
the exact bits that were written.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .simulator import REFERENCE, SHELF, VibrationRecord

MAGIC = b"WVB1"
HEADER = struct.Struct("<4sIII")
KV_HEADER = "# shelfvib-kv 1"
MANIFEST = "manifest.json"
DATASET_FORMAT = "shelfvib-dataset/1"


class FormatError(ValueError):
    """A file does not match its declared format."""


def write_record(path, record: VibrationRecord) -> None:
    fs = record.sampling_rate_hz
    if fs != int(fs):
        raise FormatError("WVB1 stores integer sampling rates only")
    data = np.ascontiguousarray(record.samples.T, dtype="<f4")
    channels, n = record.samples.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, channels, n, int(fs)))
        fh.write(data.tobytes())


def read_record(path, channel_roles=None) -> VibrationRecord:
    """Read a WVB1 file; roles default to channel 0 as reference, others shelf."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, channels, n, fs = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = channels * n * 4
    payload = len(raw) - HEADER.size
    if payload < expected:
        raise FormatError(f"{path}: truncated payload ({payload} of {expected} bytes)")
    if payload > expected:
        raise FormatError(f"{path}: {payload - expected} trailing bytes after payload")
    data = np.frombuffer(raw, dtype="<f4", count=channels * n, offset=HEADER.size)
    samples = data.reshape(n, channels).T.astype(np.float32)
    if channel_roles is None:
        channel_roles = (REFERENCE,) + (SHELF,) * (channels - 1)
    if len(channel_roles) != channels:
        raise FormatError(
            f"{path}: header declares {channels} channels, manifest lists {len(channel_roles)}"
        )
    return VibrationRecord(samples, float(fs), tuple(channel_roles))


# -- key-value text -------------------------------------------------------


def _fmt_float(x: float) -> str:
    return float(x).hex()


def dumps_kv(entries: Mapping) -> str:
    lines = [KV_HEADER]
    for key, value in entries.items():
        if any(c.isspace() for c in key) or not key:
            raise ValueError(f"invalid key {key!r}")
        if isinstance(value, str):
            lines.append(f"{key}\tstr\t-\t{json.dumps(value)}")
        elif isinstance(value, (bool, np.bool_)):
            lines.append(f"{key}\tint\t-\t{int(value)}")
        elif isinstance(value, (int, np.integer)):
            lines.append(f"{key}\tint\t-\t{int(value)}")
        elif isinstance(value, (float, np.floating)):
            lines.append(f"{key}\tf64\t-\t{_fmt_float(value)}")
        else:
            arr = np.asarray(value)
            shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "-"
            if arr.ndim == 0:
                raise ValueError(f"{key}: use a Python scalar for scalar values")
            if np.issubdtype(arr.dtype, np.integer):
                body = " ".join(str(int(v)) for v in arr.ravel())
                lines.append(f"{key}\ti64\t{shape}\t{body}")
            elif np.issubdtype(arr.dtype, np.floating):
                body = " ".join(_fmt_float(v) for v in arr.ravel())
                lines.append(f"{key}\tf64\t{shape}\t{body}")
            else:
                raise ValueError(f"{key}: unsupported value type {arr.dtype}")
    return "\n".join(lines) + "\n"


def loads_kv(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0].strip() != KV_HEADER:
        raise FormatError("missing key-value header line")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t", 3)
        if len(parts) != 4:
            raise FormatError(f"line {lineno}: expected 4 tab-separated fields")
        key, kind, shape, body = parts
        if key in out:
            raise FormatError(f"line {lineno}: duplicate key {key!r}")
        if kind == "str":
            out[key] = json.loads(body)
        elif kind == "int":
            out[key] = int(body)
        elif kind in ("f64", "i64"):
            if shape == "-":
                if kind == "i64":
                    raise FormatError(f"line {lineno}: scalar i64 is written as int")
                out[key] = float.fromhex(body)
                continue
            dims = tuple(int(d) for d in shape.split("x"))
            tokens = body.split() if body.strip() else []
            if len(tokens) != int(np.prod(dims)):
                raise FormatError(
                    f"line {lineno}: {key} declares shape {dims} but holds {len(tokens)} values"
                )
            if kind == "f64":
                arr = np.array([float.fromhex(t) for t in tokens], dtype=np.float64)
            else:
                arr = np.array([int(t) for t in tokens], dtype=np.int64)
            out[key] = arr.reshape(dims)
        else:
            raise FormatError(f"line {lineno}: unknown type {kind!r}")
    return out


def write_kv(path, entries: Mapping) -> None:
    Path(path).write_text(dumps_kv(entries))


def read_kv(path) -> dict:
    return loads_kv(Path(path).read_text())


# -- models ---------------------------------------------------------------


def model_to_kv(model) -> dict:
    return {
        "kind": "location-model",
        "location_id": model.location_id,
        "lambda": float(model.lam),
        "variance_target": float(model.variance_target),
        "pca.mean": model.pca.mean,
        "pca.components": model.pca.components,
        "pca.explained_ratio": model.pca.explained_ratio,
        "scores.mean": model.score_mean,
        "scores.scale": model.score_scale,
        "ridge.coef": model.coef,
        "ridge.intercept": float(model.intercept),
        "train.classes_g": np.asarray(model.classes_g, dtype=float),
        "train.samples_per_class": np.asarray(model.samples_per_class, dtype=np.int64),
        "sensor_ids": np.asarray(model.sensor_ids, dtype=np.int64),
    }


def model_from_kv(d: Mapping):
    from .estimator import LocationModel, PcaBasis

    if d.get("kind") != "location-model":
        raise FormatError("not a location-model file")
    try:
        return LocationModel(
            d["location_id"],
            PcaBasis(d["pca.mean"], np.atleast_2d(d["pca.components"]), d["pca.explained_ratio"]),
            d["scores.mean"],
            d["scores.scale"],
            d["ridge.coef"],
            d["ridge.intercept"],
            d["lambda"],
            d["variance_target"],
            tuple(float(c) for c in d["train.classes_g"]),
            tuple(int(c) for c in d["train.samples_per_class"]),
            tuple(int(s) for s in d["sensor_ids"]),
        )
    except KeyError as exc:
        raise FormatError(f"model file lacks key {exc.args[0]!r}") from None


def save_model(path, model) -> None:
    write_kv(path, model_to_kv(model))


def load_model(path):
    return model_from_kv(read_kv(path))


# -- dataset containers ---------------------------------------------------


def manifest_dict(manifest, channel_sensor_ids=None) -> dict:
    """JSON-ready description of a generated dataset."""
    setup = manifest.setup
    plate = setup.plate
    sensors = [
        {"id": i + 1, "x": s.pos_x, "y": s.pos_y} for i, s in enumerate(setup.sensors)
    ]
    if channel_sensor_ids is None:
        channel_sensor_ids = [None] + [s["id"] for s in sensors]
    channels = [
        {"role": REFERENCE} if sid is None else {"role": SHELF, "sensor_id": sid}
        for sid in channel_sensor_ids
    ]
    return {
        "format": DATASET_FORMAT,
        "plate": {
            "length_a": plate.length_a,
            "width_b": plate.width_b,
            "flexural_rigidity_D": plate.flexural_rigidity_D,
            "areal_density_rho": plate.areal_density_rho,
            "poisson_nu": plate.poisson_nu,
            "modal_damping_zeta": plate.modal_damping_zeta,
            "gravity_g": plate.gravity_g,
            "mass_coupling": plate.mass_coupling,
        },
        "source": list(setup.source),
        "sensors": sensors,
        "channels": channels,
        "sampling_rate_hz": setup.sampling_rate_hz,
        "impulse": {
            "central_frequency": setup.train.central_frequency,
            "period_s": setup.train.period_s,
            "amplitude": setup.train.amplitude,
            "count": setup.train.count,
            "sinc_half_width_s": setup.train.sinc_half_width_s,
            "taper_s": setup.train.taper_s,
        },
        "truncation": list(setup.truncation),
        "noise_snr_db": manifest.noise_snr_db,
        "master_seed": manifest.master_seed,
        "locations": {k: list(v) for k, v in manifest.locations.items()},
        "weights_g": list(manifest.weights_g),
        "samples_per_class": manifest.samples_per_class,
        "entries": [
            {
                "location_id": e.location_id,
                "weight_g": e.weight_g,
                "sample_index": e.sample_index,
                "file": e.file_name,
                "seed": e.seed,
            }
            for e in manifest.entries
        ],
    }


def write_dataset(out_dir, manifest, records: Iterable) -> Path:
    """Write every record as WVB1 plus ``manifest.json``; the directory must be new or empty."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if any(out.iterdir()):
        raise FileExistsError(f"{out} is not empty")
    for entry, record in records:
        write_record(out / entry.file_name, record)
    (out / MANIFEST).write_text(json.dumps(manifest_dict(manifest), indent=1) + "\n")
    return out


def read_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"no {MANIFEST} in {dataset_dir}")
    man = json.loads(path.read_text())
    if man.get("format") != DATASET_FORMAT:
        raise FormatError(f"{path}: unknown dataset format {man.get('format')!r}")
    roles = [c["role"] for c in man["channels"]]
    if roles.count(REFERENCE) != 1:
        raise FormatError(f"{path}: exactly one reference channel must be declared")
    for e in man["entries"]:
        if not (Path(dataset_dir) / e["file"]).is_file():
            raise FileNotFoundError(f"manifest entry references missing file {e['file']}")
    return man


def iter_dataset(dataset_dir, manifest=None):
    """Yield ``(entry dict, record)`` in manifest order, checking each file against it."""
    man = manifest if manifest is not None else read_manifest(dataset_dir)
    roles = tuple(c["role"] for c in man["channels"])
    fs = float(man["sampling_rate_hz"])
    expected_n = int(round(man["impulse"]["count"] * man["impulse"]["period_s"] * fs))
    for e in man["entries"]:
        rec = read_record(Path(dataset_dir) / e["file"], roles)
        if rec.sampling_rate_hz != fs:
            raise FormatError(f"{e['file']}: sampling rate differs from manifest")
        if rec.samples.shape[1] != expected_n:
            raise FormatError(
                f"{e['file']}: {rec.samples.shape[1]} samples, manifest implies {expected_n}"
            )
        yield e, rec


# -- tables ---------------------------------------------------------------


def format_table(rows, columns, delimiter: str = "\t") -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4f}"
    return v


def write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)

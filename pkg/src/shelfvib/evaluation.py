"""Weight-change evaluation and the four synthetic studies.

Errors are taken over every ordered pair of test samples at one location
whose true change is positive, i.e. each unordered pair of distinct
weights once. Repetitions draw fresh noise (simulated data) and fresh
training splits from seeds derived from the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import io
from .dataset import FeatureTable, featurize_container, simulate_table, study_seed, table_from_config
from .estimator import fit_linear, fit_quadratic, select_training
from .simulator import derive_seed

LOCAL = "per-location-linear"
GLOBAL = "global-linear"
QUADRATIC = "per-location-quadratic"
VARIANTS = (LOCAL, GLOBAL, QUADRATIC)

BIG_CHANGE_G = 100.0
TOLERANCE_G = 50.0

TABLE_COLUMNS = (
    "study", "cell", "variant", "classes_g", "fraction", "sensors",
    "mae_g", "std_g", "n_pairs", "seeds", "big_change_ok",
)


@dataclass(frozen=True, eq=False)
class ChangeErrors:
    """Pairwise weight-change outcomes; one entry per (before, after) pair."""

    predicted: np.ndarray
    true: np.ndarray
    location_ids: np.ndarray

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.predicted - self.true)

    @staticmethod
    def concat(parts: Sequence["ChangeErrors"]) -> "ChangeErrors":
        if not parts:
            return ChangeErrors(np.empty(0), np.empty(0), np.empty(0, dtype=object))
        return ChangeErrors(
            np.concatenate([p.predicted for p in parts]),
            np.concatenate([p.true for p in parts]),
            np.concatenate([p.location_ids for p in parts]),
        )


def change_errors(predictions, weights_g, location_ids) -> ChangeErrors:
    """All within-location pairs with a positive true change (after heavier than before)."""
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(weights_g, dtype=float)
    loc = np.asarray(location_ids, dtype=object)
    parts = []
    for lid in dict.fromkeys(loc.tolist()):
        rows = np.flatnonzero(loc == lid)
        before, after = np.nonzero(y[rows][None, :] > y[rows][:, None])
        b, a = rows[before], rows[after]
        parts.append(ChangeErrors(p[a] - p[b], y[a] - y[b], np.full(a.size, lid, dtype=object)))
    return ChangeErrors.concat(parts)


@dataclass(frozen=True)
class Summary:
    mae_g: float
    std_g: float
    n_pairs: int
    big_change_ok: float  # share of |true| >= 100 g changes with right sign and within 50 g

    @classmethod
    def of(cls, errs: ChangeErrors) -> "Summary":
        e = errs.abs_error
        if e.size == 0:
            return cls(float("nan"), float("nan"), 0, float("nan"))
        big = np.abs(errs.true) >= BIG_CHANGE_G
        ok = (np.sign(errs.predicted[big]) == np.sign(errs.true[big])) & (e[big] <= TOLERANCE_G)
        return cls(float(e.mean()), float(e.std()), int(e.size), float(ok.mean()) if big.any() else float("nan"))


def evaluate_weight_change(models: dict, table: FeatureTable, sensor_ids=None) -> Summary:
    """Score fitted per-location models on every sample of ``table``."""
    missing = sorted(set(table.locations) - set(models))
    if missing:
        raise KeyError(f"no model for location(s) {', '.join(missing)}")
    pred = np.empty(len(table))
    for lid in table.locations:
        rows = table.location_ids == lid
        sensors = sensor_ids or models[lid].sensor_ids
        pred[rows] = models[lid].predict(table.matrix(sensors)[rows])
    return Summary.of(change_errors(pred, table.weights_g, table.location_ids))


# -- one evaluation cell --------------------------------------------------------


@dataclass(frozen=True)
class CellSpec:
    study: str
    cell: str
    classes_g: tuple
    fraction: float
    sensors: tuple
    variant: str = LOCAL


@dataclass
class CellResult:
    spec: CellSpec
    summary: Summary
    seeds: int
    per_location: dict = field(default_factory=dict)  # location -> Summary
    seed_mae_g: tuple = ()

    def row(self) -> dict:
        s = self.spec
        return {
            "study": s.study,
            "cell": s.cell,
            "variant": s.variant,
            "classes_g": "|".join(f"{c:g}" for c in s.classes_g),
            "fraction": s.fraction,
            "sensors": "|".join(str(i) for i in s.sensors),
            "mae_g": self.summary.mae_g,
            "std_g": self.summary.std_g,
            "n_pairs": self.summary.n_pairs,
            "seeds": self.seeds,
            "big_change_ok": self.summary.big_change_ok,
        }


@dataclass
class StudyResult:
    study: str
    cells: list
    notes: dict = field(default_factory=dict)

    def cell(self, name: str, variant: Optional[str] = None) -> CellResult:
        for c in self.cells:
            if c.spec.cell == name and (variant is None or c.spec.variant == variant):
                return c
        raise KeyError(name)

    def rows(self) -> list:
        return [c.row() for c in self.cells]

    def location_rows(self) -> list:
        out = []
        for c in self.cells:
            for lid, s in c.per_location.items():
                out.append({
                    "study": self.study, "cell": c.spec.cell, "variant": c.spec.variant,
                    "location": lid, "mae_g": s.mae_g, "std_g": s.std_g, "n_pairs": s.n_pairs,
                })
        return out


def split(table: FeatureTable, classes, fraction, seed) -> np.ndarray:
    """Training rows: a seeded stratified draw per location, independent across locations."""
    train = []
    for li, lid in enumerate(table.locations):
        pool = np.flatnonzero(table.location_ids == lid)
        train.append(select_training(table.weights_g, classes, fraction, derive_seed(seed, "split", li), pool))
    return np.sort(np.concatenate(train))


def predict_variant(table, X, train, variant, lam, variance_target) -> np.ndarray:
    y = table.weights_g
    pred = np.empty(len(table))
    if variant == GLOBAL:
        return fit_linear(X[train], y[train], "global", lam, variance_target).predict(X)
    for lid in table.locations:
        rows = np.flatnonzero(table.location_ids == lid)
        tr = train[table.location_ids[train] == lid]
        if variant == LOCAL:
            model = fit_linear(X[tr], y[tr], lid, lam, variance_target)
        elif variant == QUADRATIC:
            model = fit_quadratic(X[tr], y[tr], lid, lam, variance_target)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        pred[rows] = model.predict(X[rows])
    return pred


def run_cells(
    specs: Sequence[CellSpec],
    tables: Callable[[int], FeatureTable],
    seeds: Sequence[int],
    lam: float,
    variance_target: float,
) -> list:
    """Evaluate each cell over the repetitions; cells sharing a repetition see the same data and split seed."""
    acc = {i: [] for i in range(len(specs))}
    for rep, seed in enumerate(seeds):
        table = tables(rep)
        for i, spec in enumerate(specs):
            X = table.matrix(spec.sensors)
            train = split(table, spec.classes_g, spec.fraction, seed)
            test = np.setdiff1d(np.arange(len(table)), train)
            pred = predict_variant(table, X, train, spec.variant, lam, variance_target)
            acc[i].append(change_errors(pred[test], table.weights_g[test], table.location_ids[test]))
    out = []
    for i, spec in enumerate(specs):
        errs = ChangeErrors.concat(acc[i])
        per_loc = {
            lid: Summary.of(ChangeErrors(errs.predicted[m], errs.true[m], errs.location_ids[m]))
            for lid in dict.fromkeys(errs.location_ids.tolist())
            for m in [errs.location_ids == lid]
        }
        out.append(CellResult(
            spec, Summary.of(errs), len(seeds), per_loc,
            tuple(Summary.of(e).mae_g for e in acc[i]),
        ))
    return out


# -- data sources ----------------------------------------------------------------


class TableSource:
    """Feature table per repetition, memoised.

    With ``dataset`` set, every repetition reuses the stored records and only
    the split seeds change; otherwise repetition ``i`` simulates with
    ``study_seed(cfg.seed, i)``.
    """

    def __init__(self, cfg, dataset=None, factory: Optional[Callable[[int], FeatureTable]] = None):
        self.cfg = cfg
        self.dataset = dataset
        self.factory = factory
        self._cache = {}

    def seeds(self, n: Optional[int] = None) -> list:
        n = self.cfg.studies.seeds if n is None else n
        return [study_seed(self.cfg.seed, i) for i in range(n)]

    def __call__(self, rep: int) -> FeatureTable:
        if self.dataset is not None:
            rep = 0
        if rep not in self._cache:
            if self.factory is not None:
                self._cache[rep] = self.factory(rep)
            elif self.dataset is not None:
                p = self.cfg.pipeline
                self._cache[rep] = featurize_container(
                    self.dataset, threshold_factor=p.threshold_factor,
                    refractory_s=p.refractory_s, pre_trigger_s=p.pre_trigger_s,
                )
            else:
                self._cache[rep] = table_from_config(self.cfg, study_seed(self.cfg.seed, rep))
        return self._cache[rep]


def _classes(values) -> tuple:
    return tuple(sorted(float(v) for v in values))


def _run(study, specs, cfg, source, seeds):
    seeds = source.seeds() if seeds is None else list(seeds)
    e = cfg.estimator
    return StudyResult(study, run_cells(specs, source, seeds, e.ridge_lambda, e.variance_target))


# -- studies ---------------------------------------------------------------------


def run_ablation_study(cfg, source: Optional[TableSource] = None, seeds=None) -> StudyResult:
    """Per-location linear vs one global linear model vs per-location quadratic, same splits."""
    source = source or TableSource(cfg)
    classes = _classes(cfg.studies.ablation_classes_g or cfg.dataset.weights_g)
    sensors = tuple(cfg.estimator.sensors)
    frac = cfg.estimator.train_fraction
    specs = [CellSpec("ablation", v, classes, frac, sensors, v) for v in VARIANTS]
    res = _run("ablation", specs, cfg, source, seeds)
    local = res.cell(LOCAL).summary.mae_g
    res.notes = {
        "global_over_local": res.cell(GLOBAL).summary.mae_g / local,
        "quadratic_over_local": res.cell(QUADRATIC).summary.mae_g / local,
    }
    return res


def data_efficiency_specs(cfg) -> list:
    st, est = cfg.studies, cfg.estimator
    sensors = tuple(est.sensors)
    frac = est.train_fraction
    low = float(st.span_low_g)
    specs = [
        CellSpec("span", f"{low:g}+{w:g}", (low, float(w)), frac, sensors)
        for w in sorted(float(w) for w in cfg.dataset.weights_g) if w > low
    ]
    specs += [
        CellSpec("class-count", f"{len(cs)} classes", _classes(cs), frac, sensors)
        for cs in st.class_sets_g
    ]
    specs += [
        CellSpec("fraction", f"{f:g}", _classes(est.train_classes_g), float(f), sensors)
        for f in st.fractions
    ]
    return specs


def run_data_efficiency_study(cfg, source: Optional[TableSource] = None, seeds=None) -> StudyResult:
    """Span, class-count and per-class fraction sweeps."""
    source = source or TableSource(cfg)
    return _run("data-efficiency", data_efficiency_specs(cfg), cfg, source, seeds)


def run_sensor_study(cfg, source: Optional[TableSource] = None, seeds=None) -> StudyResult:
    source = source or TableSource(cfg)
    n_sensors = len(source(0).sensor_ids)
    if n_sensors < 2:
        raise ValueError("the sensor study needs at least two shelf sensors")
    est = cfg.estimator
    specs = [
        CellSpec("sensors", "+".join(str(s) for s in sorted(ss)), _classes(est.train_classes_g),
                 est.train_fraction, tuple(sorted(int(s) for s in ss)))
        for ss in cfg.studies.sensor_sets
    ]
    return _run("sensors", specs, cfg, source, seeds)


def dense_ladder(cfg) -> list:
    d = cfg.studies.dense
    return [float(d.full_load_g - k * d.item_g) for k in range(d.items_removed + 1)][::-1]


def dense_table(cfg, seed: int) -> FeatureTable:
    """Dense-layout dataset: labels are total shelf load, the plate carries the box at each spot.

    The rest of the load (the other boxes) is a static term shared by every
    sample of a location and is left out of the simulation.
    """
    d = cfg.studies.dense
    static = d.full_load_g - d.box_full_g
    names = [f"B{i + 1}" for i in range(len(d.locations))]
    p = cfg.pipeline
    return simulate_table(
        cfg.setup(),
        dict(zip(names, [(float(x), float(y)) for x, y in d.locations])),
        dense_ladder(cfg),
        int(cfg.dataset.samples_per_class),
        cfg.dataset.noise_snr_db,
        seed,
        physical_mass_g=lambda w: w - static,
        threshold_factor=p.threshold_factor,
        refractory_s=p.refractory_s,
        pre_trigger_s=p.pre_trigger_s,
    )


def run_dense_layout_study(cfg, source: Optional[TableSource] = None, seeds=None) -> StudyResult:
    d = cfg.studies.dense
    if source is None:
        source = TableSource(cfg, factory=lambda rep: dense_table(cfg, derive_seed(cfg.seed, "dense", rep)))
    ladder = dense_ladder(cfg)
    unknown = set(_classes(d.train_classes_g)) - set(ladder)
    if unknown:
        raise ValueError(f"dense training classes {sorted(unknown)} are not on the ladder {ladder}")
    specs = [CellSpec("dense-layout", "dense", _classes(d.train_classes_g),
                      cfg.estimator.train_fraction, tuple(int(s) for s in d.sensors))]
    return _run("dense-layout", specs, cfg, source, seeds)


STUDIES = {
    "ablation": run_ablation_study,
    "data-efficiency": run_data_efficiency_study,
    "sensors": run_sensor_study,
    "dense-layout": run_dense_layout_study,
}


def run_studies(cfg, names: Sequence[str], dataset=None, seeds=None) -> list:
    """Run studies by name; the protocol studies share one table source."""
    shared = TableSource(cfg, dataset)
    out = []
    for name in names:
        if name not in STUDIES:
            raise ValueError(f"unknown study {name!r}")
        src = None if name == "dense-layout" else shared
        out.append(STUDIES[name](cfg, src, seeds))
    return out


def results_table(results: Sequence[StudyResult]) -> str:
    return io.format_table([r for res in results for r in res.rows()], TABLE_COLUMNS)


def location_table(results: Sequence[StudyResult]) -> str:
    cols = ("study", "cell", "variant", "location", "mae_g", "std_g", "n_pairs")
    return io.format_table([r for res in results for r in res.location_rows()], cols)


def results_summary(results: Sequence[StudyResult]) -> dict:
    """Flat key-value view of the results, for the model-file text format."""
    d = {"kind": "study-results"}
    for res in results:
        for c in res.cells:
            key = f"{res.study}.{c.spec.cell}.{c.spec.variant}".replace(" ", "_")
            d[key + ".mae_g"] = c.summary.mae_g
            d[key + ".std_g"] = c.summary.std_g
            d[key + ".n_pairs"] = c.summary.n_pairs
            d[key + ".seeds"] = c.seeds
            d[key + ".seed_mae_g"] = np.asarray(c.seed_mae_g, dtype=float)
        for k, v in res.notes.items():
            d[f"{res.study}.{k}"] = float(v)
    return d

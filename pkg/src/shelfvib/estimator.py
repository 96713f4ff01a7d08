"""Per-location weight estimation: PCA, standardisation, ridge regression.

Each shelf location gets its own affine map from spectral features to
grams. Weight change is the difference of two estimates at one location,
so any constant offset in a model cancels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_VARIANCE_TARGET = 0.95
DEFAULT_LAMBDA = 0.1


@dataclass(frozen=True, eq=False)
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_ratio: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def project(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components.T

    def reconstruct(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) @ self.components + self.mean


def fit_pca(features, variance_target: float = DEFAULT_VARIANCE_TARGET) -> PcaBasis:
    """Smallest basis whose explained variance reaches ``variance_target``.

    The component count is capped at ``n - 1`` (the rank of centred data).
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D (samples, dims) array")
    n = X.shape[0]
    if n < 2:
        raise ValueError(f"PCA needs at least 2 samples, got {n}")
    if not 0 < variance_target <= 1:
        raise ValueError("variance_target must lie in (0, 1]")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    var = s**2
    total = var.sum()
    if total <= 0:
        return PcaBasis(mean, vt[:1], np.zeros(1))
    ratio = var / total
    k = int(np.searchsorted(np.cumsum(ratio), variance_target * (1 - 1e-12)) + 1)
    k = max(1, min(k, n - 1, vt.shape[0]))
    # sign convention: largest-magnitude loading positive
    comps = vt[:k].copy()
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps *= flip[:, None]
    return PcaBasis(mean, comps, ratio[:k].copy())


def fit_ridge(projected, weights_g, lam: float) -> tuple[np.ndarray, float]:
    """Minimise ``|X w + b - y|^2 + lam |w|^2`` with the intercept unpenalised.

    Solved on centred data through the normal equations. ``lam = 0`` on a
    rank-deficient design is ill-posed and raises.
    """
    X = np.asarray(projected, dtype=float)
    y = np.asarray(weights_g, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError("need matching, nonempty design and targets")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    gram = Xc.T @ Xc
    if lam == 0 and np.linalg.matrix_rank(Xc) < X.shape[1]:
        raise np.linalg.LinAlgError("lambda = 0 with a rank-deficient design is ill-posed")
    w = np.linalg.solve(gram + lam * np.eye(X.shape[1]), Xc.T @ yc)
    return w, float(ym - xm @ w)


def select_training(
    labels, classes: Sequence[float], fraction: float, seed: int, pool=None
) -> np.ndarray:
    """Seeded stratified subset: ``fraction * n_c`` rounded half up (min 1) rows per class.

    Returns sorted row indices into ``labels``. ``pool`` restricts the
    candidate rows.
    """
    labels = np.asarray(labels, dtype=float)
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    candidates = np.arange(labels.size) if pool is None else np.asarray(pool)
    chosen = []
    for c in sorted(set(float(c) for c in classes)):
        rows = candidates[labels[candidates] == c]
        if rows.size == 0:
            raise ValueError(f"no samples for weight class {c:g} g")
        take = max(1, int(np.floor(fraction * rows.size + 0.5)))
        chosen.append(rng.choice(rows, size=take, replace=False))
    return np.sort(np.concatenate(chosen))


@dataclass(frozen=True, eq=False)
class LocationModel:
    location_id: str
    pca: PcaBasis
    score_mean: np.ndarray
    score_scale: np.ndarray
    coef: np.ndarray
    intercept: float
    lam: float
    variance_target: float
    classes_g: tuple = ()
    samples_per_class: tuple = ()
    sensor_ids: tuple = (1,)

    @property
    def n_features(self) -> int:
        return self.pca.mean.shape[0]

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"model {self.location_id} expects {self.n_features} features, got {X.shape[1]}"
            )
        z = (self.pca.project(X) - self.score_mean) / self.score_scale
        out = z @ self.coef + self.intercept
        return float(out[0]) if single else out


def _score_stats(Z):
    mu = Z.mean(axis=0)
    sd = Z.std(axis=0)
    sd[sd <= 0] = 1.0
    return mu, sd


def fit_linear(
    features,
    weights_g,
    location_id: str = "",
    lam: float = DEFAULT_LAMBDA,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    sensor_ids: Sequence[int] = (1,),
) -> LocationModel:
    """PCA, per-score standardisation from training rows, then ridge."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(weights_g, dtype=float)
    pca = fit_pca(X, variance_target)
    Z = pca.project(X)
    mu, sd = _score_stats(Z)
    coef, intercept = fit_ridge((Z - mu) / sd, y, lam)
    classes, counts = np.unique(y, return_counts=True)
    return LocationModel(
        location_id, pca, mu, sd, coef, intercept, float(lam), float(variance_target),
        tuple(float(c) for c in classes), tuple(int(c) for c in counts), tuple(sensor_ids),
    )


def fit_location_model(
    features,
    weights_g,
    location_id: str,
    classes: Sequence[float],
    fraction: float = 0.1,
    lam: float = DEFAULT_LAMBDA,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    seed: int = 0,
    sensor_ids: Sequence[int] = (1,),
) -> LocationModel:
    """Fit one location's model on a seeded subset of the listed classes.

    ``features`` and ``weights_g`` hold that location's samples only; the
    subset is :func:`select_training` with the same seed.
    """
    if len(set(float(c) for c in classes)) < 2:
        raise ValueError("at least two distinct weight classes are needed to fit a line")
    rows = select_training(weights_g, classes, fraction, seed)
    X = np.asarray(features, dtype=float)[rows]
    y = np.asarray(weights_g, dtype=float)[rows]
    return fit_linear(X, y, location_id, lam, variance_target, sensor_ids)


@dataclass(frozen=True)
class WeightEstimate:
    grams: float
    location_id: str
    source: str = ""


def predict_weight(model: LocationModel, feature, source: str = "") -> WeightEstimate:
    mags = getattr(feature, "magnitudes", feature)
    return WeightEstimate(float(model.predict(np.asarray(mags, dtype=float))), model.location_id, source)


def weight_change(before: WeightEstimate, after: WeightEstimate) -> float:
    """Signed change in grams, ``after - before``."""
    if before.location_id != after.location_id:
        raise ValueError(
            f"weight change needs one location, got {before.location_id!r} and {after.location_id!r}"
        )
    return after.grams - before.grams


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Degree-2 polynomial ridge on the PCA scores; ablation baseline only."""

    location_id: str
    pca: PcaBasis
    score_mean: np.ndarray
    score_scale: np.ndarray
    poly_mean: np.ndarray
    poly_scale: np.ndarray
    coef: np.ndarray
    intercept: float

    def predict(self, features) -> np.ndarray:
        X = np.atleast_2d(np.asarray(features, dtype=float))
        z = (self.pca.project(X) - self.score_mean) / self.score_scale
        p = (_poly2(z) - self.poly_mean) / self.poly_scale
        return p @ self.coef + self.intercept


def _poly2(z):
    k = z.shape[1]
    i, j = np.triu_indices(k)
    return np.hstack([z, z[:, i] * z[:, j]])


def fit_quadratic(
    features,
    weights_g,
    location_id: str = "",
    lam: float = DEFAULT_LAMBDA,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
) -> QuadraticModel:
    X = np.asarray(features, dtype=float)
    y = np.asarray(weights_g, dtype=float)
    pca = fit_pca(X, variance_target)
    Z = pca.project(X)
    mu, sd = _score_stats(Z)
    P = _poly2((Z - mu) / sd)
    pm, ps = _score_stats(P)
    coef, intercept = fit_ridge((P - pm) / ps, y, lam)
    return QuadraticModel(location_id, pca, mu, sd, pm, ps, coef, intercept)

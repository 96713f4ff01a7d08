"""Thin simply supported plate model of a retail shelf.

Closed-form modal synthesis for a rectangular Kirchhoff plate carrying a
point mass. The loaded modal response, its first-order expansion in the
item mass, and the modal superposition at a sensor point are the
theoretical reference for every linearity claim in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

GRAVITY = 9.80665
SINGULARITY_TOL = 1e-9
DEFAULT_TRUNCATION = (20, 20)

MASS_COUPLING_PRINTED = "printed"
MASS_COUPLING_AREA = "area-normalized"


class ResonanceError(ValueError):
    """Modal denominator vanished: evaluation at an undamped pole."""


@dataclass(frozen=True)
class PlateModel:
    length_a: float = 0.9144
    width_b: float = 0.4672
    flexural_rigidity_D: float = 50.0
    areal_density_rho: float = 10.0
    poisson_nu: float = 0.3
    modal_damping_zeta: float = 0.02
    gravity_g: float = GRAVITY
    mass_coupling: str = MASS_COUPLING_PRINTED

    def __post_init__(self):
        for name in ("length_a", "width_b", "flexural_rigidity_D", "areal_density_rho"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not 0 <= self.poisson_nu < 0.5:
            raise ValueError(f"poisson_nu must lie in [0, 0.5), got {self.poisson_nu!r}")
        if not 0 <= self.modal_damping_zeta < 1:
            raise ValueError(
                f"modal_damping_zeta must lie in [0, 1), got {self.modal_damping_zeta!r}"
            )
        if self.mass_coupling not in (MASS_COUPLING_PRINTED, MASS_COUPLING_AREA):
            raise ValueError(f"unknown mass_coupling {self.mass_coupling!r}")

    @property
    def total_mass(self) -> float:
        return self.areal_density_rho * self.length_a * self.width_b

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.length_a and 0.0 <= y <= self.width_b


def _check_inside(plate: PlateModel, x: float, y: float, what: str) -> None:
    if not (np.isfinite(x) and np.isfinite(y) and plate.contains(x, y)):
        raise ValueError(
            f"{what} ({x}, {y}) lies outside the {plate.length_a} x {plate.width_b} m plate"
        )


@dataclass(frozen=True)
class PointLoad:
    mass_m0: float
    pos_x0: float
    pos_y0: float

    def __post_init__(self):
        if not (np.isfinite(self.mass_m0) and self.mass_m0 >= 0):
            raise ValueError(f"mass_m0 must be >= 0, got {self.mass_m0!r}")

    def validate(self, plate: PlateModel) -> None:
        _check_inside(plate, self.pos_x0, self.pos_y0, "load position")

    def with_mass(self, mass: float) -> "PointLoad":
        return PointLoad(mass, self.pos_x0, self.pos_y0)


@dataclass(frozen=True)
class SensorPosition:
    pos_x: float
    pos_y: float

    def validate(self, plate: PlateModel) -> None:
        _check_inside(plate, self.pos_x, self.pos_y, "sensor position")


@dataclass(frozen=True)
class ModalIndex:
    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 1 or self.n < 1:
            raise ValueError(f"modal indices must be positive integers, got ({self.m}, {self.n})")


@dataclass(frozen=True, eq=False)
class ExcitationSpec:
    """Point force acting on the plate.

    ``waveform`` is the force history in newtons sampled at
    ``sampling_rate``; its spectrum is the discrete-time Fourier transform
    scaled by the sample interval, so it approximates the continuous
    transform. Without a waveform the force is a unit impulse (flat unit
    spectrum). ``amplitude`` scales either form.
    """

    source_x: float
    source_y: float
    waveform: Optional[np.ndarray] = None
    sampling_rate: Optional[float] = None
    amplitude: float = 1.0

    def __post_init__(self):
        if self.waveform is not None:
            wf = np.asarray(self.waveform, dtype=float)
            if wf.ndim != 1 or not np.all(np.isfinite(wf)):
                raise ValueError("force waveform must be a finite 1-D sequence")
            if self.sampling_rate is None or self.sampling_rate <= 0:
                raise ValueError("a force waveform needs a positive sampling_rate")
            object.__setattr__(self, "waveform", wf)
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")

    def validate(self, plate: PlateModel) -> None:
        _check_inside(plate, self.source_x, self.source_y, "excitation source")

    def force_spectrum(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if self.waveform is None:
            return np.full(omega.shape, complex(self.amplitude))
        dt = 1.0 / self.sampling_rate
        t = np.arange(self.waveform.size) * dt
        flat = omega.reshape(-1)
        spec = np.exp(-1j * np.outer(flat, t)) @ self.waveform * dt
        return self.amplitude * spec.reshape(omega.shape)

    def spatial_coefficient(self, plate: PlateModel, m, n, omega) -> np.ndarray:
        """Double sine-series coefficient of the point force for mode (m, n)."""
        shape = (
            np.sin(np.asarray(m) * np.pi * self.source_x / plate.length_a)
            * np.sin(np.asarray(n) * np.pi * self.source_y / plate.width_b)
        )
        area = plate.length_a * plate.width_b
        return 4.0 / area * shape * self.force_spectrum(omega)


def modal_frequency(plate: PlateModel, idx: ModalIndex) -> float:
    """Angular natural frequency omega_mn of mode (m, n) in rad/s.

    Standard simply supported result
    ``sqrt(D / rho) * ((m pi / a)^2 + (n pi / b)^2)``.
    """
    return float(_modal_frequency(plate, idx.m, idx.n))


def _modal_frequency(plate: PlateModel, m, n):
    k2 = (np.asarray(m) * np.pi / plate.length_a) ** 2 + (np.asarray(n) * np.pi / plate.width_b) ** 2
    return np.sqrt(plate.flexural_rigidity_D / plate.areal_density_rho) * k2


def resonance_frequency(plate: PlateModel, idx: ModalIndex) -> float:
    """Angular frequency where the unloaded undamped denominator vanishes.

    The response denominator ``-omega^2 rho + D omega_mn^2`` is zero at
    ``omega = omega_mn * sqrt(D / rho)``.
    """
    return float(_resonance_frequency(plate, idx.m, idx.n))


def _resonance_frequency(plate: PlateModel, m, n):
    return _modal_frequency(plate, m, n) * np.sqrt(
        plate.flexural_rigidity_D / plate.areal_density_rho
    )


def mode_shape(plate: PlateModel, m, n, x, y):
    return np.sin(np.asarray(m) * np.pi * x / plate.length_a) * np.sin(
        np.asarray(n) * np.pi * y / plate.width_b
    )


def _mass_coupling(plate: PlateModel, load: PointLoad, m, n):
    """Coefficient multiplying -omega^2 that the point mass adds per mode."""
    s = mode_shape(plate, m, n, load.pos_x0, load.pos_y0)
    if plate.mass_coupling == MASS_COUPLING_AREA:
        return 2.0 * load.mass_m0 / (plate.length_a * plate.width_b) * s
    return load.mass_m0 * s


def _unloaded_denominator(plate: PlateModel, m, n, omega, zeta: float):
    w_mn = _modal_frequency(plate, m, n)
    rho, D = plate.areal_density_rho, plate.flexural_rigidity_D
    den = -(omega**2) * rho + D * w_mn**2
    if zeta:
        den = den + 2j * zeta * omega * np.sqrt(rho * D) * w_mn
    return den


def _check_denominator(den, tol: float) -> None:
    if np.any(np.abs(den) <= tol):
        raise ResonanceError(
            f"modal denominator magnitude {float(np.min(np.abs(den))):.3e} <= {tol:g}; "
            "frequency sits on an undamped natural frequency"
        )


def exact_spectrum(
    plate: PlateModel,
    load: PointLoad,
    excitation: ExcitationSpec,
    idx: ModalIndex,
    omega,
    *,
    zeta: float = 0.0,
    tol: float = SINGULARITY_TOL,
):
    """Loaded modal amplitude W(m, n, omega).

    ``F(m, n, omega) / (-omega^2 (rho + m0 s_mn) + D omega_mn^2)`` with
    ``s_mn`` the mode shape at the load. ``zeta`` adds the viscous modal
    damping term used by the simulator; the oracle path keeps it at zero.
    """
    omega = np.asarray(omega, dtype=float)
    den = _unloaded_denominator(plate, idx.m, idx.n, omega, zeta) - omega**2 * _mass_coupling(
        plate, load, idx.m, idx.n
    )
    _check_denominator(den, tol)
    out = excitation.spatial_coefficient(plate, idx.m, idx.n, omega) / den
    return out if out.ndim else complex(out)


def linearized_spectrum(
    plate: PlateModel,
    load: PointLoad,
    excitation: ExcitationSpec,
    idx: ModalIndex,
    omega,
    *,
    tol: float = SINGULARITY_TOL,
):
    """First-order expansion of :func:`exact_spectrum` in the item mass.

    ``W0 * (1 + omega^2 s_mn m0 / d0)`` where ``W0 = F / d0`` is the
    unloaded response and ``d0`` its denominator. Affine in ``m0``.
    """
    omega = np.asarray(omega, dtype=float)
    d0 = _unloaded_denominator(plate, idx.m, idx.n, omega, 0.0)
    _check_denominator(d0, tol)
    base = excitation.spatial_coefficient(plate, idx.m, idx.n, omega) / d0
    out = base * (1.0 + omega**2 * _mass_coupling(plate, load, idx.m, idx.n) / d0)
    return out if out.ndim else complex(out)


def _mode_grid(truncation):
    M, N = truncation
    if M < 1 or N < 1:
        raise ValueError(f"truncation must be at least (1, 1), got {truncation!r}")
    m, n = np.meshgrid(np.arange(1, M + 1), np.arange(1, N + 1), indexing="ij")
    return m.ravel(), n.ravel()


def transfer_matrix(
    plate: PlateModel,
    load: PointLoad,
    source: tuple[float, float],
    sensors: Sequence[SensorPosition],
    omega,
    *,
    truncation=DEFAULT_TRUNCATION,
    zeta: float = 0.0,
    tol: float = SINGULARITY_TOL,
    chunk: int = 4096,
) -> np.ndarray:
    """Displacement per unit point force, shape ``(len(omega), len(sensors))``.

    Vectorised modal superposition used by the simulator; equal to
    :func:`sensor_spectrum` with a unit-spectrum excitation at ``source``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    m, n = _mode_grid(truncation)
    area = plate.length_a * plate.width_b
    src = 4.0 / area * mode_shape(plate, m, n, source[0], source[1])
    phi = np.stack([mode_shape(plate, m, n, s.pos_x, s.pos_y) for s in sensors], axis=1)
    weights = src[:, None] * phi
    coupling = _mass_coupling(plate, load, m, n)
    out = np.empty((omega.size, len(sensors)), dtype=complex)
    for start in range(0, omega.size, chunk):
        w = omega[start : start + chunk, None]
        den = _unloaded_denominator(plate, m[None, :], n[None, :], w, zeta) - w**2 * coupling
        _check_denominator(den, tol)
        out[start : start + chunk] = (1.0 / den) @ weights
    return out


def sensor_spectrum(
    plate: PlateModel,
    load: PointLoad,
    excitation: ExcitationSpec,
    sensor: SensorPosition,
    omega,
    truncation=DEFAULT_TRUNCATION,
    *,
    zeta: float = 0.0,
    tol: float = SINGULARITY_TOL,
):
    """Plate displacement spectrum at the sensor by modal superposition.

    Sums ``W(m, n, omega) sin(m pi x / a) sin(n pi y / b)`` over
    ``m <= M`` and ``n <= N``.
    """
    omega = np.asarray(omega, dtype=float)
    h = transfer_matrix(
        plate,
        load,
        (excitation.source_x, excitation.source_y),
        [sensor],
        omega.reshape(-1),
        truncation=truncation,
        zeta=zeta,
        tol=tol,
    )[:, 0]
    out = (h * excitation.force_spectrum(omega.reshape(-1))).reshape(omega.shape)
    return out if out.ndim else complex(out)


def resonance_table(plate: PlateModel, truncation=DEFAULT_TRUNCATION) -> np.ndarray:
    """Rows of (m, n, resonance rad/s) sorted by frequency."""
    m, n = _mode_grid(truncation)
    w = _resonance_frequency(plate, m, n)
    order = np.argsort(w, kind="stable")
    return np.column_stack([m[order], n[order], w[order]])


def off_resonance_mask(
    plate: PlateModel,
    omega,
    truncation=DEFAULT_TRUNCATION,
    rel_gap: float = 0.08,
    modes: Optional[Sequence[ModalIndex]] = None,
) -> np.ndarray:
    """True where ``omega`` is at least ``rel_gap`` (relative) away from every pole.

    Poles are the unloaded undamped resonances of the listed modes (default:
    every mode of the truncation).
    """
    omega = np.asarray(omega, dtype=float)
    if modes is None:
        m, n = _mode_grid(truncation)
    else:
        m = np.array([i.m for i in modes])
        n = np.array([i.n for i in modes])
    poles = _resonance_frequency(plate, m, n)
    dist = np.abs(omega[..., None] - poles) / poles
    return np.all(dist >= rel_gap, axis=-1)

"""Nondimensional grids, field/spin-wave containers, norms and reversal maps.

Everything downstream works in the scaled variables described by
:func:`nondimensionalize_doc`: time in units of the optical-coherence decay
rate, space as a fraction of the medium length, Rabi frequencies in decay
units.  The only physical knobs left after the rescaling are the optical
depth ``d`` and the one-photon detuning ``delta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "PhotonMemError",
    "GridError",
    "ConvergenceError",
    "InstabilityError",
    "ShapingError",
    "MediumParams",
    "TimeGrid",
    "SpaceGrid",
    "FieldMode",
    "ControlField",
    "SpinWave",
    "EfficiencyBreakdown",
    "mode_norm2",
    "spinwave_norm2",
    "flip",
    "time_reverse",
    "normalized_mode",
    "normalized_spinwave",
    "mode_l2_distance",
    "spinwave_l2_distance",
    "resample_spinwave",
    "nondimensionalize_doc",
]

GRID_SYMMETRY_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12


class PhotonMemError(Exception):
    """Base class for all library errors."""


class GridError(PhotonMemError):
    """Raised for invalid or incompatible grids."""


class ConvergenceError(PhotonMemError):
    """An iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message, last_mode=None, last_eigenvalue=None):
        super().__init__(message)
        self.last_mode = last_mode
        self.last_eigenvalue = last_eigenvalue


class InstabilityError(PhotonMemError):
    """Time stepping became unstable; retry with a smaller step."""


class ShapingError(PhotonMemError):
    """Control shaping could not satisfy the requested target."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MediumParams:
    """Optical depth and detuning, the only medium parameters.

    ``d`` is dimensionless and must be positive; ``delta`` is the one-photon
    detuning in units of the polarization decay rate and may take any sign.
    """

    d: float
    delta: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.d) and self.d > 0):
            raise ValueError(f"optical depth must be finite and > 0, got {self.d}")
        if not np.isfinite(self.delta):
            raise ValueError(f"detuning must be finite, got {self.delta}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid: ``n`` samples starting at ``tau0`` with step ``dtau``."""

    tau0: float
    dtau: float
    n: int

    def __post_init__(self):
        if self.dtau <= 0 or not np.isfinite(self.dtau):
            raise GridError(f"dtau must be positive, got {self.dtau}")
        if self.n < 2:
            raise GridError(f"need at least 2 samples, got {self.n}")

    @cached_property
    def times(self) -> np.ndarray:
        return _readonly(self.tau0 + self.dtau * np.arange(self.n))

    @property
    def duration(self) -> float:
        return (self.n - 1) * self.dtau

    @property
    def t_end(self) -> float:
        return self.tau0 + self.duration

    @classmethod
    def linspace(cls, t0: float, t1: float, n: int) -> "TimeGrid":
        if t1 <= t0:
            raise GridError("t1 must exceed t0")
        return cls(tau0=t0, dtau=(t1 - t0) / (n - 1), n=n)


@dataclass(frozen=True, eq=False)
class SpaceGrid:
    """Quadrature nodes/weights on the unit interval.

    ``kind`` records how the grid was built ("gauss", "uniform" or "custom")
    so that interpolation can pick a stable scheme.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(np.asarray(self.nodes, float)))
        object.__setattr__(self, "weights", _readonly(np.asarray(self.weights, float)))
        z, w = self.nodes, self.weights
        if z.ndim != 1 or w.shape != z.shape or z.size < 2:
            raise GridError("nodes/weights must be matching 1-d arrays")
        if np.any(np.diff(z) <= 0):
            raise GridError("nodes must be strictly increasing")
        if z[0] < 0.0 or z[-1] > 1.0:
            raise GridError("nodes must lie in [0, 1]")
        if np.any(w <= 0):
            raise GridError("weights must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise GridError(f"weights must sum to 1, got {w.sum()!r}")

    @property
    def n(self) -> int:
        return self.nodes.size

    @cached_property
    def is_symmetric(self) -> bool:
        """True when the grid maps onto itself under zeta -> 1 - zeta."""
        z, w = self.nodes, self.weights
        return bool(
            np.max(np.abs(z + z[::-1] - 1.0)) < GRID_SYMMETRY_TOL
            and np.max(np.abs(w - w[::-1])) < GRID_SYMMETRY_TOL
        )

    @classmethod
    def gauss_legendre(cls, n: int = 200) -> "SpaceGrid":
        x, w = np.polynomial.legendre.leggauss(n)
        return cls(nodes=(x + 1.0) / 2.0, weights=w / 2.0, kind="gauss")

    @classmethod
    def uniform_midpoint(cls, n: int = 256) -> "SpaceGrid":
        dz = 1.0 / n
        return cls(nodes=(np.arange(n) + 0.5) * dz, weights=np.full(n, dz), kind="uniform")


def _as_complex_samples(samples, grid_len: int, what: str) -> np.ndarray:
    a = np.asarray(samples, dtype=complex)
    if a.shape != (grid_len,):
        raise ValueError(f"{what}: expected {grid_len} samples, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError(f"{what}: samples must be finite")
    return _readonly(a)


@dataclass(frozen=True, eq=False)
class FieldMode:
    """Complex field envelope sampled on a uniform time grid."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "samples", _as_complex_samples(self.samples, self.grid.n, "FieldMode")
        )

    def norm2(self) -> float:
        return mode_norm2(self)


@dataclass(frozen=True, eq=False)
class ControlField:
    """Complex Rabi-frequency samples on a uniform time grid."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "samples", _as_complex_samples(self.samples, self.grid.n, "ControlField")
        )


@dataclass(frozen=True, eq=False)
class SpinWave:
    """Complex spin-wave samples on a spatial quadrature grid."""

    grid: SpaceGrid
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "samples", _as_complex_samples(self.samples, self.grid.n, "SpinWave")
        )

    def norm2(self) -> float:
        return spinwave_norm2(self)


@dataclass(frozen=True)
class EfficiencyBreakdown:
    """Where the incident photon number went, as fractions of the input."""

    eta_storage: float = 0.0
    eta_retrieval: float = 0.0
    eta_total: float = 0.0
    leak_fraction: float = 0.0
    decay_fraction: float = 0.0
    residual_fraction: float = 0.0


def mode_norm2(mode: FieldMode) -> float:
    """Trapezoid value of the time integral of |samples|^2."""
    return float(np.trapezoid(np.abs(mode.samples) ** 2, dx=mode.grid.dtau))


def spinwave_norm2(s: SpinWave) -> float:
    """Quadrature value of the space integral of |samples|^2."""
    return float(np.dot(s.grid.weights, np.abs(s.samples) ** 2))


def flip(s: SpinWave) -> SpinWave:
    """Reverse a spin wave in space: output(zeta) = input(1 - zeta).

    Used to move between the storage and the backward-retrieval propagation
    frames.  Requires a grid that is symmetric under zeta -> 1 - zeta so the
    reversal is exact sample permutation; no extra phase is applied.
    """
    if not s.grid.is_symmetric:
        raise GridError("flip requires a grid symmetric under zeta -> 1 - zeta")
    return SpinWave(grid=s.grid, samples=s.samples[::-1])


def time_reverse(x):
    """Reverse in time and conjugate; works on FieldMode and ControlField.

    The sample order is reversed so that output(tau) = conj(input(T - tau))
    on the same grid.  Norms are preserved exactly.
    """
    if isinstance(x, FieldMode):
        return FieldMode(grid=x.grid, samples=np.conj(x.samples[::-1]))
    if isinstance(x, ControlField):
        return ControlField(grid=x.grid, samples=np.conj(x.samples[::-1]))
    raise TypeError(f"time_reverse expects FieldMode or ControlField, got {type(x)!r}")


def normalized_mode(mode: FieldMode) -> tuple[FieldMode, float]:
    """Return (unit-norm copy, original norm^2)."""
    n2 = mode_norm2(mode)
    if n2 <= 0.0:
        raise ValueError("cannot normalize a zero mode")
    return FieldMode(grid=mode.grid, samples=mode.samples / np.sqrt(n2)), n2


def normalized_spinwave(s: SpinWave) -> tuple[SpinWave, float]:
    """Return (unit-norm copy, original norm^2)."""
    n2 = spinwave_norm2(s)
    if n2 <= 0.0:
        raise ValueError("cannot normalize a zero spin wave")
    return SpinWave(grid=s.grid, samples=s.samples / np.sqrt(n2)), n2


def mode_l2_distance(a: FieldMode, b: FieldMode) -> float:
    """Trapezoid L2 distance between two modes on the same grid."""
    if a.grid != b.grid:
        raise GridError("modes live on different time grids")
    return float(
        np.sqrt(np.trapezoid(np.abs(a.samples - b.samples) ** 2, dx=a.grid.dtau))
    )


def spinwave_l2_distance(a: SpinWave, b: SpinWave) -> float:
    """Weighted L2 distance between two spin waves on the same grid."""
    if a.grid is not b.grid and not (
        np.array_equal(a.grid.nodes, b.grid.nodes)
        and np.array_equal(a.grid.weights, b.grid.weights)
    ):
        raise GridError("spin waves live on different space grids")
    return float(np.sqrt(np.dot(a.grid.weights, np.abs(a.samples - b.samples) ** 2)))


def resample_spinwave(s: SpinWave, grid: SpaceGrid) -> SpinWave:
    """Interpolate a spin wave onto another grid.

    Gauss-type sources use barycentric polynomial interpolation (stable for
    endpoint-clustered nodes); uniform sources use a cubic spline, since a
    global polynomial through equispaced points is ill-conditioned.
    """
    from scipy.interpolate import BarycentricInterpolator, CubicSpline

    if s.grid.kind == "gauss":
        interp = BarycentricInterpolator(s.grid.nodes, s.samples)
        vals = np.asarray(interp(grid.nodes), dtype=complex)
    else:
        spline = CubicSpline(s.grid.nodes, s.samples, bc_type="natural")
        vals = spline(grid.nodes)
    return SpinWave(grid=grid, samples=vals)


def nondimensionalize_doc() -> str:
    """Canonical scaled equations used throughout the package."""
    return (
        "Scaled variables: tau = (decay rate) * (t - z/c) in the frame moving\n"
        "with the signal, zeta = z/L, omega = Omega/(decay rate), delta =\n"
        "Delta/(decay rate).  The field envelope E is rescaled so that the\n"
        "time integral of |E|^2 is the photon-number fraction; an input mode\n"
        "has integral 1.  The equations of motion become\n"
        "\n"
        "    dE/dzeta = i sqrt(d) P\n"
        "    dP/dtau  = -(1 + i delta) P + i sqrt(d) E + i omega(tau) S\n"
        "    dS/dtau  = i conj(omega(tau)) P\n"
        "\n"
        "with boundary condition E(0, tau) = E_in(tau) for storage and\n"
        "initial spin wave S(zeta, 0) for retrieval.  Retardation across the\n"
        "medium is absorbed by the comoving time, so the field is an\n"
        "instantaneous functional of P.  Storage efficiency is the zeta\n"
        "integral of |S|^2 at the end of the input window; retrieval\n"
        "efficiency is the tau integral of |E(1, tau)|^2.  With omega = 0 the\n"
        "spin wave is frozen and P decays at unit rate.\n"
    )

"""Aperture geometry, sub-aperture segmentation, imaging grid and scenes.

All positions are 3-vectors in meters, in a frame centered at the scene
center with ``u3`` vertical.  The synthetic aperture is a straight line along
the unit tangent ``tau`` through its center ``aperture_center``; the imaging
grid is the cross-range line through the scene center along the same
tangent (a single range bin).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ApertureGeometry",
    "SubAperture",
    "ImagingGrid",
    "ReflectivityProfile",
    "Scene",
    "UnknownMatrix",
    "WINDOW_KINDS",
    "gotcha_geometry",
    "segment_aperture",
    "full_aperture",
    "antenna_positions",
    "imaging_grid",
    "window_value",
    "propagation_phase",
    "sample_unknown_matrix",
    "make_orthogonal_rows",
    "scaling_diagnostics",
]

WINDOW_KINDS = ("boxcar", "gaussian", "raisedCosine", "constant")


def _as_vec(v) -> np.ndarray:
    out = np.asarray(v, dtype=float).reshape(3)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ApertureGeometry:
    """Linear synthetic aperture observing a scene center.

    Parameters
    ----------
    scene_center : array_like, shape (3,)
        Center of the imaging region, meters.
    aperture_center : array_like, shape (3,)
        Center of the full aperture, meters.
    tangent : array_like, shape (3,)
        Unit vector along the flight path.
    aperture_length : float
        Full aperture length ``A``, meters.
    element_spacing : float
        Distance travelled between two emissions, meters.
    altitude : float
        Platform altitude above the scene plane, meters.
    frequency : float
        Central frequency, Hz.
    wave_speed : float
        Propagation speed, m/s.
    """

    scene_center: np.ndarray
    aperture_center: np.ndarray
    tangent: np.ndarray
    aperture_length: float
    element_spacing: float
    altitude: float
    frequency: float
    wave_speed: float = 3.0e8

    def __post_init__(self):
        object.__setattr__(self, "scene_center", _as_vec(self.scene_center))
        object.__setattr__(self, "aperture_center", _as_vec(self.aperture_center))
        object.__setattr__(self, "tangent", _as_vec(self.tangent))
        if abs(np.linalg.norm(self.tangent) - 1.0) > 1e-12:
            raise ValueError("tangent must be a unit vector")
        if not self.aperture_length > 0:
            raise ValueError("aperture_length must be positive")
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")
        if self.element_spacing > self.aperture_length:
            raise ValueError("element_spacing cannot exceed aperture_length")
        if not (self.frequency > 0 and self.wave_speed > 0):
            raise ValueError("frequency and wave_speed must be positive")

    @property
    def wavelength(self) -> float:
        return self.wave_speed / self.frequency

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def standoff(self) -> float:
        """Distance from the full-aperture center to the scene center."""
        return float(np.linalg.norm(self.aperture_center - self.scene_center))

    @property
    def resolution_unit(self) -> float:
        """Full-aperture cross-range resolution ``wavelength * standoff / A``."""
        return self.wavelength * self.standoff / self.aperture_length

    def with_changes(self, **kw) -> "ApertureGeometry":
        fields = dict(
            scene_center=self.scene_center,
            aperture_center=self.aperture_center,
            tangent=self.tangent,
            aperture_length=self.aperture_length,
            element_spacing=self.element_spacing,
            altitude=self.altitude,
            frequency=self.frequency,
            wave_speed=self.wave_speed,
        )
        fields.update(kw)
        return ApertureGeometry(**fields)


def gotcha_geometry(
    aperture_length: float = 1500.0,
    altitude: float = 8000.0,
    west_standoff: float = 7000.0,
    element_spacing: float = 1.0,
    frequency: float = 10e9,
    wave_speed: float = 3.0e8,
) -> ApertureGeometry:
    """X-band geometry modelled on the GOTCHA data set.

    The aperture flies north (along ``u2``) at ``altitude``, centered
    ``west_standoff`` meters west of the scene center.
    """
    return ApertureGeometry(
        scene_center=(0.0, 0.0, 0.0),
        aperture_center=(-west_standoff, 0.0, altitude),
        tangent=(0.0, 1.0, 0.0),
        aperture_length=aperture_length,
        element_spacing=element_spacing,
        altitude=altitude,
        frequency=frequency,
        wave_speed=wave_speed,
    )


@dataclass(frozen=True)
class SubAperture:
    """One segment of the aperture, i.e. one view of the MMV problem."""

    index: int
    center: np.ndarray
    length: float
    positions: np.ndarray
    range_unit: np.ndarray
    projector: np.ndarray
    standoff: float
    offset: float  # signed arclength of the center from the aperture center

    @property
    def n_positions(self) -> int:
        return self.positions.shape[0]


def _make_sub(geom: ApertureGeometry, index: int, offset: float, length: float,
              include_endpoint: bool) -> SubAperture:
    center = geom.aperture_center + offset * geom.tangent
    diff = center - geom.scene_center
    standoff = float(np.linalg.norm(diff))
    m = diff / standoff
    proj = np.eye(3) - np.outer(m, m)
    pos = _positions(center, geom.tangent, length, geom.element_spacing, include_endpoint)
    for arr in (center, m, proj, pos):
        arr.setflags(write=False)
    return SubAperture(index=index, center=center, length=float(length), positions=pos,
                       range_unit=m, projector=proj, standoff=standoff, offset=float(offset))


def _positions(center, tangent, length, spacing, include_endpoint):
    if not spacing > 0:
        raise ValueError("antenna spacing must be positive")
    if spacing > length and length > 0:
        raise ValueError("antenna spacing cannot exceed the sub-aperture length")
    if length == 0:
        return np.asarray(center, float)[None, :].copy()
    n = int(math.floor(length / spacing + 1e-9)) + 1
    if not include_endpoint and n > 1:
        n -= 1
    s = -0.5 * length + spacing * np.arange(n)
    return center[None, :] + s[:, None] * tangent[None, :]


def segment_aperture(
    geom: ApertureGeometry,
    sub_length: float,
    center_spacing: float,
    n_views: int | None = None,
    include_endpoint: bool = True,
) -> list[SubAperture]:
    """Divide the aperture into (possibly overlapping) sub-apertures.

    Centers are stepped by ``center_spacing`` along the tangent, symmetric
    about the aperture center.  By default as many centers as fit inside the
    full aperture are used, ``floor((A - a) / spacing) + 1``; pass ``n_views``
    to request a specific count (it must still fit).
    """
    A = geom.aperture_length
    if not 0 < sub_length <= A * (1 + 1e-12):
        raise ValueError("sub-aperture length must satisfy 0 < a <= A")
    if not center_spacing > 0:
        raise ValueError("center spacing must be positive")
    n_fit = int(math.floor((A - sub_length) / center_spacing + 1e-9)) + 1
    if n_views is None:
        n_views = n_fit
    elif n_views < 1 or n_views > n_fit:
        raise ValueError(f"{n_views} sub-apertures of length {sub_length} spaced "
                         f"{center_spacing} do not fit in an aperture of {A}")
    offsets = (np.arange(n_views) - 0.5 * (n_views - 1)) * center_spacing
    return [_make_sub(geom, v, off, sub_length, include_endpoint)
            for v, off in enumerate(offsets)]


def full_aperture(geom: ApertureGeometry, include_endpoint: bool = True) -> SubAperture:
    """The whole aperture as a single view."""
    return _make_sub(geom, 0, 0.0, geom.aperture_length, include_endpoint)


def antenna_positions(sub: SubAperture, spacing: float,
                      include_endpoint: bool = True) -> np.ndarray:
    """Equally spaced antenna positions across ``sub``, shape ``(N_r, 3)``."""
    tangent = sub.positions[-1] - sub.positions[0]
    nrm = np.linalg.norm(tangent)
    tangent = tangent / nrm if nrm > 0 else np.array([0.0, 1.0, 0.0])
    return _positions(np.asarray(sub.center), tangent, sub.length, spacing, include_endpoint)


@dataclass(frozen=True)
class ImagingGrid:
    """Equispaced cross-range grid through the scene center."""

    points: np.ndarray
    coords: np.ndarray  # signed offsets along the tangent, meters
    spacing: float
    resolution_unit: float

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def coords_units(self) -> np.ndarray:
        return self.coords / self.resolution_unit

    def nearest_index(self, offset_m: float) -> int:
        return int(np.argmin(np.abs(self.coords - offset_m)))


def imaging_grid(geom: ApertureGeometry, extent_units: float,
                 spacing_units: float = 0.25) -> ImagingGrid:
    """Grid of ``round(extent/spacing) + 1`` points centered on the scene center.

    Extent and spacing are in resolution units ``wavelength * L_o / A``.
    """
    if not extent_units > 0:
        raise ValueError("extent must be positive")
    if not 0 < spacing_units <= extent_units:
        raise ValueError("grid spacing must satisfy 0 < spacing <= extent")
    unit = geom.resolution_unit
    n = int(round(extent_units / spacing_units)) + 1
    coords = (np.arange(n) - 0.5 * (n - 1)) * spacing_units * unit
    pts = geom.scene_center[None, :] + coords[:, None] * geom.tangent[None, :]
    pts.setflags(write=False)
    coords.setflags(write=False)
    return ImagingGrid(points=pts, coords=coords, spacing=spacing_units * unit,
                       resolution_unit=unit)


@dataclass(frozen=True)
class ReflectivityProfile:
    """A point scatterer whose reflectivity depends on the viewing position.

    The visibility window is a function of the along-aperture coordinate of
    the observer, ``(s - visibility_center) / visibility_width``.
    """

    grid_index: int
    amplitude: complex = 1.0
    visibility_center: float = 0.0
    visibility_width: float = 1.0
    window: str = "constant"

    def __post_init__(self):
        if self.window not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind {self.window!r}")
        if self.window != "constant" and not self.visibility_width > 0:
            raise ValueError("visibility_width must be positive")

    def visibility(self, s) -> np.ndarray:
        return window_value(self.window, (np.asarray(s, float) - self.visibility_center)
                            / self.visibility_width)


@dataclass(frozen=True)
class Scene:
    profiles: tuple[ReflectivityProfile, ...]

    def __init__(self, profiles: Sequence[ReflectivityProfile]):
        object.__setattr__(self, "profiles", tuple(profiles))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted({p.grid_index for p in self.profiles}))


@dataclass(frozen=True)
class UnknownMatrix:
    """Reflectivity matrix ``X`` (grid points by views) and its row support."""

    values: np.ndarray
    support: tuple[int, ...]
    amplitudes: np.ndarray | None = field(default=None, repr=False)
    phases: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.values.shape


def window_value(kind: str, u) -> np.ndarray:
    """Visibility window evaluated at normalized coordinate ``u``.

    boxcar is 1 on ``|u| <= 1/2``; gaussian is ``exp(-u**2/2)``; raisedCosine
    is ``cos(pi u)**2`` on ``|u| <= 1/2``; constant is 1.
    """
    u = np.asarray(u, dtype=float)
    if kind == "constant":
        return np.ones_like(u)
    if kind == "boxcar":
        return (np.abs(u) <= 0.5 + 1e-12).astype(float)
    if kind == "gaussian":
        return np.exp(-0.5 * u ** 2)
    if kind == "raisedCosine":
        return np.where(np.abs(u) <= 0.5, np.cos(np.pi * u) ** 2, 0.0)
    raise ValueError(f"unknown window kind {kind!r}")


def propagation_phase(geom: ApertureGeometry, grid: ImagingGrid,
                      subs: Sequence[SubAperture]) -> np.ndarray:
    """Deterministic per-view phase absorbed into the unknown, ``(N_y, N_v)``.

    ``exp[-2ik (m_v . dy - dy . P_v dy / (2 L_v))]`` with ``dy = y - y_center``.
    """
    k = geom.wavenumber
    dy = grid.points - geom.scene_center
    out = np.empty((grid.n_points, len(subs)), dtype=complex)
    for v, sub in enumerate(subs):
        lin = dy @ sub.range_unit
        quad = np.einsum("qi,ij,qj->q", dy, sub.projector, dy) / (2.0 * sub.standoff)
        out[:, v] = np.exp(-2j * k * (lin - quad))
    return out


def sample_unknown_matrix(scene: Scene, grid: ImagingGrid, subs: Sequence[SubAperture],
                          geom: ApertureGeometry | None = None,
                          include_phase: bool = True) -> UnknownMatrix:
    """Ground-truth ``X`` for ``scene`` sampled at the sub-aperture centers.

    ``X[q, v]`` is the amplitude times the visibility window at the center of
    view ``v``, times the propagation phase of :func:`propagation_phase` when
    ``include_phase`` (which needs ``geom``).  Scatterers sharing a grid index
    add up.
    """
    amps = np.zeros((grid.n_points, len(subs)), dtype=complex)
    offsets = np.array([s.offset for s in subs])
    for p in scene.profiles:
        if not 0 <= p.grid_index < grid.n_points:
            raise IndexError(f"grid index {p.grid_index} outside grid of {grid.n_points}")
        amps[p.grid_index] += p.amplitude * p.visibility(offsets)
    if include_phase:
        if geom is None:
            raise ValueError("geom is required when include_phase is set")
        phases = propagation_phase(geom, grid, subs)
    else:
        phases = np.ones_like(amps)
    return UnknownMatrix(values=amps * phases, support=scene.support,
                         amplitudes=amps, phases=phases)


def make_orthogonal_rows(support: Sequence[int], n_views: int, seed: int,
                         n_rows: int | None = None,
                         magnitude_range: tuple[float, float] = (0.5, 2.0)) -> UnknownMatrix:
    """Random ``X`` whose nonzero rows (indexed by ``support``) are orthogonal.

    Rows are taken from a Haar-random unitary and scaled by random positive
    magnitudes.  ``n_rows`` defaults to ``max(support) + 1``.
    """
    support = tuple(sorted(set(int(s) for s in support)))
    if len(support) > n_views:
        raise ValueError("cannot have more orthogonal rows than views")
    n_rows = max(support) + 1 if n_rows is None else n_rows
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_views, n_views)) + 1j * rng.standard_normal((n_views, n_views))
    qmat, rmat = np.linalg.qr(z)
    qmat = qmat * (np.diag(rmat) / np.abs(np.diag(rmat)))
    mags = rng.uniform(*magnitude_range, size=len(support))
    X = np.zeros((n_rows, n_views), dtype=complex)
    X[list(support)] = mags[:, None] * qmat[: len(support)]
    return UnknownMatrix(values=X, support=support)


def scaling_diagnostics(geom: ApertureGeometry, sub_length: float, grid: ImagingGrid,
                        range_extent: float = 0.0, bandwidth: float = 0.0,
                        warn: bool = True) -> dict:
    """Fresnel numbers and smallness ratios of the reduced data model.

    Returns a dict of the ratios; emits a ``RuntimeWarning`` (not an error)
    for any that fall outside the regime the linearized model assumes.
    """
    lam = geom.wavelength
    L = geom.standoff
    a = sub_length
    yperp = float(np.max(np.abs(grid.coords))) if grid.n_points else 0.0
    out = {
        "fresnel_aperture": a ** 2 / (lam * L),
        "fresnel_scene": yperp ** 2 / (lam * L),
        "bandwidth_ratio": (bandwidth / geom.frequency) * a * yperp / (lam * L),
        "range_curvature": a ** 2 * range_extent / (lam * L ** 2),
        "crossrange_curvature": a ** 2 * yperp / (lam * L ** 2),
    }
    problems = []
    if out["fresnel_aperture"] < 1:
        problems.append("aperture Fresnel number below 1")
    for key in ("bandwidth_ratio", "range_curvature", "crossrange_curvature"):
        if out[key] > 0.1:
            problems.append(f"{key}={out[key]:.3g} is not small")
    out["warnings"] = problems
    if warn:
        for msg in problems:
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return out

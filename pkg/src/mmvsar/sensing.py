"""Scalar SAR sensing matrices, forward data and the migration image."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (ApertureGeometry, ImagingGrid, Scene, SubAperture, UnknownMatrix,
                       propagation_phase)

__all__ = [
    "SensingMatrix",
    "DataMatrix",
    "NoiseSpec",
    "ExactForward",
    "build_sensing_matrix",
    "exact_forward",
    "column_correlation",
    "coherence",
    "sinc_correlation",
    "forward_data",
    "add_noise",
    "migration_image",
]


@dataclass(frozen=True)
class SensingMatrix:
    """Normalized-column sensing matrix ``G`` of shape ``(N_r, N_y)``."""

    entries: np.ndarray
    wavenumber: float
    reference: SubAperture | None = None
    mode: str = "linearized"

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class NoiseSpec:
    """Complex Gaussian noise with std ``sigma_fraction * max|GX|``."""

    sigma_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_fraction < 0:
            raise ValueError("sigma_fraction must be non-negative")


@dataclass(frozen=True)
class DataMatrix:
    entries: np.ndarray
    clean: np.ndarray
    noise: np.ndarray
    sigma: float
    sigma_fraction: float
    seed: int

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def build_sensing_matrix(geom: ApertureGeometry, grid: ImagingGrid, ref: SubAperture,
                         mode: str = "linearized") -> SensingMatrix:
    """Sensing matrix relative to the reference sub-aperture ``ref``.

    ``linearized``: ``exp[-2ik dr_j . P dy_q / L] / sqrt(N_r)`` with offsets
    from the sub-aperture and scene centers.  ``exact``: the full round-trip
    phase ``exp[2ik |r_j - y_q|] / sqrt(N_r)``.
    """
    k = geom.wavenumber
    nr = ref.n_positions
    if mode == "linearized":
        dr = ref.positions - ref.center
        dy = grid.points - geom.scene_center
        phase = -2.0 * k * (dr @ ref.projector @ dy.T) / ref.standoff
    elif mode == "exact":
        dist = np.linalg.norm(ref.positions[:, None, :] - grid.points[None, :, :], axis=2)
        phase = 2.0 * k * dist
    else:
        raise ValueError(f"unknown phase mode {mode!r}")
    G = np.exp(1j * phase) / np.sqrt(nr)
    G.setflags(write=False)
    return SensingMatrix(entries=G, wavenumber=k, reference=ref, mode=mode)


def _deramped_kernel(geom: ApertureGeometry, positions: np.ndarray,
                     points: np.ndarray) -> np.ndarray:
    k = geom.wavenumber
    dist = np.linalg.norm(positions[:, None, :] - points[None, :, :], axis=2)
    dist0 = np.linalg.norm(positions - geom.scene_center, axis=1)
    return np.exp(2j * k * (dist - dist0[:, None])) / np.sqrt(positions.shape[0])


@dataclass(frozen=True)
class ExactForward:
    """Per-view single-scattering simulator with exact travel-time phases.

    Data of view ``v`` is ``D[j, v] = sum_q K_v[j, q] rho_q(r_j)``, where
    ``K_v`` is the down-ramped round-trip kernel of the view's antennas,
    ``exp[2ik (|r_j - y_q| - |r_j - y_center|)] / sqrt(N_r)``, and the
    reflectivity is evaluated at each antenna position when a scene is given
    (so it may vary within the sub-aperture).
    """

    geom: ApertureGeometry
    grid: ImagingGrid
    subs: tuple[SubAperture, ...]
    kernels: tuple[np.ndarray, ...]
    phases: np.ndarray  # propagation phase absorbed into X, (N_y, N_v)

    @property
    def n_rows(self) -> int:
        return self.kernels[0].shape[0]

    def apply(self, X) -> np.ndarray:
        """Data for an unknown ``X`` that is constant over each sub-aperture."""
        X = np.asarray(getattr(X, "values", X))
        amps = X / self.phases
        return np.stack([K @ amps[:, v] for v, K in enumerate(self.kernels)], axis=1)

    def apply_scene(self, scene: Scene) -> np.ndarray:
        """Data with the reflectivity evaluated at every antenna position."""
        tau = self.geom.tangent
        out = np.zeros((self.n_rows, len(self.subs)), dtype=complex)
        for v, (sub, K) in enumerate(zip(self.subs, self.kernels)):
            s = (sub.positions - self.geom.aperture_center) @ tau
            for p in scene.profiles:
                out[:, v] += K[:, p.grid_index] * (p.amplitude * p.visibility(s))
        return out


def exact_forward(geom: ApertureGeometry, grid: ImagingGrid,
                  subs: Sequence[SubAperture], include_phase: bool = True) -> ExactForward:
    kernels = tuple(_deramped_kernel(geom, s.positions, grid.points) for s in subs)
    if len({K.shape for K in kernels}) != 1:
        raise ValueError("all sub-apertures must have the same number of antennas")
    if include_phase:
        phases = propagation_phase(geom, grid, subs)
    else:
        phases = np.ones((grid.n_points, len(subs)), dtype=complex)
    return ExactForward(geom=geom, grid=grid, subs=tuple(subs), kernels=kernels,
                        phases=phases)


def column_correlation(G, j: int, q: int) -> complex:
    """Hermitian inner product ``g_j^* g_q`` of two sensing columns."""
    G = np.asarray(G)
    return complex(np.vdot(G[:, j], G[:, q]))


def coherence(G) -> np.ndarray:
    """All column correlations, ``mu[j, q] = g_j^* g_q``."""
    G = np.asarray(G)
    return G.conj().T @ G


def sinc_correlation(geom: ApertureGeometry, ref: SubAperture, separation) -> np.ndarray:
    """Continuum approximation ``sinc(k a tau . P (y_q - y_l) / L)``.

    ``separation`` is the cross-range offset along the tangent in meters;
    ``sinc(x) = sin(x)/x``.
    """
    if not ref.length > 0:
        raise ValueError("sub-aperture length must be positive")
    sep = np.asarray(separation, dtype=float)
    tau = geom.tangent
    proj_tau = float(tau @ ref.projector @ tau)
    x = geom.wavenumber * ref.length * proj_tau * sep / ref.standoff
    return np.sinc(x / np.pi)


def forward_data(G, X, noise: NoiseSpec | None = None, scene: Scene | None = None) -> DataMatrix:
    """Data ``D = G_sim X + W``.

    ``G`` is a :class:`SensingMatrix` (or array), giving ``G X``, or an
    :class:`ExactForward` simulator.  With a simulator and a ``scene`` the
    reflectivity is sampled per antenna.  The noise std is
    ``sigma_fraction`` times the largest modulus of the noiseless data.
    """
    noise = noise or NoiseSpec()
    if isinstance(G, ExactForward):
        clean = G.apply_scene(scene) if scene is not None else G.apply(X)
    else:
        Gm = np.asarray(G)
        Xm = np.asarray(getattr(X, "values", X))
        if Gm.shape[1] != Xm.shape[0]:
            raise ValueError(f"dimension mismatch: G is {Gm.shape}, X is {Xm.shape}")
        clean = Gm @ Xm
    return add_noise(clean, noise)


def add_noise(clean, noise: NoiseSpec | None = None) -> DataMatrix:
    """Complex Gaussian noise scaled to the largest modulus of ``clean``."""
    noise = noise or NoiseSpec()
    clean = np.array(clean, dtype=complex)
    sigma = noise.sigma_fraction * (float(np.max(np.abs(clean))) if clean.size else 0.0)
    rng = np.random.default_rng(noise.seed)
    # E|w|^2 = sigma^2 for each complex entry
    W = sigma / np.sqrt(2.0) * (rng.standard_normal(clean.shape)
                                + 1j * rng.standard_normal(clean.shape))
    D = clean + W
    for arr in (D, clean, W):
        arr.setflags(write=False)
    return DataMatrix(entries=D, clean=clean, noise=W, sigma=sigma,
                      sigma_fraction=noise.sigma_fraction, seed=noise.seed)


def migration_image(G, d) -> np.ndarray:
    """Matched-filter image ``|g_q^* d|`` for every grid point.

    ``d`` may be a data vector or a matrix, whose columns are summed first.
    """
    G = np.asarray(G)
    d = np.asarray(getattr(d, "entries", d))
    if d.ndim == 2:
        d = d.sum(axis=1)
    if d.shape[0] != G.shape[0]:
        raise ValueError("data length does not match the sensing matrix")
    return np.abs(G.conj().T @ d)

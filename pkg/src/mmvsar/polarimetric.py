"""Polarimetric data model with symmetric reflectivity tensors.

A symmetric ``3 x 3`` tensor ``rho`` is stored as the row
``(rho11, rho22, rho33, rho12, rho13, rho23)`` in the frame ``u1 = tau x u3``,
``u2 = tau``, ``u3`` vertical.  In the far field the round trip maps it to
the upper triangle of ``P rho P`` with ``P = I - n n^T`` and ``n`` the unit
vector from the scene center to the sub-aperture center; in row form this is
``rho_row @ Gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import ApertureGeometry, ImagingGrid, SubAperture, propagation_phase, window_value
from .sensing import DataMatrix, NoiseSpec, _deramped_kernel, add_noise

__all__ = [
    "COMPONENTS",
    "FROBENIUS_WEIGHTS",
    "TensorScatterer",
    "ReflectivityTensor",
    "GammaMatrix",
    "ProjectionEigenbasis",
    "PolarimetricForward",
    "frame",
    "direction_cosines",
    "tensor_to_row",
    "row_to_tensor",
    "green_tensor_far_field",
    "green_tensor_exact",
    "gamma_matrix",
    "gamma_for_position",
    "projection_eigenbasis",
    "pol_unknown_matrix",
    "pol_forward",
    "recover_tensor_minnorm",
]

COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
# squared Frobenius norm of a symmetric tensor in row form
FROBENIUS_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


def tensor_to_row(rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (3, 3):
        raise ValueError("tensor must be 3 x 3")
    if not np.allclose(rho, rho.T, atol=1e-12 * max(1.0, float(np.abs(rho).max()))):
        raise ValueError("tensor must be symmetric")
    return np.array([rho[i, j] for i, j in COMPONENTS])


def row_to_tensor(row) -> np.ndarray:
    row = np.asarray(row)
    if row.shape != (6,):
        raise ValueError("row form has six entries")
    out = np.zeros((3, 3), dtype=row.dtype)
    for val, (i, j) in zip(row, COMPONENTS):
        out[i, j] = out[j, i] = val
    return out


@dataclass(frozen=True)
class ReflectivityTensor:
    """Symmetric tensor with its row form and, if known, transverse block."""

    matrix: np.ndarray
    row: np.ndarray
    transverse: np.ndarray | None = None


@dataclass(frozen=True)
class GammaMatrix:
    entries: np.ndarray
    eta1: float
    eta2: float
    beta: float

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class ProjectionEigenbasis:
    """Orthonormal ``v1, v2, v3`` with ``v3`` along the viewing direction."""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.v1, self.v2, self.v3])


@dataclass(frozen=True)
class TensorScatterer:
    """Point scatterer with a (possibly direction dependent) tensor."""

    grid_index: int
    tensor: np.ndarray
    visibility_center: float = 0.0
    visibility_width: float = 1.0
    window: str = "constant"

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        if t.shape == (6,):
            t = row_to_tensor(t)
        tensor_to_row(t)  # validates symmetry
        object.__setattr__(self, "tensor", t)


def frame(geom: ApertureGeometry) -> np.ndarray:
    """Rows ``u1, u2, u3`` of the tensor frame expressed in world axes."""
    u3 = np.array([0.0, 0.0, 1.0])
    u2 = geom.tangent
    u1 = np.cross(u2, u3)
    n1 = np.linalg.norm(u1)
    if n1 < 1e-12:
        raise ValueError("aperture tangent must not be vertical")
    return np.vstack([u1 / n1, u2, u3])


def direction_cosines(geom: ApertureGeometry, position) -> tuple[float, float, float]:
    """``(eta1, eta2, beta)`` of ``position - scene_center`` in the tensor frame."""
    d = np.asarray(position, dtype=float) - geom.scene_center
    L = float(np.linalg.norm(d))
    if L == 0:
        raise ValueError("position coincides with the scene center")
    e1, e2, b = frame(geom) @ (d / L)
    return float(e1), float(e2), float(b)


def green_tensor_far_field(eta1: float, eta2: float, beta: float) -> np.ndarray:
    """``I - n n^T`` with ``n = (eta1, eta2, beta)``; amplitude and phase omitted."""
    n = np.array([eta1, eta2, beta], dtype=float)
    if abs(n @ n - 1.0) > 1e-9:
        raise ValueError("direction cosines must have unit norm")
    return np.eye(3) - np.outer(n, n)


def green_tensor_exact(k: float, r, y) -> np.ndarray:
    """Dyadic Green's tensor ``(I + grad grad^T / k^2) exp(ikR) / (4 pi R)``."""
    R = np.asarray(r, float) - np.asarray(y, float)
    dist = float(np.linalg.norm(R))
    if dist == 0:
        raise ValueError("source and receiver coincide")
    Rh = R / dist
    kr = k * dist
    a = 1 + 1j / kr - 1 / kr ** 2
    b = 1 + 3j / kr - 3 / kr ** 2
    return np.exp(1j * kr) / (4 * np.pi * dist) * (a * np.eye(3) - b * np.outer(Rh, Rh))


def gamma_matrix(eta1: float, eta2: float, beta: float) -> GammaMatrix:
    """The ``6 x 6`` matrix with ``row(P rho P) = row(rho) @ Gamma``.

    Row ``i`` holds the contribution of input component ``i``; the rows of
    off-diagonal inputs carry a factor 2 where the tensor entry appears
    twice in the sandwich.
    """
    e1, e2, b = float(eta1), float(eta2), float(beta)
    if abs(e1 * e1 + e2 * e2 + b * b - 1.0) > 1e-9:
        raise ValueError("direction cosines must have unit norm")
    s1, s2, s3 = 1 - e1 ** 2, 1 - e2 ** 2, 1 - b ** 2
    diag = np.array([
        s1 ** 2, s2 ** 2, s3 ** 2,
        s1 * s2 + (e1 * e2) ** 2,
        s1 * s3 + (e1 * b) ** 2,
        s2 * s3 + (e2 * b) ** 2,
    ])
    off = np.array([
        [0, (e1 * e2) ** 2, (e1 * b) ** 2, -e1 * e2 * s1, -e1 * b * s1, e1 ** 2 * e2 * b],
        [(e1 * e2) ** 2, 0, (e2 * b) ** 2, -e1 * e2 * s2, e1 * e2 ** 2 * b, -e2 * b * s2],
        [(e1 * b) ** 2, (e2 * b) ** 2, 0, e1 * e2 * b ** 2, -e1 * b * s3, -e2 * b * s3],
        [-2 * e1 * e2 * s1, -2 * e1 * e2 * s2, 2 * e1 * e2 * b ** 2, 0,
         e2 * b * (2 * e1 ** 2 - 1), e1 * b * (2 * e2 ** 2 - 1)],
        [-2 * e1 * b * s1, 2 * e1 * e2 ** 2 * b, -2 * e1 * b * s3, e2 * b * (2 * e1 ** 2 - 1),
         0, e1 * e2 * (2 * b ** 2 - 1)],
        [2 * e1 ** 2 * e2 * b, -2 * e2 * b * s2, -2 * e2 * b * s3, e1 * b * (2 * e2 ** 2 - 1),
         e1 * e2 * (2 * b ** 2 - 1), 0],
    ])
    M = np.diag(diag) + off
    M.setflags(write=False)
    return GammaMatrix(entries=M, eta1=e1, eta2=e2, beta=b)


def gamma_for_position(geom: ApertureGeometry, position) -> GammaMatrix:
    return gamma_matrix(*direction_cosines(geom, position))


def projection_eigenbasis(direction) -> ProjectionEigenbasis:
    """Eigenvectors of ``I - n n^T`` with ``v3 = n``.

    ``v1, v2`` come from Gram-Schmidt on ``u1, u2`` against ``v3``, with
    ``u3`` used in place of a degenerate candidate.
    """
    d = np.asarray(direction, dtype=float)
    nrm = float(np.linalg.norm(d))
    if nrm == 0:
        raise ValueError("direction must be nonzero")
    v3 = d / nrm
    basis = [v3]
    for cand in np.eye(3):
        w = cand - sum((cand @ b) * b for b in basis)
        wn = np.linalg.norm(w)
        if wn > 1e-8:
            basis.append(w / wn)
        if len(basis) == 3:
            break
    return ProjectionEigenbasis(v1=basis[1], v2=basis[2], v3=v3)


def _visibility(sc: TensorScatterer, s: np.ndarray) -> np.ndarray:
    return window_value(sc.window, (s - sc.visibility_center) / sc.visibility_width)


@dataclass(frozen=True)
class PolarimetricForward:
    """Per-view kernels and Gamma matrices of a polarimetric acquisition.

    Column ``6 v + c`` of the unknown is component ``c`` of
    ``row(rho_q) @ Gamma_v`` times the propagation phase of view ``v``.
    """

    geom: ApertureGeometry
    grid: ImagingGrid
    subs: tuple[SubAperture, ...]
    kernels: tuple[np.ndarray, ...] = field(repr=False)
    gammas: tuple[GammaMatrix, ...] = field(repr=False)
    phases: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, geom: ApertureGeometry, grid: ImagingGrid, subs: Sequence[SubAperture],
              include_phase: bool = True) -> "PolarimetricForward":
        kernels = tuple(_deramped_kernel(geom, s.positions, grid.points) for s in subs)
        gammas = tuple(gamma_for_position(geom, s.center) for s in subs)
        if include_phase:
            phases = propagation_phase(geom, grid, subs)
        else:
            phases = np.ones((grid.n_points, len(subs)), dtype=complex)
        return cls(geom, grid, tuple(subs), kernels, gammas, phases)

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X)
        nv = len(self.subs)
        if X.shape != (self.grid.n_points, 6 * nv):
            raise ValueError(f"expected unknown of shape {(self.grid.n_points, 6 * nv)}")
        out = []
        for v, K in enumerate(self.kernels):
            out.append(K @ (X[:, 6 * v:6 * v + 6] / self.phases[:, v:v + 1]))
        return np.concatenate(out, axis=1)


def pol_unknown_matrix(scatterers: Sequence[TensorScatterer], fwd: PolarimetricForward
                       ) -> np.ndarray:
    """Unknown with rows ``row(rho_q(r_v)) @ Gamma_v`` stacked over views."""
    nv = len(fwd.subs)
    X = np.zeros((fwd.grid.n_points, 6 * nv), dtype=complex)
    s = np.array([sub.offset for sub in fwd.subs])
    for sc in scatterers:
        if not 0 <= sc.grid_index < fwd.grid.n_points:
            raise IndexError(f"grid index {sc.grid_index} outside the grid")
        row = tensor_to_row(sc.tensor)
        vis = _visibility(sc, s)
        for v, gam in enumerate(fwd.gammas):
            X[sc.grid_index, 6 * v:6 * v + 6] += vis[v] * (row @ gam.entries)
    return X * np.repeat(fwd.phases, 6, axis=1)


def pol_forward(scatterers: Sequence[TensorScatterer], fwd: PolarimetricForward,
                noise: NoiseSpec | None = None) -> DataMatrix:
    """Polarimetric data ``N_r x 6 N_v`` of the scatterers plus noise."""
    return add_noise(fwd.apply(pol_unknown_matrix(scatterers, fwd)), noise)


def recover_tensor_minnorm(x_row, gamma, basis: ProjectionEigenbasis | None = None,
                           rtol: float = 1e-8, weighting: str = "frobenius"
                           ) -> ReflectivityTensor:
    """Smallest tensor reproducing the data row ``x_row = row(rho) @ Gamma``.

    With ``weighting="frobenius"`` the tensor of least Frobenius norm is
    returned, which has no component along the viewing direction.
    ``weighting="euclidean"`` minimizes the plain norm of the six-entry row
    instead.  Singular values below ``rtol`` times the largest are dropped.
    """
    x = np.asarray(x_row)
    G = np.asarray(getattr(gamma, "entries", gamma))
    if weighting == "frobenius":
        w = np.sqrt(FROBENIUS_WEIGHTS)
    elif weighting == "euclidean":
        w = np.ones(6)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    M = G / w[:, None]
    U, s, Vh = np.linalg.svd(M)
    keep = s > rtol * s[0]
    pinv = (Vh[keep].conj().T / s[keep]) @ U[:, keep].conj().T
    y = x @ pinv
    row = y / w
    if np.isrealobj(x):
        row = row.real
    mat = row_to_tensor(row)
    trans = None
    if basis is not None:
        V = basis.matrix[:, :2]
        trans = V.T @ mat @ V
    return ReflectivityTensor(matrix=mat, row=row, transverse=trans)

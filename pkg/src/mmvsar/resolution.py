"""Resolution analysis: semimetric, interaction coefficients and support splits.

All quantities are computed from the column correlations
``mu(g_j, g_q) = g_j^* g_q`` of a unit-column sensing matrix and, for the
multiple view coefficient, from the normalized rows of the unknown matrix.

Ties (in the nearest support point, the support partition and the cluster
sets) go to the smaller grid index.  Two semimetric values are treated as
tied when they agree to ``TIE_TOL``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .solver import row_norms

__all__ = [
    "TIE_TOL",
    "SemimetricTable",
    "CoefficientProfile",
    "InteractionReport",
    "SupportSplit",
    "ProjectedEstimate",
    "ClusterDecomposition",
    "semimetric_table",
    "nearest_support_index",
    "nearest_support_map",
    "vicinity_set",
    "interaction_single",
    "interaction_multi",
    "interaction_report",
    "phase_alignment_sup",
    "rows_are_orthogonal",
    "extract_support",
    "split_reconstruction",
    "projected_estimate",
    "support_partition",
    "effective_matrix",
    "cluster_sets",
    "cluster_decompose",
    "cluster_effective_matrix",
    "cluster_interaction",
]

TIE_TOL = 1e-12


@dataclass(frozen=True)
class SemimetricTable:
    """``values[j, q] = 1 - |mu(g_j, g_q)|`` and the correlations behind it."""

    values: np.ndarray
    correlation: np.ndarray

    @property
    def n_points(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CoefficientProfile:
    """An interaction coefficient with its per-pixel values.

    ``value`` is the maximum of ``per_pixel`` over the grid, attained at
    ``argmax``.  ``lower_bound`` is set when the per-pixel values come from
    a numerical maximization and may underestimate the supremum.
    """

    value: float
    per_pixel: np.ndarray
    argmax: int
    nearest: np.ndarray
    mode: str = "single"
    lower_bound: bool = False


@dataclass(frozen=True)
class InteractionReport:
    I1: float
    INv: float
    per_pixel_I1: np.ndarray
    per_pixel_INv: np.ndarray
    argmax: int
    nearest: np.ndarray
    mode: str
    lower_bound: bool

    def to_dict(self) -> dict:
        return {"I1": self.I1, "INv": self.INv, "argmax": int(self.argmax),
                "mode": self.mode, "lower_bound": self.lower_bound}


@dataclass(frozen=True)
class SupportSplit:
    """``X_eps = near + far`` with ``near`` supported in the r-vicinity of S."""

    near: np.ndarray
    far: np.ndarray
    r: float
    vicinity: np.ndarray


@dataclass(frozen=True)
class ProjectedEstimate:
    """Least-squares transfer of a reconstruction onto the rows of ``S``.

    ``values`` is supported on ``S`` with ``values[S] = G_S^+ G X``;
    ``residual = X - values`` satisfies ``G_S^* G residual = 0``, whose size
    is reported in ``orthogonality``.
    """

    values: np.ndarray
    residual: np.ndarray
    condition: float
    orthogonality: float


@dataclass(frozen=True)
class ClusterDecomposition:
    centers: tuple[int, ...]
    sets: dict = field(repr=False)
    radius: float
    separation: float
    separated: bool
    U: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    orthogonality: float = 0.0


def _G(G) -> np.ndarray:
    return np.asarray(getattr(G, "entries", G))


def _index_set(S) -> np.ndarray:
    S = np.unique(np.asarray(list(S), dtype=int))
    return S


def semimetric_table(G) -> SemimetricTable:
    """Semimetric ``1 - |mu|`` between all pairs of grid points."""
    G = _G(G)
    mu = G.conj().T @ G
    D = 1.0 - np.abs(mu)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    np.clip(D, 0.0, 1.0, out=D)
    D.setflags(write=False)
    mu.setflags(write=False)
    return SemimetricTable(values=D, correlation=mu)


def _first_min(rows: np.ndarray) -> np.ndarray:
    """Column of the smallest entry per row, first column among near ties."""
    m = rows.min(axis=1, keepdims=True)
    return np.argmax(rows <= m + TIE_TOL, axis=1)


def nearest_support_map(table: SemimetricTable, S) -> np.ndarray:
    """``n(j)`` for every grid point ``j``."""
    S = _index_set(S)
    if S.size == 0:
        raise ValueError("support set is empty")
    return S[_first_min(table.values[:, S])]


def nearest_support_index(table: SemimetricTable, S, j: int) -> int:
    """Support point closest to ``j`` in the semimetric."""
    S = _index_set(S)
    if S.size == 0:
        raise ValueError("support set is empty")
    return int(S[_first_min(table.values[j:j + 1, S])[0]])


def vicinity_set(table: SemimetricTable, S, r: float) -> np.ndarray:
    """Grid points within semimetric distance ``r`` (strictly) of ``S``."""
    S = _index_set(S)
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    if S.size == 0:
        return np.zeros(0, dtype=int)
    dist = table.values[:, S].min(axis=1)
    near = dist < r
    near[S] = True
    return np.flatnonzero(near)


def _cross_weights(G, S):
    """``|mu(g_j, g_q)|`` for q in S with the ``n(j)`` entry zeroed."""
    G = _G(G)
    S = _index_set(S)
    if S.size == 0:
        raise ValueError("support set is empty")
    A = np.abs(G.conj().T @ G[:, S])
    D = 1.0 - A
    col = _first_min(D)
    nearest = S[col]
    A[np.arange(A.shape[0]), col] = 0.0
    return A, nearest, S


def interaction_single(G, S) -> CoefficientProfile:
    """Single view coefficient ``max_j sum_{q in S, q != n(j)} |mu(g_j, g_q)|``."""
    A, nearest, _ = _cross_weights(G, S)
    per = A.sum(axis=1)
    m = int(np.argmax(per))
    return CoefficientProfile(value=float(per[m]), per_pixel=per, argmax=m,
                              nearest=nearest, mode="single")


def _normalized_rows(X, S) -> np.ndarray:
    X = np.asarray(getattr(X, "values", X))
    if X.ndim == 1:
        X = X[:, None]
    rows = X[S]
    nrm = row_norms(rows)
    if np.any(nrm == 0):
        bad = S[nrm == 0]
        raise ValueError(f"rows {bad.tolist()} of X are zero but listed in the support")
    return rows / nrm[:, None]


def rows_are_orthogonal(X, S, tol: float = 1e-8) -> bool:
    """Whether the normalized rows of ``X`` on ``S`` have identity Gram matrix."""
    S = _index_set(S)
    Xh = _normalized_rows(X, S)
    gram = Xh @ Xh.conj().T
    return bool(np.max(np.abs(gram - np.eye(S.size))) <= tol)


def phase_alignment_sup(weights, rows, restarts: int = 32, seed: int = 0,
                        max_iter: int = 500, tol: float = 1e-13,
                        return_trace: bool = False):
    """Maximize ``sum_q a_q |<v, x_q>|`` over unit row vectors ``v``.

    ``weights`` has shape ``(P, m)`` (one problem per pixel) and ``rows``
    holds ``m`` unit rows of length ``N_v``.  Each problem starts from
    ``restarts`` random unit vectors and from every ``rows[q]``, and iterates
    the ascent map ``v <- normalize(sum_q a_q phase(<v, x_q>) x_q)`` with
    ``<v, x> = v x^*``.  The best value per problem is returned; it is a
    lower bound on the supremum.  With ``return_trace`` the per-iteration
    maxima are returned as well, a non-decreasing sequence.
    """
    a = np.atleast_2d(np.asarray(weights, dtype=float))
    Xh = np.atleast_2d(np.asarray(rows, dtype=complex))
    P, m = a.shape
    nv = Xh.shape[1]
    rng = np.random.default_rng(seed)
    V0 = rng.standard_normal((restarts, nv)) + 1j * rng.standard_normal((restarts, nv))
    V0 /= np.linalg.norm(V0, axis=1, keepdims=True)
    V0 = np.concatenate([V0, Xh], axis=0)
    V = np.broadcast_to(V0, (P,) + V0.shape).copy()
    trace = []
    best = np.zeros(P)
    for _ in range(max_iter):
        ip = V @ Xh.conj().T  # (P, starts, m)
        mod = np.abs(ip)
        val = np.einsum("pm,psm->ps", a, mod)
        cur = val.max(axis=1)
        trace.append(cur.copy())
        improved = np.max(cur - best) if trace[1:] else np.inf
        best = np.maximum(best, cur)
        if improved <= tol * max(1.0, float(best.max())):
            break
        ph = np.where(mod > 0, ip / np.where(mod > 0, mod, 1.0), 1.0)
        Y = (a[:, None, :] * ph) @ Xh
        ny = np.linalg.norm(Y, axis=2, keepdims=True)
        V = np.where(ny > 0, Y / np.where(ny > 0, ny, 1.0), V)
    if return_trace:
        return best, np.array(trace)
    return best


def interaction_multi(G, X, S, mode: str = "auto", restarts: int = 32,
                      seed: int = 0, max_iter: int = 500) -> CoefficientProfile:
    """Multiple view coefficient of ``(G, X)`` over the support ``S``.

    ``mode="closed_form"`` uses ``max_j sqrt(sum_q |mu(g_j, g_q)|^2)``,
    exact when the rows of ``X`` on ``S`` are orthogonal (checked).
    ``mode="numeric_sup"`` maximizes over unit vectors with
    :func:`phase_alignment_sup` and flags the result as a lower bound.
    ``mode="auto"`` picks the closed form whenever it applies.
    """
    A, nearest, S = _cross_weights(G, S)
    if mode not in ("auto", "closed_form", "numeric_sup"):
        raise ValueError(f"unknown mode {mode!r}")
    X = np.asarray(getattr(X, "values", X))
    if X.ndim == 1:
        X = X[:, None]
    if S.size == 1:
        per = np.zeros(A.shape[0])
        return CoefficientProfile(0.0, per, 0, nearest, mode="closed_form")
    orth = S.size <= X.shape[1] and rows_are_orthogonal(X, S)
    if mode == "closed_form" and not orth:
        raise ValueError("closed form needs orthogonal nonzero rows with |S| <= N_v")
    if mode == "auto":
        mode = "closed_form" if orth else "numeric_sup"
    if mode == "closed_form":
        per = np.sqrt(np.sum(A ** 2, axis=1))
        lower = False
    else:
        Xh = _normalized_rows(X, S)
        per = np.zeros(A.shape[0])
        active = np.flatnonzero(A.sum(axis=1) > 0)
        # chunk pixels to bound memory
        chunk = max(1, int(4e6 // ((restarts + S.size) * (X.shape[1] + S.size))))
        for start in range(0, active.size, chunk):
            idx = active[start:start + chunk]
            per[idx] = phase_alignment_sup(A[idx], Xh, restarts=restarts, seed=seed,
                                           max_iter=max_iter)
        lower = True
    m = int(np.argmax(per))
    return CoefficientProfile(value=float(per[m]), per_pixel=per, argmax=m,
                              nearest=nearest, mode=mode, lower_bound=lower)


def interaction_report(G, X, S, mode: str = "auto", **kw) -> InteractionReport:
    single = interaction_single(G, S)
    multi = interaction_multi(G, X, S, mode=mode, **kw)
    return InteractionReport(I1=single.value, INv=multi.value,
                             per_pixel_I1=single.per_pixel, per_pixel_INv=multi.per_pixel,
                             argmax=multi.argmax, nearest=single.nearest, mode=multi.mode,
                             lower_bound=multi.lower_bound)


def extract_support(Z, threshold: float = 0.1) -> np.ndarray:
    """Rows whose norm is at least ``threshold`` times the largest row norm."""
    nrm = row_norms(np.asarray(Z))
    top = float(nrm.max()) if nrm.size else 0.0
    if top == 0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(nrm >= threshold * top)


def split_reconstruction(Xeps, table: SemimetricTable, S, r: float,
                         INv: float | None = None) -> SupportSplit:
    """Split ``Xeps`` by membership of its rows in the r-vicinity of ``S``.

    When ``INv`` is given and ``2 INv >= r`` a warning notes that the
    support estimate does not apply to this split.
    """
    if INv is not None and not 2 * INv < r:
        warnings.warn(f"2*INv = {2 * INv:.3g} is not below r = {r:.3g}", RuntimeWarning,
                      stacklevel=2)
    Xeps = np.asarray(Xeps)
    B = vicinity_set(table, S, r)
    mask = np.zeros(Xeps.shape[0], dtype=bool)
    mask[B] = True
    near = np.where(mask[:, None], Xeps, 0)
    far = np.where(mask[:, None], 0, Xeps)
    return SupportSplit(near=near, far=far, r=r, vicinity=B)


def _restricted_pinv(Gs: np.ndarray, rtol: float = 1e-10):
    U, s, Vh = np.linalg.svd(Gs, full_matrices=False)
    if s.size == 0 or s[-1] <= rtol * s[0]:
        raise np.linalg.LinAlgError("restricted sensing matrix is rank deficient")
    return (Vh.conj().T / s) @ U.conj().T, float(s[0] / s[-1])


def projected_estimate(G, S, X) -> ProjectedEstimate:
    """Matrix on ``S`` whose data best match ``G X`` in least squares."""
    G = _G(G)
    S = _index_set(S)
    X = np.asarray(X)
    pinv, cond = _restricted_pinv(G[:, S])
    out = np.zeros_like(X, dtype=complex)
    out[S] = pinv @ (G @ X)
    resid = X - out
    orth = float(np.linalg.norm(G[:, S].conj().T @ (G @ resid)))
    return ProjectedEstimate(values=out, residual=resid, condition=cond, orthogonality=orth)


def support_partition(table: SemimetricTable, S, rows) -> dict:
    """Assign every index in ``rows`` to its closest support point.

    Returns ``{j: array of rows}`` over ``j in S``; near ties go to the
    smaller support index.
    """
    S = _index_set(S)
    rows = np.asarray(sorted(set(int(i) for i in rows)), dtype=int)
    out = {int(j): np.zeros(0, dtype=int) for j in S}
    if rows.size == 0:
        return out
    owner = S[_first_min(table.values[np.ix_(rows, S)])]
    for j in S:
        out[int(j)] = rows[owner == j]
    return out


def _aggregate(mu: np.ndarray, parts: dict, X: np.ndarray) -> np.ndarray:
    out = np.zeros_like(X, dtype=complex)
    for j, members in parts.items():
        if members.size:
            out[j] = mu[j, members] @ X[members]
    return out


def effective_matrix(G, table: SemimetricTable, S, X_near) -> np.ndarray:
    """Row-wise aggregate of ``X_near`` onto ``S`` weighted by correlations.

    Row ``j`` in ``S`` is ``sum_l mu(g_j, g_l) X_near[l]`` over the nonzero
    rows ``l`` closest to ``j``; other rows are zero.
    """
    X_near = np.asarray(X_near)
    rows = np.flatnonzero(row_norms(X_near) > 0)
    parts = support_partition(table, S, rows)
    return _aggregate(table.correlation, parts, X_near)


def cluster_sets(table: SemimetricTable, S, C) -> dict:
    """Partition of ``S`` by closest cluster center in ``C``."""
    return support_partition(table, C, S)


def cluster_decompose(G, table: SemimetricTable, X, S, C) -> ClusterDecomposition:
    """Projection of ``X`` on the rows of ``C`` and the cluster geometry.

    ``U`` has ``U[C] = G_C^+ G X`` and ``R = X - U``.  The radius is the
    largest semimetric distance from a cluster set member to its center,
    and ``separated`` reports whether all centers are farther apart than
    that radius.
    """
    G = _G(G)
    X = np.asarray(getattr(X, "values", X))
    C = _index_set(C)
    proj = projected_estimate(G, C, X)
    sets = cluster_sets(table, S, C)
    radius = 0.0
    for j, members in sets.items():
        if members.size:
            radius = max(radius, float(table.values[members, j].max()))
    if C.size > 1:
        sub = table.values[np.ix_(C, C)].copy()
        np.fill_diagonal(sub, np.inf)
        sep = float(sub.min())
    else:
        sep = np.inf
    return ClusterDecomposition(centers=tuple(int(c) for c in C), sets=sets, radius=radius,
                                separation=sep, separated=bool(sep > radius),
                                U=proj.values, R=proj.residual,
                                orthogonality=proj.orthogonality)


def cluster_effective_matrix(table: SemimetricTable, decomp: ClusterDecomposition,
                             X) -> np.ndarray:
    """Aggregate of the rows of ``X`` over each cluster set onto its center."""
    X = np.asarray(getattr(X, "values", X))
    return _aggregate(table.correlation, decomp.sets, X)


def cluster_interaction(G, decomp: ClusterDecomposition, mode: str = "auto",
                        **kw) -> CoefficientProfile:
    """Multiple view coefficient of the cluster matrix ``U`` over the centers."""
    return interaction_multi(G, decomp.U, decomp.centers, mode=mode, **kw)

"""Numerical checks of the support and quantitative error estimates.

Every check returns :class:`BoundReport` objects holding both sides of an
inequality.  A check whose hypotheses fail is still evaluated, but carries
``status="inapplicable"`` so that Monte Carlo suites can exclude it and
count the exclusion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import ApertureGeometry, SubAperture
from .resolution import (ClusterDecomposition, SemimetricTable, cluster_effective_matrix,
                         cluster_interaction, effective_matrix, interaction_multi,
                         interaction_single, projected_estimate, split_reconstruction,
                         _cross_weights, _index_set, _normalized_rows)
from .solver import norm_12, row_norms

__all__ = [
    "BoundReport",
    "support_error_check",
    "projected_error_check",
    "support_functional",
    "functional_checks",
    "cluster_residual_check",
    "cluster_support_check",
    "equal_spacing_gain_check",
    "decay_parameter",
    "row_correlation",
    "row_correlation_bound_check",
    "fit_decay_constant",
]

SLACK = 1e-9


@dataclass(frozen=True)
class BoundReport:
    """``lhs <= rhs`` with a relative slack of ``1e-9 * max(1, rhs)``."""

    name: str
    lhs: float
    rhs: float
    status: str = "applicable"
    context: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs <= self.rhs + SLACK * max(1.0, abs(self.rhs)))

    @property
    def applicable(self) -> bool:
        return self.status == "applicable"

    def to_dict(self) -> dict:
        ctx = {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v)
               for k, v in self.context.items()}
        return {"name": self.name, "lhs": float(self.lhs), "rhs": float(self.rhs),
                "satisfied": self.satisfied, "status": self.status, "context": ctx}


def _G(G):
    return np.asarray(getattr(G, "entries", G))


def _X(X):
    X = np.asarray(getattr(X, "values", X))
    return X[:, None] if X.ndim == 1 else X


def norm_11(Z) -> float:
    return float(np.sum(np.abs(Z)))


def _status(ok: bool) -> str:
    return "applicable" if ok else "inapplicable"


def support_error_check(G, X, Xeps, S, r: float, eps: float, table: SemimetricTable,
                   INv: float | None = None, D=None, mode: str = "auto"
                   ) -> tuple[BoundReport, BoundReport, BoundReport]:
    """Support estimate for the reconstruction error away from ``S``.

    Returns the sharp form, with the data mismatch ``W_eps = G(Xeps - X)``
    on ``S``, the loose form with ``2 eps |S|``, and ``||W_eps||_F <= 2 eps``.
    The first two need ``2 INv < r``; with ``D`` given, all three also need
    the true unknown to be feasible, ``||G X - D||_F <= eps``.
    """
    G, X, Xeps = _G(G), _X(X), _X(Xeps)
    S = _index_set(S)
    if INv is None:
        INv = interaction_multi(G, X, S, mode=mode).value
    feasible = True
    if D is not None:
        feasible = float(np.linalg.norm(G @ X - _X(D))) <= eps
    split = split_reconstruction(Xeps, table, S, r)
    Weps = G @ (Xeps - X)
    gw = norm_12((G.conj().T @ Weps)[S])
    lhs = norm_12(split.far)
    xn = norm_12(Xeps)
    ok = bool(2 * INv < r) and feasible
    ctx = {"INv": INv, "r": r, "eps": eps, "support_size": int(S.size),
           "GW_on_support": gw}
    sharp = BoundReport("support_error_sharp", lhs, 2 * INv / r * xn + gw / r,
                        _status(ok), ctx)
    loose = BoundReport("support_error_loose", lhs, 2 * INv / r * xn + 2 * eps * S.size / r,
                        _status(ok), ctx)
    mismatch = BoundReport("reconstruction_mismatch", float(np.linalg.norm(Weps)), 2 * eps,
                           _status(feasible), {"eps": eps})
    return sharp, loose, mismatch


def projected_error_check(G, X, Xeps, S, r: float, eps: float, table: SemimetricTable,
                   INv: float | None = None, I1: float | None = None, D=None,
                   mode: str = "auto") -> tuple[BoundReport, BoundReport]:
    """Quantitative estimates for the projected and effective matrices.

    The first report bounds ``||P - X||_{1,2}``, with ``P`` the least-squares
    transfer of the near part onto ``S``; the second compares ``P`` with the
    correlation-weighted aggregate of the near part in the ``(1,1)`` norm and
    is inapplicable unless ``I1 < 1``.
    """
    G, X, Xeps = _G(G), _X(X), _X(Xeps)
    S = _index_set(S)
    if INv is None:
        INv = interaction_multi(G, X, S, mode=mode).value
    if I1 is None:
        I1 = interaction_single(G, S).value
    feasible = True
    if D is not None:
        feasible = float(np.linalg.norm(G @ X - _X(D))) <= eps
    split = split_reconstruction(Xeps, table, S, r)
    proj = projected_estimate(G, S, split.near)
    eff = effective_matrix(G, table, S, split.near)
    ok = bool(2 * INv < r) and feasible
    ctx = {"INv": INv, "I1": I1, "r": r, "eps": eps, "support_size": int(S.size),
           "condition": proj.condition}
    quant = BoundReport("projected_error",
                        norm_12(proj.values - X),
                        2 * INv / r * norm_12(Xeps) + 6 * eps * S.size / r,
                        _status(ok), ctx)
    aggr = BoundReport("effective_matrix_gap",
                       (1 - I1) * norm_11(proj.values - eff),
                       2 * I1 * norm_11(split.near),
                       _status(ok and I1 < 1), ctx)
    return quant, aggr


def support_functional(G, X, S, V) -> complex:
    """``tr[(G Xhat)^* V]`` with ``Xhat`` the row-normalized unknown on ``S``."""
    G, X, V = _G(G), _X(X), _X(V)
    S = _index_set(S)
    Xh = np.zeros_like(X, dtype=complex)
    Xh[S] = _normalized_rows(X, S)
    return complex(np.vdot(G @ Xh, V))


def functional_checks(G, X, S, V, X_near, X_far, r: float, INv: float | None = None,
                  mode: str = "auto") -> tuple[BoundReport, ...]:
    """The four inequalities satisfied by the trace functional.

    ``V`` is an arbitrary data-shaped matrix, ``X_near`` is supported in the
    r-vicinity of ``S`` and ``X_far`` outside it.
    """
    G, X = _G(G), _X(X)
    S = _index_set(S)
    if INv is None:
        INv = interaction_multi(G, X, S, mode=mode).value
    L = lambda M: abs(support_functional(G, X, S, M))
    ctx = {"INv": INv, "r": r}
    return (
        BoundReport("functional_vs_restricted_adjoint", L(V),
                    norm_12((G.conj().T @ _X(V))[S]), context=ctx),
        BoundReport("functional_lower_on_unknown", norm_12(X) * (1 - INv), L(G @ X),
                    context=ctx),
        BoundReport("functional_upper_near", L(G @ _X(X_near)), (1 + INv) * norm_12(X_near),
                    context=ctx),
        BoundReport("functional_upper_far", L(G @ _X(X_far)), (1 - r + INv) * norm_12(X_far),
                    context=ctx),
    )


def cluster_residual_check(G, X, decomp: ClusterDecomposition,
                    table: SemimetricTable | None = None) -> tuple[BoundReport, ...]:
    """Cluster residual bound ``||G R||_F <= sqrt(2 r_C) ||X^T||_{2,1}``.

    Applicable when the centers are farther apart than the cluster radius.
    With ``table`` the intermediate estimate through the effective cluster
    matrix, ``||G R||_F <= ||G X - G Xbar||_F``, is reported as well.
    """
    G, X = _G(G), _X(X)
    col_l1 = np.sum(np.abs(X), axis=0)
    rhs = float(np.sqrt(2 * decomp.radius) * np.sqrt(np.sum(col_l1 ** 2)))
    lhs = float(np.linalg.norm(G @ decomp.R))
    ctx = {"radius": decomp.radius, "separation": decomp.separation}
    out = [BoundReport("cluster_residual", lhs, rhs, _status(decomp.separated), ctx)]
    if table is not None:
        Xbar = cluster_effective_matrix(table, decomp, X)
        mid = float(np.linalg.norm(G @ X - G @ Xbar))
        out.append(BoundReport("cluster_residual_projection", lhs, mid, context=ctx))
        out.append(BoundReport("cluster_effective_residual", mid, rhs,
                               _status(decomp.separated), ctx))
    return tuple(out)


def cluster_support_check(G, X, Xeps, decomp: ClusterDecomposition, r: float, eps: float,
                   table: SemimetricTable, D, IU: float | None = None,
                   mode: str = "auto") -> BoundReport:
    """Support estimate around the cluster centers.

    Applicable when the cluster noise ``||D - G U||_F = ||W + G R||_F`` is
    below ``eps`` and ``2 IU < r``.
    """
    G, X, Xeps = _G(G), _X(X), _X(Xeps)
    C = np.asarray(decomp.centers)
    if IU is None:
        IU = cluster_interaction(G, decomp, mode=mode).value
    cluster_noise = float(np.linalg.norm(_X(D) - G @ decomp.U))
    split = split_reconstruction(Xeps, table, C, r)
    Weps = G @ (Xeps - X)
    gw = norm_12((G.conj().T @ Weps)[C])
    ok = cluster_noise < eps and 2 * IU < r
    return BoundReport("cluster_support_error", norm_12(split.far),
                       2 * IU / r * norm_12(Xeps) + gw / r, _status(ok),
                       {"IU": IU, "r": r, "eps": eps, "cluster_noise": cluster_noise,
                        "n_centers": int(C.size)})


def equal_spacing_gain_check(G, S, ratio_limit: float = 2.0) -> BoundReport:
    """``INv <= beta_plus sqrt(|S| - 1)`` for orthogonal rows.

    ``beta_minus`` and ``beta_plus`` are the extreme cross correlations at
    the pixel maximizing the orthogonal-row coefficient.  The estimate is
    applicable when their ratio is at most ``ratio_limit``.
    """
    A, nearest, S = _cross_weights(G, S)
    l2 = np.sqrt(np.sum(A ** 2, axis=1))
    m = int(np.argmax(l2))
    others = np.ones(S.size, dtype=bool)
    others[np.flatnonzero(S == nearest[m])[0]] = False
    gam = A[m, others]
    if gam.size == 0:
        return BoundReport("equal_spacing_gain", 0.0, 0.0, "inapplicable")
    bm, bp = float(gam.min()), float(gam.max())
    ok = bm > 0 and bp / bm <= ratio_limit
    return BoundReport("equal_spacing_gain", float(l2[m]), bp * np.sqrt(S.size - 1),
                       _status(ok), {"beta_minus": bm, "beta_plus": bp,
                                     "I1_at_argmax": float(gam.sum())})


def decay_parameter(geom: ApertureGeometry, separation, span: float | None = None):
    """``Q = 4 pi A tau . P_o (y_q - y_l) / (lambda |r_o - y|)``.

    ``separation`` is a 3-vector or an array of cross-range offsets along
    the tangent (m).  ``span`` replaces the aperture length, e.g. by the
    extent covered by the sub-aperture centers.
    """
    A = geom.aperture_length if span is None else float(span)
    m = geom.aperture_center - geom.scene_center
    L = float(np.linalg.norm(m))
    m = m / L
    Po = np.eye(3) - np.outer(m, m)
    sep = np.asarray(separation, dtype=float)
    if sep.ndim >= 1 and sep.shape[-1] == 3:
        proj = sep @ Po @ geom.tangent
    else:
        proj = sep * float(geom.tangent @ Po @ geom.tangent)
    return 4 * np.pi * A * proj / (geom.wavelength * L)


def row_correlation(X, q: int, l: int) -> float:
    """``|mu(x_q, x_l)|`` of two rows of the unknown matrix."""
    X = _X(X)
    a, b = X[q], X[l]
    den = np.linalg.norm(a) * np.linalg.norm(b)
    if den == 0:
        raise ValueError("row correlation of a zero row")
    return float(abs(np.vdot(b, a)) / den)


def _center_span(subs: Sequence[SubAperture], geom: ApertureGeometry) -> float:
    s = np.array([(sub.center - geom.aperture_center) @ geom.tangent for sub in subs])
    return float(s.max() - s.min())


def row_correlation_bound_check(X, geom: ApertureGeometry, subs: Sequence[SubAperture],
                                grid_points, pair: tuple[int, int], C: float = 2.0
                                ) -> BoundReport:
    """Decay of the correlation of two rows with their cross-range offset.

    Checks ``|mu(x_q, x_l)| <= min(1, C/|Q|)``.  ``Q`` is evaluated with the
    extent covered by the view centers, which is the aperture the rows
    actually sample.  The context carries ``|sinc(Q/2)|``, the prediction
    for direction-independent reflectivity.
    """
    q, l = pair
    pts = np.asarray(getattr(grid_points, "points", grid_points))
    Q = float(decay_parameter(geom, pts[q] - pts[l], span=_center_span(subs, geom)))
    mu = row_correlation(X, q, l)
    bound = 1.0 if Q == 0 else min(1.0, C / abs(Q))
    sinc = float(abs(np.sinc(Q / (2 * np.pi))))
    return BoundReport("row_decorrelation", mu, bound,
                       context={"Q": Q, "C": C, "sinc_half_Q": sinc, "pair": [int(q), int(l)]})


def fit_decay_constant(X, geom: ApertureGeometry, subs: Sequence[SubAperture],
                       grid_points, pairs: Sequence[tuple[int, int]]) -> float:
    """Smallest ``C`` with ``|mu(x_q, x_l)| |Q| <= C`` over the given pairs."""
    pts = np.asarray(getattr(grid_points, "points", grid_points))
    span = _center_span(subs, geom)
    best = 0.0
    for q, l in pairs:
        if q == l:
            continue
        Q = abs(float(decay_parameter(geom, pts[q] - pts[l], span=span)))
        best = max(best, row_correlation(X, q, l) * Q)
    return best

"""Row-sparse recovery: minimize ``||Z||_{1,2}`` s.t. ``||GZ - D||_F <= eps``.

The constrained problem is solved through its penalized form
``1/2 ||GZ - D||_F^2 + tau ||Z||_{1,2}`` with an accelerated proximal
gradient method, and ``tau`` is found by a safeguarded root search on the
Pareto curve ``tau -> ||G Z(tau) - D||_F``, which is non-decreasing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "SolverConfig",
    "SolverResult",
    "MmvProblem",
    "norm_12",
    "row_norms",
    "row_group_soft_threshold",
    "optimality_residual",
    "spectral_norm_sq",
    "solve_penalized",
    "solve_p12_eps",
    "solve_smv",
    "choose_epsilon",
]

logger = logging.getLogger(__name__)

_ZERO_ROW = 1e-14
_ROUNDING = 1e-13  # relative slack for objective comparisons


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 60
    max_inner_iters: int = 20000
    inner_tol: float = 1e-6
    feasibility_tol: float = 1e-4
    tau_bracket: tuple[float, float] | None = None
    seed: int = 0
    check_every: int = 10
    power_iters: int = 100
    power_tol: float = 1e-10

    def __post_init__(self):
        if not (self.inner_tol > 0 and self.feasibility_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class SolverResult:
    X: np.ndarray
    objective: float
    residual: float
    optimality: float
    tau: float
    iterations: int
    converged: bool
    epsilon: float | None = None
    history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("X", "history")}
        out["outer_iterations"] = len(self.history)
        return out


@dataclass(frozen=True)
class MmvProblem:
    G: np.ndarray
    D: np.ndarray
    epsilon: float

    def __post_init__(self):
        G = np.asarray(self.G)
        D = np.asarray(getattr(self.D, "entries", self.D))
        if D.ndim == 1:
            D = D[:, None]
        if G.shape[0] != D.shape[0]:
            raise ValueError(f"G has {G.shape[0]} rows but D has {D.shape[0]}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "D", D)


def row_norms(Z) -> np.ndarray:
    Z = np.asarray(Z)
    if Z.ndim == 1:
        return np.abs(Z)
    return np.sqrt(np.sum(np.abs(Z) ** 2, axis=1))


def norm_12(Z) -> float:
    """Sum of the Euclidean norms of the rows."""
    return float(np.sum(row_norms(Z)))


def row_group_soft_threshold(Z, t: float) -> np.ndarray:
    """Proximal map of ``t ||.||_{1,2}``: shrink every row norm by ``t``."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    Z = np.asarray(Z)
    nrm = row_norms(Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(nrm > t, 1.0 - t / np.where(nrm > 0, nrm, 1.0), 0.0)
    return Z * (scale[:, None] if Z.ndim == 2 else scale)


def _kkt(grad: np.ndarray, Z: np.ndarray, tau: float) -> float:
    nz = row_norms(Z)
    gn = row_norms(grad)
    active = nz >= _ZERO_ROW
    res = 0.0
    if np.any(active):
        unit = Z[active] / nz[active][:, None]
        res = float(np.max(row_norms(grad[active] + tau * unit)))
    if np.any(~active):
        res = max(res, float(np.max(np.maximum(0.0, gn[~active] - tau))))
    return res


def optimality_residual(G, D, Z, tau: float) -> float:
    """KKT residual of the penalized problem at ``Z`` (0 at minimizers).

    For nonzero rows ``||grad_j + tau z_j/||z_j|| ||``, for zero rows
    ``max(0, ||grad_j|| - tau)``, with ``grad = G^*(GZ - D)``; the max over
    rows is returned.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    G = np.asarray(G)
    D = _as_2d(D)
    Z = _as_2d(Z)
    return _kkt(G.conj().T @ (G @ Z - D), Z, tau)


def spectral_norm_sq(G, iters: int = 100, tol: float = 1e-10, seed: int = 0) -> float:
    """Largest eigenvalue of ``G^* G`` by power iteration."""
    G = np.asarray(G)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(G.shape[1]) + 1j * rng.standard_normal(G.shape[1])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = G.conj().T @ (G @ x)
        new = float(np.real(np.vdot(x, y)))
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        if abs(new - lam) <= tol * max(new, 1e-300):
            lam = new
            break
        lam = new
    return lam


def _as_2d(A) -> np.ndarray:
    A = np.asarray(getattr(A, "entries", A))
    return A[:, None] if A.ndim == 1 else A


def _objective(G, D, Z, tau):
    R = G @ Z - D
    return 0.5 * float(np.vdot(R, R).real) + tau * norm_12(Z)


def solve_penalized(G, D, tau: float, cfg: SolverConfig | None = None, Z0=None,
                    lipschitz: float | None = None) -> SolverResult:
    """Accelerated proximal gradient on ``1/2||GZ-D||_F^2 + tau||Z||_{1,2}``.

    The step is ``1/L`` with ``L`` the largest eigenvalue of ``G^*G``.  An
    iterate that would increase the objective is rejected and the momentum
    restarted, so the objective sequence is non-increasing up to rounding.  Converged means
    the KKT residual is below ``cfg.inner_tol * tau``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    cfg = cfg or SolverConfig()
    G = np.asarray(G)
    D = _as_2d(D)
    Gh = G.conj().T
    if lipschitz is None:
        lipschitz = spectral_norm_sq(G, cfg.power_iters, cfg.power_tol, cfg.seed)
    L = 1.01 * lipschitz
    n, nv = G.shape[1], D.shape[1]
    Z = np.zeros((n, nv), dtype=complex) if Z0 is None else np.array(Z0, dtype=complex)
    GhD = Gh @ D
    GhG = Gh @ G if n <= 4 * G.shape[0] else None

    def grad(Y):
        if GhG is not None:
            return GhG @ Y - GhD
        return Gh @ (G @ Y) - GhD

    Yk = Z.copy()
    t = 1.0
    f = _objective(G, D, Z, tau)
    history = [f]
    tol = cfg.inner_tol * tau
    kkt = math.inf
    it = 0
    converged = False
    for it in range(1, cfg.max_inner_iters + 1):
        Znew = row_group_soft_threshold(Yk - grad(Yk) / L, tau / L)
        fnew = _objective(G, D, Znew, tau)
        if fnew > f:
            # restart from the last accepted point with a plain prox step
            t = 1.0
            Znew = row_group_soft_threshold(Z - grad(Z) / L, tau / L)
            fnew = _objective(G, D, Znew, tau)
            # a 1/L prox step cannot increase f; allow for rounding in f itself
            if fnew > f + _ROUNDING * max(abs(f), 1e-300):
                fnew, Znew = f, Z
            Yk = Znew.copy()
        else:
            tnew = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            Yk = Znew + ((t - 1.0) / tnew) * (Znew - Z)
            t = tnew
        Z, f = Znew, fnew
        history.append(f)
        if it % cfg.check_every == 0 or it == cfg.max_inner_iters:
            kkt = _kkt(grad(Z), Z, tau)
            if kkt < tol:
                converged = True
                break
    if not converged:
        kkt = _kkt(grad(Z), Z, tau)
        converged = kkt < tol
    resid = float(np.linalg.norm(G @ Z - D))
    return SolverResult(X=Z, objective=norm_12(Z), residual=resid, optimality=kkt, tau=tau,
                        iterations=it, converged=converged, history=history)


def solve_p12_eps(problem: MmvProblem, cfg: SolverConfig | None = None) -> SolverResult:
    """Minimizer of ``||Z||_{1,2}`` subject to ``||GZ - D||_F <= epsilon``.

    Returns zero when ``||D||_F <= epsilon``.  Otherwise a bracket on ``tau``
    is found by stepping down from ``max_j ||(G^*D)_j||`` and refined with the
    Illinois variant of regula falsi in ``log tau`` until the residual lies
    within ``epsilon * (1 +- feasibility_tol)``.  If that fails the best
    feasible iterate is returned with ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    G, D, eps = problem.G, problem.D, float(problem.epsilon)
    n, nv = G.shape[1], D.shape[1]
    dnorm = float(np.linalg.norm(D))
    zero = np.zeros((n, nv), dtype=complex)
    if dnorm <= eps:
        return SolverResult(X=zero, objective=0.0, residual=dnorm, optimality=0.0,
                            tau=math.inf, iterations=0, converged=True, epsilon=eps)
    lip = spectral_norm_sq(G, cfg.power_iters, cfg.power_tol, cfg.seed)
    tau_max = float(np.max(row_norms(G.conj().T @ D)))
    tau_min, tau_top = cfg.tau_bracket or (tau_max * 1e-10, tau_max)

    history: list = []
    total = 0
    best: SolverResult | None = None

    def evaluate(tau, warm):
        nonlocal total, best
        res = solve_penalized(G, D, tau, cfg, Z0=warm, lipschitz=lip)
        total += res.iterations
        history.append((tau, res.residual, res.objective, res.converged))
        logger.debug("tau=%.6g residual=%.6g target=%.6g", tau, res.residual, eps)
        if res.residual <= eps * (1 + cfg.feasibility_tol):
            if best is None or res.objective < best.objective:
                best = res
        return res

    def done(res):
        return res.converged and abs(res.residual - eps) <= cfg.feasibility_tol * eps

    def finish(res, ok):
        res.epsilon = eps
        res.iterations = total
        res.history = history
        res.converged = ok
        if not ok:
            logger.warning("Pareto search did not reach the feasibility tolerance "
                           "(residual %.6g, epsilon %.6g)", res.residual, eps)
        return res

    # bracket: hi has residual above eps, lo below
    x_hi, f_hi = math.log(tau_top), dnorm - eps
    warm = zero
    lo_res = None
    tau = tau_top
    steps = 0
    while lo_res is None:
        tau = tau / 10.0
        steps += 1
        if tau < tau_min or steps > cfg.max_outer_iters:
            fallback = best or evaluate(max(tau, tau_min), warm)
            return finish(fallback, False)
        res = evaluate(tau, warm)
        if done(res):
            return finish(res, True)
        warm = res.X
        if res.residual < eps:
            lo_res = res
        else:
            x_hi, f_hi = math.log(tau), res.residual - eps
    x_lo, f_lo = math.log(tau), lo_res.residual - eps
    warm = lo_res.X
    last = 0
    for _ in range(cfg.max_outer_iters):
        if x_hi - x_lo < 1e-14:
            break
        x = (x_lo * f_hi - x_hi * f_lo) / (f_hi - f_lo)
        if not x_lo < x < x_hi:
            x = 0.5 * (x_lo + x_hi)
        res = evaluate(math.exp(x), warm)
        if done(res):
            return finish(res, True)
        f = res.residual - eps
        if f < 0:
            x_lo, f_lo = x, f
            if last == -1:
                f_hi *= 0.5
            last = -1
            warm = res.X
        else:
            x_hi, f_hi = x, f
            if last == 1:
                f_lo *= 0.5
            last = 1
    return finish(best or res, False)


def solve_smv(G, d, epsilon: float, cfg: SolverConfig | None = None) -> SolverResult:
    """Single-column case: minimize ``||z||_1`` s.t. ``||Gz - d||_2 <= epsilon``."""
    d = np.asarray(getattr(d, "entries", d))
    if d.ndim == 2:
        if d.shape[1] != 1:
            raise ValueError("solve_smv expects a single data column")
        d = d[:, 0]
    res = solve_p12_eps(MmvProblem(G, d[:, None], epsilon), cfg)
    return res


def choose_epsilon(D, policy: str = "noiseless", W=None, sigma_hat: float | None = None,
                   factor: float | None = None) -> float:
    """Noise tolerance for the constrained problem.

    ``known``: ``1.01 ||W||_F`` (``W`` supplied, e.g. from a simulation);
    ``sigma``: ``1.05 sigma_hat sqrt(N_r N_v)``; ``noiseless``:
    ``1e-8 ||D||_F``.  ``factor`` overrides the default multiplier.
    """
    D = _as_2d(D)
    if policy == "known":
        if W is None:
            raise ValueError("policy 'known' needs the noise matrix W")
        return (1.01 if factor is None else factor) * float(np.linalg.norm(W))
    if policy == "sigma":
        if sigma_hat is None:
            raise ValueError("policy 'sigma' needs sigma_hat")
        return (1.05 if factor is None else factor) * sigma_hat * math.sqrt(D.size)
    if policy == "noiseless":
        return (1e-8 if factor is None else factor) * float(np.linalg.norm(D))
    raise ValueError(f"unknown epsilon policy {policy!r}")

"""Configured numerical studies: scenes, runners and support metrics.

Every runner takes an :class:`~mmvsar.config.ExperimentConfig` and returns an
:class:`ExperimentOutput`; :func:`write_output` turns it into CSV tables and
a JSON summary.  Trials use the seed ``config.seed + trial index`` and are
collected in index order, so the tables do not depend on the thread count.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bounds import (BoundReport, functional_checks, cluster_residual_check, support_error_check,
                     projected_error_check, cluster_support_check)
from .config import ExperimentConfig
from .geometry import (ApertureGeometry, ImagingGrid, ReflectivityProfile, Scene, SubAperture,
                       full_aperture, gotcha_geometry, imaging_grid, make_orthogonal_rows,
                       sample_unknown_matrix, segment_aperture)
from .io import write_complex_csv, write_json, write_table_csv
from .polarimetric import (PolarimetricForward, TensorScatterer, gamma_for_position,
                           gamma_matrix, green_tensor_exact, green_tensor_far_field,
                           pol_unknown_matrix, projection_eigenbasis, recover_tensor_minnorm,
                           tensor_to_row)
from .resolution import (SemimetricTable, cluster_decompose, cluster_interaction,
                         extract_support, interaction_multi, interaction_report,
                         interaction_single, semimetric_table, split_reconstruction,
                         vicinity_set)
from .sensing import (NoiseSpec, add_noise, build_sensing_matrix, exact_forward, forward_data,
                      migration_image)
from .solver import MmvProblem, SolverConfig, SolverResult, choose_epsilon, solve_p12_eps, row_norms

__all__ = [
    "SupportMetrics",
    "ExperimentOutput",
    "support_metrics",
    "build_geometry",
    "build_subapertures",
    "build_grid",
    "build_solver_config",
    "build_scene",
    "simulate_mmv",
    "run_experiment",
    "write_output",
    "RUNNERS",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SupportMetrics:
    """Comparison of an estimated support with the true one.

    ``spurious`` counts estimated pixels outside ``B_r(S)`` and ``missed``
    counts true pixels outside ``B_r`` of the estimate.
    """

    exact_match: bool
    spurious: int
    missed: int
    spurious_pixels: tuple[int, ...] = ()
    missed_pixels: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"exact_match": self.exact_match, "spurious": self.spurious,
                "missed": self.missed, "spurious_pixels": list(self.spurious_pixels),
                "missed_pixels": list(self.missed_pixels)}


def support_metrics(true_support, estimated, table: SemimetricTable, r: float) -> SupportMetrics:
    S = np.unique(np.asarray(list(true_support), dtype=int))
    E = np.unique(np.asarray(list(estimated), dtype=int))
    near_true = set(vicinity_set(table, S, r).tolist())
    spurious = tuple(int(j) for j in E if int(j) not in near_true)
    near_est = set(vicinity_set(table, E, r).tolist()) if E.size else set()
    missed = tuple(int(q) for q in S if int(q) not in near_est)
    exact = bool(S.size == E.size and np.array_equal(S, E))
    return SupportMetrics(exact, len(spurious), len(missed), spurious, missed)


@dataclass
class ExperimentOutput:
    """Tables, complex matrices and a summary produced by one run."""

    kind: str
    config_hash: str
    seed: int
    tables: dict = field(default_factory=dict)     # name -> (columns, rows)
    matrices: dict = field(default_factory=dict)   # name -> complex array
    summary: dict = field(default_factory=dict)
    nonconverged_required: int = 0
    runtime: float = 0.0


# ---------------------------------------------------------------- setup

def build_geometry(cfg: ExperimentConfig) -> ApertureGeometry:
    g = cfg["geometry"]
    return gotcha_geometry(aperture_length=g["A"], altitude=g["h"],
                           west_standoff=g["westStandoff"], element_spacing=g["elementSpacing"],
                           frequency=g["frequency"], wave_speed=g["c"])


def build_subapertures(cfg: ExperimentConfig, geom: ApertureGeometry,
                       length: float | None = None) -> list[SubAperture]:
    seg = cfg["segmentation"]
    a = seg["a"] if length is None else length
    n = seg["nViews"]
    spacing = seg["centerSpacing"]
    if n is not None and n > 1 and spacing * (n - 1) > geom.aperture_length - a + 1e-9:
        # the requested views only fit with a tighter spacing
        spacing = (geom.aperture_length - a) / (n - 1)
    return segment_aperture(geom, a, spacing, n_views=n,
                            include_endpoint=cfg["geometry"]["includeEndpoint"])


def build_grid(cfg: ExperimentConfig, geom: ApertureGeometry,
               extent_units: float | None = None) -> ImagingGrid:
    gr = cfg["grid"]
    ext = gr["extentUnits"] if extent_units is None else extent_units
    return imaging_grid(geom, ext, gr["spacingUnits"])


def build_solver_config(cfg: ExperimentConfig) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(max_outer_iters=s["maxOuterIters"], max_inner_iters=s["maxInnerIters"],
                        inner_tol=s["innerTol"], feasibility_tol=s["feasibilityTol"])


def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


def _snap(grid: ImagingGrid, units: Sequence[float]) -> np.ndarray:
    """Nearest grid indexes of positions given in resolution units."""
    idx = np.array([grid.nearest_index(u * grid.resolution_unit) for u in units], dtype=int)
    if np.any(np.abs(grid.coords_units[idx] - np.asarray(units)) > 0.5 * grid.spacing
              / grid.resolution_unit + 1e-9):
        raise ValueError("scatterer outside the imaging grid")
    return idx


def _random_line_units(rng, count: int, spacing: Sequence[float], step: float) -> np.ndarray:
    """Centered positions with neighbor gaps uniform in ``spacing`` (rounded to ``step``)."""
    lo, hi = spacing
    gaps = rng.uniform(lo, hi, size=max(count - 1, 0))
    gaps = np.clip(np.round(gaps / step) * step, np.ceil(lo / step - 1e-9) * step,
                   np.floor(hi / step + 1e-9) * step)
    pos = np.concatenate([[0.0], np.cumsum(gaps)])
    return np.round((pos - 0.5 * pos[-1]) / step) * step


def six_scatterer_scene(grid: ImagingGrid, geom: ApertureGeometry, recipe: dict) -> Scene:
    """One near-isotropic scatterer and boxcar-visible neighbors on a line.

    Scatterers sit at integer multiples of the spacing; the windows of the
    anisotropic ones tile the aperture in steps of their width, assigned in
    ``windowOrder``.
    """
    count = recipe.get("count", 6)
    spacing = recipe.get("spacingUnits", [1.0, 1.0])[0]
    width = recipe.get("visibilityWidth", geom.aperture_length / 6)
    iso = recipe.get("isotropicSlot", 0)
    order = recipe.get("windowOrder", [2, 0, 4, 1, 3] if count == 6 else list(range(count - 1)))
    if sorted(order) != list(range(count - 1)) or not 0 <= iso < count:
        raise ValueError("windowOrder must permute the anisotropic scatterers")
    units = (np.arange(count) - count // 2) * spacing
    idx = _snap(grid, units)
    centers = (np.arange(count - 1) - 0.5 * (count - 2)) * width
    kind = recipe.get("window", "boxcar")
    profiles, k = [], 0
    for slot, q in enumerate(idx):
        if slot == iso:
            profiles.append(ReflectivityProfile(int(q), 1.0, 0.0, 1.0, "constant"))
        else:
            profiles.append(ReflectivityProfile(int(q), 1.0, float(centers[order[k]]), width, kind))
            k += 1
    return Scene(profiles)


def build_scene(cfg: ExperimentConfig, grid: ImagingGrid, geom: ApertureGeometry,
                rng: np.random.Generator | None = None) -> Scene:
    """Explicit scatterer list, or the configured recipe (default: six scatterers)."""
    sc = cfg["scene"]
    if sc["scatterers"]:
        units = [s["positionUnits"] for s in sc["scatterers"]]
        idx = _snap(grid, units)
        return Scene([ReflectivityProfile(int(q), _complex(s.get("amplitude", 1.0)),
                                          s.get("visibilityCenter", 0.0),
                                          s.get("visibilityWidth", 1.0),
                                          s.get("window", "constant"))
                      for q, s in zip(idx, sc["scatterers"])])
    recipe = sc["recipe"] or {"type": "anisotropic-six"}
    if recipe["type"] == "anisotropic-six":
        return six_scatterer_scene(grid, geom, recipe)
    if recipe["type"] == "random-line":
        rng = rng or np.random.default_rng(cfg.seed)
        units = _random_line_units(rng, recipe.get("count", 6),
                                   recipe.get("spacingUnits", [1.0, 3.0]),
                                   grid.spacing / grid.resolution_unit)
        lo, hi = recipe.get("amplitudeRange", [1.0, 1.0])
        amps = rng.uniform(lo, hi, size=units.size)
        return Scene([ReflectivityProfile(int(q), float(a)) for q, a in zip(_snap(grid, units), amps)])
    raise ValueError(f"recipe {recipe['type']!r} does not describe a fixed scene")


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _epsilon(cfg: ExperimentConfig, D, W_eff, factor: float | None = None) -> float:
    s = cfg["solver"]
    policy = s["epsilonPolicy"]
    f = s["epsilonFactor"] if factor is None else factor
    if policy == "known":
        return choose_epsilon(D, "known", W=W_eff, factor=f)
    if policy == "sigma":
        return choose_epsilon(D, "sigma", sigma_hat=s["sigmaHat"], factor=f)
    return choose_epsilon(D, "noiseless", factor=f)


@dataclass
class MmvRun:
    """One simulated MMV acquisition and its reconstruction."""

    G: np.ndarray
    X: np.ndarray
    D: np.ndarray
    epsilon: float
    result: SolverResult
    support: np.ndarray
    table: SemimetricTable
    model_error: float


def simulate_mmv(cfg: ExperimentConfig, geom: ApertureGeometry, grid: ImagingGrid,
                 subs: Sequence[SubAperture], scene: Scene, sigma_fraction: float | None = None,
                 noise_seed: int | None = None, solve: bool = True) -> MmvRun:
    """Simulate ``D = G_sim X + W`` for ``scene`` and solve the MMV problem.

    The effective noise handed to the ``known`` epsilon policy is
    ``D - G X``, i.e. additive noise plus the model error of the linearized
    inversion matrix against the simulator.
    """
    sens = cfg["sensing"]
    ref = subs[min(sens["referenceView"], len(subs) - 1)]
    G = build_sensing_matrix(geom, grid, ref).entries
    X = sample_unknown_matrix(scene, grid, subs, geom, include_phase=sens["includePhase"]).values
    nz = cfg["noise"]
    noise = NoiseSpec(nz["sigmaFraction"] if sigma_fraction is None else sigma_fraction,
                      nz["seed"] if noise_seed is None else noise_seed)
    if sens["phaseMode"] == "exact":
        fwd = exact_forward(geom, grid, subs, include_phase=sens["includePhase"])
        scene_arg = scene if sens["reflectivitySampling"] == "antenna" else None
        data = forward_data(fwd, X, noise, scene=scene_arg)
    else:
        data = forward_data(G, X, noise)
    D = np.asarray(data.entries)
    W_eff = D - G @ X
    eps = _epsilon(cfg, D, W_eff)
    table = semimetric_table(G)
    if solve:
        res = solve_p12_eps(MmvProblem(G, D, eps), build_solver_config(cfg))
        supp = extract_support(res.X, cfg["experiment"]["threshold"])
    else:
        res, supp = None, np.zeros(0, dtype=int)
    return MmvRun(G=G, X=X, D=D, epsilon=eps, result=res, support=supp, table=table,
                  model_error=float(np.linalg.norm(data.clean - G @ X)))


def _header(cfg: ExperimentConfig, kind: str) -> list[str]:
    return [f"config_hash={cfg.hash}", f"seed={cfg.seed}", f"kind={kind}"]


def _pixels(grid: ImagingGrid) -> tuple[np.ndarray, np.ndarray]:
    return np.arange(grid.n_points), np.round(grid.coords_units, 12)


def _isotropic_index(scene: Scene, geom: ApertureGeometry) -> int:
    """Scatterer visible over the largest fraction of the aperture."""
    s = np.linspace(-0.5, 0.5, 1001) * geom.aperture_length
    frac = [float(np.mean(p.visibility(s) > 0.5)) for p in scene.profiles]
    return int(scene.profiles[int(np.argmax(frac))].grid_index)


# ---------------------------------------------------------------- runners

def smv_baseline(cfg: ExperimentConfig, geom: ApertureGeometry, grid: ImagingGrid,
                 subs: Sequence[SubAperture], scene: Scene, view: int | None = None) -> dict:
    """ℓ1 reconstruction from a single sub-aperture.

    The data are simulated with the reflectivity evaluated at every antenna
    of the view, so its variation within the sub-aperture is left in the
    data.  With no noise there is no true misfit to budget for, and the
    tolerance is ``smvEpsilonFactor`` times the least-squares residual, the
    smallest misfit any single-view model attains.
    """
    v = len(subs) // 2 if view is None else view
    sub = subs[v]
    Gv = build_sensing_matrix(geom, grid, sub).entries
    fwd = exact_forward(geom, grid, [sub], include_phase=cfg["sensing"]["includePhase"])
    d = fwd.apply_scene(scene)[:, 0]
    sigma = cfg["noise"]["sigmaFraction"]
    if sigma > 0:
        d = np.asarray(add_noise(d, NoiseSpec(sigma, cfg["noise"]["seed"])).entries)
    z_ls = np.linalg.lstsq(Gv, d, rcond=None)[0]
    floor = float(np.linalg.norm(Gv @ z_ls - d))
    eps = cfg["experiment"]["smvEpsilonFactor"] * max(floor, 1e-12 * float(np.linalg.norm(d)))
    res = solve_p12_eps(MmvProblem(Gv, d[:, None], eps), build_solver_config(cfg))
    supp = extract_support(res.X, cfg["experiment"]["threshold"])
    return {"view": v, "G": Gv, "data": d, "epsilon": eps, "residual_floor": floor,
            "result": res, "support": supp}


def run_imaging_comparison(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    """MMV, single-view SMV and full-aperture migration images of one scene."""
    out = ExperimentOutput("imaging-comparison", cfg.hash, cfg.seed)
    ex = cfg["experiment"]
    geom = build_geometry(cfg)
    subs = build_subapertures(cfg, geom)
    grid = build_grid(cfg, geom)
    scene = build_scene(cfg, grid, geom, np.random.default_rng(cfg.seed))
    S = np.array(scene.support)
    mmv = simulate_mmv(cfg, geom, grid, subs, scene)
    smv = smv_baseline(cfg, geom, grid, subs, scene, ex["smvView"])
    full = full_aperture(geom, cfg["geometry"]["includeEndpoint"])
    Gf = build_sensing_matrix(geom, grid, full).entries
    df = exact_forward(geom, grid, [full], include_phase=cfg["sensing"]["includePhase"]
                       ).apply_scene(scene)
    mig = migration_image(Gf, df)
    r = ex["r"]
    m_mmv = support_metrics(S, mmv.support, mmv.table, r)
    m_smv = support_metrics(S, smv["support"], mmv.table, r)
    iso = _isotropic_index(scene, geom)
    pix, units = _pixels(grid)
    truth = row_norms(mmv.X)
    mmv_norm = row_norms(mmv.result.X)
    smv_abs = np.abs(smv["result"].X[:, 0])
    cols = ["pixel", "position_units", "value", "true_row_norm"]
    out.tables["mmv_row_norms"] = (cols, list(zip(pix, units, mmv_norm, truth)))
    out.tables["smv_modulus"] = (cols, list(zip(pix, units, smv_abs, truth)))
    out.tables["migration"] = (cols, list(zip(pix, units, mig, truth)))
    out.matrices["mmv_reconstruction"] = mmv.result.X
    out.matrices["true_unknown"] = mmv.X
    rep = interaction_report(mmv.G, mmv.X, S)
    bounds = support_error_check(mmv.G, mmv.X, mmv.result.X, S, r, mmv.epsilon, mmv.table,
                            INv=rep.INv, D=mmv.D)
    out.summary = {
        "support": S.tolist(),
        "support_units": units[S].tolist(),
        "mmv": {"metrics": m_mmv, "estimated": mmv.support.tolist(),
                "solver": mmv.result.summary(), "epsilon": mmv.epsilon,
                "model_error": mmv.model_error, "required": True},
        "smv": {"metrics": m_smv, "estimated": smv["support"].tolist(), "view": smv["view"],
                "solver": smv["result"].summary(), "epsilon": smv["epsilon"],
                "residual_floor": smv["residual_floor"], "required": False},
        "migration": {"argmax": int(np.argmax(mig)), "isotropic_scatterer": iso,
                      "argmax_is_isotropic": bool(int(np.argmax(mig)) == iso)},
        "vicinity": vicinity_set(mmv.table, S, r).tolist(),
        "interaction": rep,
        "bounds": list(bounds),
    }
    out.nonconverged_required = int(not mmv.result.converged)
    return out


def run_noise_sweep(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    """MMV support at each noise level compared with the noiseless run."""
    out = ExperimentOutput("noise-sweep", cfg.hash, cfg.seed)
    ex = cfg["experiment"]
    geom = build_geometry(cfg)
    subs = build_subapertures(cfg, geom)
    grid = build_grid(cfg, geom)
    scene = build_scene(cfg, grid, geom, np.random.default_rng(cfg.seed))
    S = np.array(scene.support)
    levels = sorted(set([0.0] + list(ex["sigmaFractions"])))
    noise_seed = cfg["noise"]["seed"] + cfg.seed
    runs = _map(lambda s: simulate_mmv(cfg, geom, grid, subs, scene, s, noise_seed),
                levels, threads)
    base = runs[0]
    rows, records = [], []
    for s, run in zip(levels, runs):
        m_true = support_metrics(S, run.support, run.table, ex["r"])
        m_rel = support_metrics(base.support, run.support, run.table, ex["r"])
        err = float(np.linalg.norm(run.result.X - base.result.X)
                    / max(np.linalg.norm(base.result.X), 1e-300))
        rows.append((s, run.epsilon, run.result.converged, run.support.size,
                     m_true.spurious, m_true.missed, m_true.exact_match,
                     m_rel.spurious, m_rel.missed, err))
        records.append({"sigma_fraction": s, "epsilon": run.epsilon,
                        "estimated": run.support.tolist(), "vs_truth": m_true,
                        "vs_noiseless": m_rel, "relative_change": err,
                        "solver": run.result.summary()})
        out.nonconverged_required += int(not run.result.converged)
    out.tables["noise_sweep"] = (
        ["sigma_fraction", "epsilon", "converged", "n_estimated", "spurious_vs_truth",
         "missed_vs_truth", "exact_vs_truth", "spurious_vs_noiseless",
         "missed_vs_noiseless", "relative_change"], rows)
    out.summary = {"support": S.tolist(), "levels": records}
    return out


def run_subaperture_sweep(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    """MMV support quality as a function of the sub-aperture length."""
    out = ExperimentOutput("subaperture-sweep", cfg.hash, cfg.seed)
    ex = cfg["experiment"]
    geom = build_geometry(cfg)
    grid = build_grid(cfg, geom)
    scene = build_scene(cfg, grid, geom, np.random.default_rng(cfg.seed))
    S = np.array(scene.support)

    def one(a):
        subs = build_subapertures(cfg, geom, length=a)
        return len(subs), simulate_mmv(cfg, geom, grid, subs, scene)

    runs = _map(one, list(ex["subApertureLengths"]), threads)
    rows, records = [], []
    for a, (nv, run) in zip(ex["subApertureLengths"], runs):
        m = support_metrics(S, run.support, run.table, ex["r"])
        rows.append((a, nv, run.epsilon, run.model_error, run.result.converged,
                     run.support.size, m.spurious, m.missed, m.exact_match))
        records.append({"a": a, "n_views": nv, "metrics": m, "estimated": run.support.tolist(),
                        "solver": run.result.summary()})
        out.nonconverged_required += int(not run.result.converged)
    out.tables["subaperture_sweep"] = (
        ["a", "n_views", "epsilon", "model_error", "converged", "n_estimated", "spurious",
         "missed", "exact_match"], rows)
    out.summary = {"support": S.tolist(), "lengths": records}
    return out


def _quantiles(x) -> dict:
    x = np.asarray(x, dtype=float)
    q = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(["min", "q25", "median", "q75", "max"], q.tolist()))


def run_ratio_histogram(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    """``I1 / INv`` for random line scenes with orthogonal rows.

    Neighbor gaps are uniform in ``spacingUnits`` (rounded to the grid
    step); the grid covers the largest scene plus two resolution units on
    each side.
    """
    out = ExperimentOutput("ratio-histogram", cfg.hash, cfg.seed)
    ex = cfg["experiment"]
    geom = build_geometry(cfg)
    subs = build_subapertures(cfg, geom)
    nv = len(subs)
    sizes = list(ex["supportSizes"])
    extent = (max(sizes) - 1) * ex["spacingUnits"][1] + 4.0
    grid = build_grid(cfg, geom, extent_units=extent)
    G = build_sensing_matrix(geom, grid, subs[0]).entries
    step = cfg["grid"]["spacingUnits"]
    tasks = list(enumerate(size for size in sizes for _ in range(ex["trials"])))

    def trial(task):
        i, size = task
        rng = np.random.default_rng(cfg.seed + i)
        S = _snap(grid, _random_line_units(rng, size, ex["spacingUnits"], step))
        X = make_orthogonal_rows(S, nv, seed=cfg.seed + i, n_rows=grid.n_points).values
        I1 = interaction_single(G, S).value
        res = []
        for mode in ex["modes"]:
            INv = interaction_multi(G, X, S, mode=mode, restarts=ex["restarts"],
                                    seed=cfg.seed + i).value
            res.append((mode, INv))
        return i, size, I1, res

    results = _map(trial, tasks, threads)
    rows = []
    by_size: dict[int, list[float]] = {s: [] for s in sizes}
    for i, size, I1, res in results:
        for mode, INv in res:
            ratio = I1 / INv if INv > 0 else float("inf")
            rows.append((i, size, mode, I1, INv, ratio, np.sqrt(size), ratio / np.sqrt(size)))
            if mode == ex["modes"][0]:
                by_size[size].append(ratio)
    stats = {str(s): _quantiles(v) for s, v in by_size.items()}
    medians = [stats[str(s)]["median"] for s in sizes]
    out.tables["ratio_trials"] = (
        ["trial", "support_size", "mode", "I1", "INv", "ratio", "sqrt_support", "ratio_over_sqrt"],
        rows)
    out.summary = {
        "n_views": nv, "sub_aperture": subs[0].length, "grid_points": grid.n_points,
        "quantiles": stats,
        "all_below_sqrt": bool(all(r[5] <= r[6] * (1 + 1e-12) for r in rows)),
        "medians_increasing": bool(all(b > a for a, b in zip(medians, medians[1:]))),
    }
    return out


def _two_cluster_units(rng, ex: dict, recipe: dict, step: float):
    sep = rng.uniform(*ex["clusterSeparationUnits"])
    rad = ex["clusterRadiusUnits"]
    per = recipe.get("perCluster", 2)
    units, centers = [], []
    for c in (-0.5 * sep, 0.5 * sep):
        c = np.round(c / step) * step
        centers.append(c)
        offs = np.arange(-rad, rad + 1e-9, step)
        pick = rng.choice(offs.size, size=min(per, offs.size), replace=False)
        units.extend((c + offs[np.sort(pick)]).tolist())
    return np.array(units), np.array(centers), sep


def _reports_rows(trial: int, size: int, I1: float, INv: float, r: float, eps: float,
                  converged: bool, reports: Sequence[BoundReport]):
    return [(trial, size, I1, INv, r, eps, rep.name, rep.lhs, rep.rhs,
             rep.applicable and converged, rep.satisfied) for rep in reports]


def run_bound_suite(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    """Monte Carlo check of the support estimates on randomized scenes.

    Data follow the linear model exactly, ``D = G X + W``, so the true
    unknown is feasible whenever ``eps >= ||W||``.  A report counts as
    applicable when its hypotheses hold and the solver converged.
    """
    out = ExperimentOutput("bound-suite", cfg.hash, cfg.seed)
    ex = cfg["experiment"]
    recipe = cfg["scene"]["recipe"] or {"type": "random-line"}
    clusters = recipe["type"] == "two-cluster"
    geom = build_geometry(cfg)
    subs = build_subapertures(cfg, geom)
    nv = len(subs)
    grid = build_grid(cfg, geom)
    G = build_sensing_matrix(geom, grid, subs[0]).entries
    table = semimetric_table(G)
    step = cfg["grid"]["spacingUnits"]
    r = ex["r"]
    scfg = build_solver_config(cfg)
    sigma = cfg["noise"]["sigmaFraction"]

    def trial(i):
        rng = np.random.default_rng(cfg.seed + i)
        if clusters:
            units, cunits, sep = _two_cluster_units(rng, ex, recipe, step)
            S = np.unique(_snap(grid, units))
            C = np.unique(_snap(grid, cunits))
        else:
            lo, hi = recipe.get("spacingUnits", ex["spacingUnits"])
            S = np.unique(_snap(grid, _random_line_units(rng, recipe.get("count", 4),
                                                         (lo, hi), step)))
        if S.size <= nv:
            X = make_orthogonal_rows(S, nv, seed=cfg.seed + i, n_rows=grid.n_points).values
        else:
            X = np.zeros((grid.n_points, nv), dtype=complex)
            X[S] = rng.standard_normal((S.size, nv)) + 1j * rng.standard_normal((S.size, nv))
        clean = G @ X
        data = add_noise(clean, NoiseSpec(sigma, cfg.seed + i))
        D, W = np.asarray(data.entries), np.asarray(data.noise)
        wn = float(np.linalg.norm(W))
        decomp = cluster_decompose(G, table, X, S, C) if clusters else None
        noise_floor = max(wn, float(np.linalg.norm(D - G @ decomp.U))) if clusters else wn
        eps = 1.01 * max(noise_floor, 1e-8 * float(np.linalg.norm(D)))
        res = solve_p12_eps(MmvProblem(G, D, eps), scfg)
        rep = interaction_report(G, X, S, restarts=ex["restarts"], seed=cfg.seed + i)
        reports = list(support_error_check(G, X, res.X, S, r, eps, table, INv=rep.INv, D=D))
        reports += list(projected_error_check(G, X, res.X, S, r, eps, table, INv=rep.INv, I1=rep.I1,
                                       D=D))
        split = split_reconstruction(res.X, table, S, r)
        V = rng.standard_normal(D.shape) + 1j * rng.standard_normal(D.shape)
        reports += list(functional_checks(G, X, S, V, split.near, split.far, r, INv=rep.INv))
        extra = {}
        if clusters:
            IU = cluster_interaction(G, decomp, restarts=ex["restarts"], seed=cfg.seed + i).value
            reports += list(cluster_residual_check(G, X, decomp, table))
            reports.append(cluster_support_check(G, X, res.X, decomp, r, eps, table, D, IU=IU))
            extra = {"IU": IU, "separation_units": sep, "radius": decomp.radius}
        return i, S.size, rep, eps, res, reports, extra

    results = _map(trial, list(range(ex["trials"])), threads)
    rows, cluster_rows = [], []
    for i, size, rep, eps, res, reports, extra in results:
        rows += _reports_rows(i, size, rep.I1, rep.INv, r, eps, res.converged, reports)
        out.nonconverged_required += int(not res.converged) if ex["required"] else 0
        if clusters:
            cluster_rows.append((i, size, extra["separation_units"], extra["radius"], rep.INv,
                                 extra["IU"], extra["IU"] < rep.INv))
    names = sorted({row[6] for row in rows})
    summary = {}
    for name in names:
        sel = [row for row in rows if row[6] == name]
        app = [row for row in sel if row[9]]
        summary[name] = {"trials": len(sel), "applicable": len(app),
                         "satisfied": sum(1 for row in app if row[10]),
                         "rate": (sum(1 for row in app if row[10]) / len(app)) if app else None}
    out.tables["bound_trials"] = (
        ["trial", "support_size", "I1", "INv", "r", "eps", "bound", "lhs", "rhs", "applicable",
         "satisfied"], rows)
    out.summary = {"bounds": summary, "n_views": nv, "grid_points": grid.n_points,
                   "converged": sum(int(x[4].converged) for x in results)}
    if clusters:
        out.tables["cluster_trials"] = (
            ["trial", "support_size", "separation_units", "radius", "INv", "IU", "IU_below_INv"],
            cluster_rows)
        far = [row for row in cluster_rows if row[2] >= 5.0]
        out.summary["cluster_gain"] = {"trials_separated": len(far),
                                       "IU_below_INv": sum(1 for row in far if row[6])}
    return out


def _random_symmetric(rng) -> np.ndarray:
    A = rng.standard_normal((3, 3))
    return 0.5 * (A + A.T)


def run_polarimetric(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    """Gamma identities on random geometries and a two-scatterer MMV recovery."""
    out = ExperimentOutput("polarimetric", cfg.hash, cfg.seed)
    ex = cfg["experiment"]
    geom = build_geometry(cfg)

    def identity_trial(i):
        rng = np.random.default_rng(cfg.seed + i)
        n = rng.standard_normal(3)
        n[2] = abs(n[2]) + 0.05
        n /= np.linalg.norm(n)
        gam = gamma_matrix(*n)
        P = green_tensor_far_field(*n)
        rho = _random_symmetric(rng)
        direct = tensor_to_row(P @ rho @ P)
        vec = tensor_to_row(rho) @ gam.entries
        consist = float(np.linalg.norm(vec - direct) / max(np.linalg.norm(direct), 1e-300))
        sv = np.linalg.svd(gam.entries, compute_uv=False)
        rank = int(np.sum(sv > 1e-10 * sv[0]))
        basis = projection_eigenbasis(n)
        est = recover_tensor_minnorm(vec, gam, basis)
        V = basis.matrix[:, :2]
        want = V.T @ rho @ V
        trans = float(np.linalg.norm(est.transverse - want) / max(np.linalg.norm(want), 1e-300))
        return i, consist, rank, trans

    ident = _map(identity_trial, list(range(ex["trials"])), threads)
    out.tables["gamma_identities"] = (["trial", "consistency_error", "rank",
                                       "transverse_recovery_error"], ident)
    # far field against the exact dyadic at the aperture center
    sub_c = full_aperture(geom)
    Ge = green_tensor_exact(geom.wavenumber, sub_c.center, geom.scene_center)
    nvec = (sub_c.center - geom.scene_center) / geom.standoff
    amp = np.exp(1j * geom.wavenumber * geom.standoff) / (4 * np.pi * geom.standoff)
    ff_err = float(np.linalg.norm(Ge / amp - green_tensor_far_field(*nvec))
                   / np.linalg.norm(green_tensor_far_field(*nvec)))

    subs = build_subapertures(cfg, geom)
    grid = build_grid(cfg, geom)
    sc = cfg["scene"]["scatterers"]
    rng = np.random.default_rng(cfg.seed)
    if sc:
        idx = _snap(grid, [s["positionUnits"] for s in sc])
        scat = [TensorScatterer(int(q), np.array([_complex(t).real for t in
                                                   s.get("tensor", [1, 1, 1, 0, 0, 0])]),
                                s.get("visibilityCenter", 0.0), s.get("visibilityWidth", 1.0),
                                s.get("window", "constant"))
                for q, s in zip(idx, sc)]
    else:
        idx = _snap(grid, [0.0, 1.0])
        scat = [TensorScatterer(int(q), _random_symmetric(rng)) for q in idx]
    S = np.unique([s.grid_index for s in scat])
    fwd = PolarimetricForward.build(geom, grid, subs, include_phase=cfg["sensing"]["includePhase"])
    X = pol_unknown_matrix(scat, fwd)
    nz = cfg["noise"]
    data = add_noise(fwd.apply(X), NoiseSpec(nz["sigmaFraction"], nz["seed"]))
    D = np.asarray(data.entries)
    G = build_sensing_matrix(geom, grid, subs[0]).entries
    eps = _epsilon(cfg, D, D - G @ X)
    res = solve_p12_eps(MmvProblem(G, D, eps), build_solver_config(cfg))
    out.nonconverged_required = int(not res.converged)
    thr = ex["threshold"]
    per_comp = []
    for c in range(6):
        est = extract_support(res.X[:, c::6], thr)
        per_comp.append({"component": c, "estimated": est.tolist(),
                         "exact": bool(np.array_equal(est, S))})
    gammas_center = gamma_for_position(geom, subs[len(subs) // 2].center)
    recovered = []
    for q in S:
        v = len(subs) // 2
        row = res.X[q, 6 * v:6 * v + 6] / fwd.phases[q, v]
        basis = projection_eigenbasis(subs[v].center - geom.scene_center)
        est = recover_tensor_minnorm(row, gammas_center, basis)
        recovered.append({"pixel": int(q), "transverse": est.transverse})
    pix, units = _pixels(grid)
    comp_norms = np.stack([row_norms(res.X[:, c::6]) for c in range(6)], axis=1)
    out.tables["pol_component_norms"] = (
        ["pixel", "position_units"] + [f"component_{c}" for c in range(6)],
        [(p, u, *vals) for p, u, vals in zip(pix, units, comp_norms)])
    consist = [row[1] for row in ident]
    trans = [row[3] for row in ident]
    out.summary = {
        "identities": {"trials": len(ident), "max_consistency_error": max(consist),
                       "max_transverse_error": max(trans),
                       "all_rank_three": bool(all(row[2] == 3 for row in ident))},
        "far_field_error": ff_err,
        "support": S.tolist(),
        "mmv": {"solver": res.summary(), "epsilon": eps, "components": per_comp,
                "all_components_exact": bool(all(c["exact"] for c in per_comp)),
                "recovered_center_view": recovered},
    }
    return out


RUNNERS = {
    "ratio-histogram": run_ratio_histogram,
    "imaging-comparison": run_imaging_comparison,
    "subaperture-sweep": run_subaperture_sweep,
    "noise-sweep": run_noise_sweep,
    "polarimetric": run_polarimetric,
    "bound-suite": run_bound_suite,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentOutput:
    t0 = time.perf_counter()
    out = RUNNERS[cfg.kind](cfg, threads=max(1, int(threads)))
    out.runtime = time.perf_counter() - t0
    return out


def write_output(out: ExperimentOutput, cfg: ExperimentConfig, out_dir) -> list[Path]:
    """Write every table and matrix as CSV plus ``summary.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    head = _header(cfg, out.kind)
    files = []
    for name, (cols, rows) in out.tables.items():
        files.append(write_table_csv(out_dir / f"{name}.csv", cols, rows, header=head))
    for name, M in out.matrices.items():
        files.append(write_complex_csv(out_dir / f"{name}.csv", M, header=head))
    summary = {"kind": out.kind, "config_hash": out.config_hash, "seed": out.seed,
               "runtime_seconds": out.runtime, "nonconverged_required": out.nonconverged_required,
               "files": sorted(p.name for p in files), "results": out.summary,
               "config": cfg.data}
    files.append(write_json(out_dir / "summary.json", summary))
    return files

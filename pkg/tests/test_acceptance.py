"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_complex, random_unit_columns
from mmvsar.bounds import fit_decay_constant, row_correlation_bound_check
from mmvsar.config import load_config
from mmvsar.experiments import run_experiment
from mmvsar.geometry import (ReflectivityProfile, Scene, gotcha_geometry, imaging_grid,
                             make_orthogonal_rows, sample_unknown_matrix, segment_aperture)
from mmvsar.resolution import interaction_multi
from mmvsar.sensing import build_sensing_matrix
from mmvsar.solver import (MmvProblem, SolverConfig, norm_12, optimality_residual,
                           solve_p12_eps)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
THREADS = 4


@pytest.fixture
def verdict(capsys):
    def report(label, ok, detail, runtime, limit):
        ok = bool(ok) and runtime < limit
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}; "
                  f"runtime {runtime:.1f} s (limit {limit:.0f} s)")
        assert ok, detail
    return report


def _run(name):
    t0 = time.perf_counter()
    out = run_experiment(load_config(CONFIGS / name), threads=THREADS)
    return out, time.perf_counter() - t0


def _metrics(m):
    return m if isinstance(m, dict) else m.to_dict()


def _bound_counts(summary, names):
    rows = [(n, summary["bounds"][n]["applicable"], summary["bounds"][n]["satisfied"])
            for n in names]
    ok = all(app > 0 and sat == app for _, app, sat in rows)
    return ok, ", ".join(f"{n} {sat}/{app}" for n, app, sat in rows)


def test_solver_correctness(verdict):
    t0 = time.perf_counter()
    cfg = SolverConfig(inner_tol=1e-5)
    bad = []
    for i in range(50):
        rng = np.random.default_rng(1000 + i)
        G = random_unit_columns(rng, 20, 40)
        X = np.zeros((40, 4), complex)
        S = rng.choice(40, int(rng.integers(1, 6)), replace=False)
        X[S] = random_complex(rng, S.size, 4)
        W = 0.05 * random_complex(rng, 20, 4)
        D = G @ X + W
        eps = 1.01 * np.linalg.norm(W)
        res = solve_p12_eps(MmvProblem(G, D, eps), cfg)
        kkt = optimality_residual(G, D, res.X, res.tau)
        feasible = np.linalg.norm(G @ res.X - D) <= eps * (1 + 1e-4)
        minimal = norm_12(res.X) <= norm_12(X) * (1 + 1e-6)
        if not (res.converged and feasible and minimal and kkt < 1e-5 * res.tau):
            bad.append(i)
    verdict("criterion 1 solver correctness", not bad,
            f"{50 - len(bad)}/50 instances feasible, minimal and KKT-certified"
            + (f"; failing {bad}" if bad else ""), time.perf_counter() - t0, 60)


def test_orthogonal_closed_form(verdict):
    t0 = time.perf_counter()
    geom = gotcha_geometry(element_spacing=5.0)
    grid = imaging_grid(geom, 40.0, 0.25)
    subs = segment_aperture(geom, 75.0, (1500.0 - 75.0) / 49, n_views=50)
    G = build_sensing_matrix(geom, grid, subs[0]).entries
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(2000 + i)
        S = rng.choice(grid.n_points, int(rng.integers(2, 11)), replace=False)
        X = make_orthogonal_rows(S, 50, seed=2000 + i, n_rows=grid.n_points).values
        cf = interaction_multi(G, X, S, mode="closed_form").value
        ns = interaction_multi(G, X, S, mode="numeric_sup", seed=i).value
        worst = max(worst, abs(cf - ns) / cf)
    verdict("criterion 2 orthogonal-row closed form", worst <= 1e-6,
            f"max relative gap {worst:.2e} over 100 instances (tolerance 1e-6)",
            time.perf_counter() - t0, 60)


def test_gain_ratio_histogram(verdict):
    out, dt = _run("ratio_histogram.json")
    s = out.summary
    cols, rows = out.tables["ratio_trials"]
    counts = {k: sum(1 for r in rows if r[1] == k) for k in (9, 16, 36)}
    med = {k: round(v["median"], 3) for k, v in s["quantiles"].items()}
    worst = max(r[7] for r in rows)
    ok = s["all_below_sqrt"] and s["medians_increasing"] and set(counts.values()) == {250}
    verdict("criterion 3 gain ratio", ok,
            f"trials {counts}, max ratio/sqrt|S| {worst:.3f}, medians {med}", dt, 600)


def test_support_and_error_bounds(verdict):
    out, dt = _run("bound_suite.json")
    ok, detail = _bound_counts(out.summary, [
        "support_error_sharp", "support_error_loose", "reconstruction_mismatch",
        "projected_error", "effective_matrix_gap"])
    trials = out.summary["bounds"]["support_error_sharp"]["trials"]
    verdict("criterion 4 support and error bounds", ok and trials == 200,
            f"{trials} scenes; satisfied/applicable: {detail}", dt, 900)


def test_cluster_bounds(verdict):
    out, dt = _run("cluster_suite.json")
    ok, detail = _bound_counts(out.summary, ["cluster_residual", "cluster_support_error"])
    gain = out.summary["cluster_gain"]
    trials = out.summary["bounds"]["cluster_residual"]["trials"]
    ok = ok and trials == 100 and gain["trials_separated"] > 0 \
        and gain["IU_below_INv"] == gain["trials_separated"]
    verdict("criterion 5 cluster bounds", ok,
            f"{trials} scenes; {detail}; IU < INv in {gain['IU_below_INv']}/"
            f"{gain['trials_separated']} separated scenes", dt, 600)


def test_imaging_comparison(verdict):
    out, dt = _run("imaging_comparison.json")
    s = out.summary
    mmv, smv = _metrics(s["mmv"]["metrics"]), _metrics(s["smv"]["metrics"])
    mig = s["migration"]
    ok = (mmv["exact_match"] and mmv["spurious"] == 0 and mmv["missed"] == 0
          and smv["spurious"] >= 1 and mig["argmax_is_isotropic"]
          and out.nonconverged_required == 0)
    verdict("criterion 6 imaging comparison", ok,
            f"MMV exact={mmv['exact_match']} spurious={mmv['spurious']} missed={mmv['missed']}; "
            f"SMV spurious={smv['spurious']}; migration argmax {mig['argmax']} "
            f"(isotropic {mig['isotropic_scatterer']})", dt, 300)


def test_noise_robustness(verdict):
    out, dt = _run("noise_sweep.json")
    level = next(l for l in out.summary["levels"] if l["sigma_fraction"] == pytest.approx(0.1))
    rel = _metrics(level["vs_noiseless"])
    ok = rel["missed"] == 0 and rel["spurious"] <= 1 and out.nonconverged_required == 0
    verdict("criterion 7 noise robustness", ok,
            f"sigma 10%: missed {rel['missed']}, spurious {rel['spurious']} "
            f"relative to the noiseless run", dt, 300)


def test_polarimetric_identities(verdict):
    out, dt = _run("polarimetric.json")
    s = out.summary
    idn = s["identities"]
    ok = (idn["trials"] == 100 and idn["max_consistency_error"] <= 1e-10
          and idn["all_rank_three"] and idn["max_transverse_error"] <= 1e-8
          and s["mmv"]["all_components_exact"] and out.nonconverged_required == 0)
    verdict("criterion 8 polarimetric identities", ok,
            f"Gamma consistency {idn['max_consistency_error']:.1e}, rank 3 in all "
            f"{idn['trials']}: {idn['all_rank_three']}, transverse error "
            f"{idn['max_transverse_error']:.1e}, six-column support exact: "
            f"{s['mmv']['all_components_exact']}", dt, 300)


def test_row_decorrelation(verdict):
    t0 = time.perf_counter()
    geom = gotcha_geometry()
    grid = imaging_grid(geom, 12.0, 0.125)
    subs = segment_aperture(geom, 75.0, (1500.0 - 75.0) / 300, n_views=301)
    scene = Scene([ReflectivityProfile(q) for q in range(grid.n_points)])
    X = sample_unknown_matrix(scene, grid, subs, geom=geom).values
    c = grid.n_points // 2
    gaps = []
    for l in range(grid.n_points):
        rep = row_correlation_bound_check(X, geom, subs, grid, (c, l))
        if abs(rep.context["Q"]) <= 6 * np.pi:
            gaps.append(abs(rep.lhs - rep.context["sinc_half_Q"]))
    C = fit_decay_constant(X, geom, subs, grid, [(c, l) for l in range(grid.n_points)])
    ok = len(gaps) > 10 and max(gaps) <= 0.05 and 1.5 <= C <= 3
    verdict("criterion 9 row decorrelation", ok,
            f"max | |mu| - |sinc(Q/2)| | = {max(gaps):.4f} over {len(gaps)} pairs with "
            f"|Q| <= 6 pi; fitted C = {C:.3f}", time.perf_counter() - t0, 120)

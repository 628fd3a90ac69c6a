"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import math

import numpy as np

from kgreduce.config import ModelConfig, PotentialSpec
from kgreduce.evolve import EvolutionRun, floquet_compare, hamiltonian, integrate, norm_bound_report, pair, periodic_dt
from kgreduce.experiment import loglog_slope, reference_phi0, transformation_distance
from kgreduce.kam import homological_residual as kam_residual, kam_run, solve_step_homological
from kgreduce.magnus import W_core, homological_residual as magnus_residual, magnus_normal_form
from kgreduce.magnus import verify_pauli_cancellations
from kgreduce.melnikov import FrequencySampler, estimate_measure, fit_through_origin, in_omega0, in_U_alpha
from kgreduce.opnorms import NormParams, block_norm
from kgreduce.spectral import assemble_V, eigenvalues_B

from _blocks import random_block
from conftest import record_criterion, reference_model


def test_criterion_01_exact_cancellations():
    rng = np.random.default_rng(101)
    worst3 = worst2 = 0.0
    for trial in range(20):
        nu = 1 + trial % 2
        cfg = ModelConfig(nu=nu, mass=float(rng.uniform(0, 2)), M=100.0, J=16, K=3)
        spec = PotentialSpec.random(nu, 3, 6, rng)
        X = magnus_normal_form(spec, rng.uniform(100, 200, size=nu), cfg, check=False).X
        d = verify_pauli_cancellations(X, cfg, n_samples=4)
        worst3 = max(worst3, d["ad3"] / d["scale3"])
        worst2 = max(worst2, d["ad2"] / d["scale2"])
    ok = worst3 <= 1e-10 and worst2 <= 1e-12
    record_criterion(1, ok, f"max |ad^3|/scale = {worst3:.2e} (<= 1e-10), max |ad^2 - 4XBX s4|/scale = {worst2:.2e} (<= 1e-12)")
    assert ok


def test_criterion_02_homological_residuals(ref_pipeline, ref_cfg):
    rng = np.random.default_rng(102)
    worst = 0.0
    for trial in range(10):
        nu = 1 + trial % 2
        cfg = ModelConfig(nu=nu, mass=1.0, M=60.0, J=12, K=3, gammaKam=1e-3)
        spec = PotentialSpec.random(nu, 3, 5, rng)
        omega = rng.uniform(70, 110, size=nu)
        mag = magnus_normal_form(spec, omega, cfg, check=False)
        Wc = W_core(assemble_V(spec, cfg), eigenvalues_B(cfg.mass, cfg.J))
        worst = max(worst, magnus_residual(mag.X, Wc, omega) / Wc.max_abs())
        P = random_block(rng, nu=nu, K=3, J=12, scale=1e-3)
        lam = eigenvalues_B(cfg.mass, cfg.J)
        for N in (1, 3):
            X, Z = solve_step_homological(P, lam, omega, N, cfg, check=False)
            worst = max(worst, kam_residual(X, Z, P, lam, omega, N) / P.max_abs())
    mag = ref_pipeline["magnus"]
    worst = max(worst, mag.diagnostics["homological_residual"] / mag.diagnostics["W_scale"])
    P_scale = ref_pipeline["magnus"].V.max_abs()
    for entry in ref_pipeline["state"].log:
        worst = max(worst, entry["homological_residual"] / P_scale)
    ok = worst <= 1e-12
    record_criterion(2, ok, f"max relative residual over all solves = {worst:.2e} (<= 1e-12)")
    assert ok


def test_criterion_03_magnus_size_law(ref_cfg, ref_potential):
    Ms = [50.0, 100.0, 200.0, 400.0]
    norms = []
    for M in Ms:
        cfg = ref_cfg.replace(M=M)
        res = magnus_normal_form(ref_potential, [2 * M], cfg)
        norms.append(block_norm(res.V, NormParams(s=cfg.s0, rho=cfg.rho / 2, alphaW=1.0, betaW=0.0)))
    slope = loglog_slope(Ms, norms)
    ok = abs(slope + 1) <= 0.1
    record_criterion(3, ok, f"log-log slope of |V| vs M = {slope:.4f} (target -1 +- 0.1)")
    assert ok


def test_criterion_04_kam_contraction(ref_pipeline):
    etas = ref_pipeline["state"].schedule.etas
    decreasing = all(b < a for a, b in zip(etas, etas[1:]))
    reached = next((n for n, e in enumerate(etas) if e < 1e-12), None)
    ratios = [math.log(etas[n + 1]) / math.log(etas[n]) for n in range(1, len(etas) - 1)]
    ok = decreasing and reached is not None and reached <= 6 and all(r >= 1.4 for r in ratios)
    record_criterion(4, ok, f"eta = {[float(f'{e:.3g}') for e in etas]}, below 1e-12 at step {reached}, "
                            f"ln-ratios {[round(r, 3) for r in ratios]} (>= 1.4)")
    assert ok


def test_criterion_05_eigenvalue_asymptotics(ref_pipeline, ref_cfg):
    eps = ref_pipeline["ladder"].eps
    eta0 = ref_pipeline["state"].schedule.etas[0]
    sup = float(np.max(np.arange(1, ref_cfg.J + 1) ** ref_cfg.alpha * np.abs(eps)))
    bound = 2 * ref_cfg.gammaKam / ref_cfg.M**ref_cfg.alpha * eta0 * math.e
    ok = sup <= bound
    record_criterion(5, ok, f"sup_j j^alpha |eps_j| = {sup:.3e} <= {bound:.3e}")
    assert ok


def test_criterion_06_transformation_size(ref_potential):
    Ms = [100.0, 200.0, 400.0, 800.0]
    dists = []
    for M in Ms:
        cfg = reference_model(M=M)
        omega = np.array([2 * M])
        mag = magnus_normal_form(ref_potential, omega, cfg)
        state, _ = kam_run(mag.V, eigenvalues_B(cfg.mass, cfg.J), omega, cfg)
        dists.append(transformation_distance(state, mag))
    slope = loglog_slope(Ms, dists)
    target = -(1 - 0.4) / 2
    ok = abs(slope - target) <= 0.15
    record_criterion(6, ok, f"log-log slope of |T - I| vs M = {slope:.4f} (target {target:.2f} +- 0.15)")
    assert ok


def test_criterion_07_measure_scaling():
    gammas = [0.05, 0.1, 0.2, 0.4]
    cfg2 = ModelConfig(nu=2, M=100.0, K=4, seed=7)
    sampler = FrequencySampler(2, cfg2.M, seed=7, count=4000)
    fracs = [estimate_measure(lambda w, c=cfg2.replace(gamma0=g): in_omega0(w, c), sampler)[0] for g in gammas]
    slope, r2 = fit_through_origin(gammas, fracs)
    cfg1 = ModelConfig(nu=1, M=100.0, K=4, seed=7)
    sampler1 = FrequencySampler(1, cfg1.M, seed=7, count=2000)
    one_d = [estimate_measure(lambda w, c=cfg1.replace(gamma0=g): in_omega0(w, c), sampler1)[0]
             for g in gammas + [1.0]]
    ok = r2 >= 0.9 and all(f == 0.0 for f in one_d)
    record_criterion(7, ok, f"nu=2 excluded {fracs}, slope {slope:.3f}, R^2 = {r2:.4f} (>= 0.9); "
                            f"nu=1 excluded {one_d} (all 0)")
    assert ok


def _reference_trajectory(ref_pipeline, ref_cfg):
    H = hamiltonian(ref_pipeline["W"], ref_cfg)
    w = float(ref_pipeline["omega"][0])
    run = EvolutionRun(pair(reference_phi0(ref_cfg.J, ref_cfg.seed)), T=50.0, dt=periodic_dt(w, 0.1 / w),
                       omega=ref_pipeline["omega"], sample_every=400)
    return integrate(H, run, ref_cfg)


def test_criterion_08_floquet_decomposition(ref_pipeline, ref_cfg):
    traj = _reference_trajectory(ref_pipeline, ref_cfg)
    comp = floquet_compare(traj, ref_pipeline["magnus"], ref_pipeline["state"], ref_cfg)
    ok = comp["max_error"] <= 1e-3 and comp["second_half_max"] <= 2 * comp["first_half_max"]
    record_criterion(8, ok, f"max error on [0, 50] = {comp['max_error']:.2e} (<= 1e-3); halves "
                            f"{comp['first_half_max']:.2e} / {comp['second_half_max']:.2e} (ratio <= 2)")
    assert ok


def test_criterion_09_sobolev_bounds(ref_pipeline, ref_cfg):
    rows = norm_bound_report(_reference_trajectory(ref_pipeline, ref_cfg), (0, 1, 2))
    band = 1 + 20 / ref_cfg.M ** ((1 - ref_cfg.alpha) / 2)
    ok = all(r["ratio"] <= band for r in rows)
    record_criterion(9, ok, "max/min ratios " + ", ".join(f"r={r['r']}: {r['ratio']:.6f}" for r in rows)
                     + f" (<= {band:.4f})")
    assert ok


def test_criterion_10_filter_equivalence(ref_cfg):
    mismatches = 0
    checked = 0
    setups = [
        (ref_cfg, FrequencySampler(1, ref_cfg.M, seed=10, count=200)),
        (ModelConfig(nu=2, mass=1.0, M=100.0, J=32, K=4), FrequencySampler(2, 100.0, seed=10, count=200)),
    ]
    members = []
    for cfg, sampler in setups:
        lam = eigenvalues_B(cfg.mass, cfg.J)
        count = 0
        for w in sampler:
            f = in_U_alpha(w, lam, cfg, mode="filtered")
            b = in_U_alpha(w, lam, cfg, mode="brute")
            mismatches += f.member != b.member
            checked += 1
            count += b.member
        members.append(count)
    ok = mismatches == 0
    record_criterion(10, ok, f"{mismatches} disagreements in {checked} samples "
                             f"(members: nu=1 {members[0]}/200, nu=2 {members[1]}/200)")
    assert ok

"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""

import math
import time

import numpy as np
import pytest

from nsaudit.analytic_flows import (
    PoiseuilleParams,
    SinkFlow,
    periodic_box,
    plane_channel_curvature,
    plane_channel_speed,
    poiseuille_curvature,
    poiseuille_speed,
)
from nsaudit.claims_audit import Verdict, audit_decay, audit_energy_identity, audit_theorem1
from nsaudit.cli import main
from nsaudit.density_structure import (
    DensityStructure,
    TubeDecomposition,
    consistent_decomposition,
    extract_density_structure,
    product_invariant,
    rho_L_at_station,
)
from nsaudit.errors import SingularityError
from nsaudit.fields import check_laplacian_identity, diff2, observed_orders
from nsaudit.parametric_solution import (
    RegimeThresholds,
    SolutionParams,
    classify_regime,
    evaluate_velocity,
    split_velocity,
)
from nsaudit.reference_solver import SolverConfig, run, run_to_steady, taylor_green_state

from oracles import band_limited


def verdict(number, title, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})")
    assert ok, detail


def test_operator_identity_order():
    start = time.perf_counter()
    errors = [check_laplacian_identity(band_limited(periodic_box(n), seed=7)).max for n in (32, 64, 128)]
    orders = observed_orders(errors)
    elapsed = time.perf_counter() - start
    ok = min(orders) >= 1.9 and elapsed < 10
    verdict(1, "Laplacian identity order", ok, f"orders {orders[0]:.3f}, {orders[1]:.3f}; {elapsed:.2f} s")


def test_poiseuille_second_difference():
    start = time.perf_counter()
    p = PoiseuilleParams(P_L=3.0, mu=1.8e-3, L=2.5, R=0.01)
    r = np.linspace(-p.R, p.R, 201)
    u = poiseuille_speed(p, r)
    by_formula = np.max(np.abs(u - p.P_L * (p.R**2 - r**2) / (4 * p.mu * p.L)) / np.max(u))
    d2 = diff2(u, 0, r[1] - r[0], False)[1:-1]
    expect = -poiseuille_curvature(p)
    rel = float(np.max(np.abs(d2 / expect - 1)))
    elapsed = time.perf_counter() - start
    ok = by_formula == 0 and rel <= 1e-10 and elapsed < 1
    verdict(2, "Poiseuille second difference", ok, f"max rel error {rel:.2e}; {elapsed:.3f} s")


def test_taylor_green_energy():
    start = time.perf_counter()
    target = math.exp(-0.4)
    errs = {}
    for n, dt in ((64, 0.01), (128, 0.005)):
        c = SolverConfig.periodic(n, 0.1, dt)
        res = run(c, 1.0, state=taylor_green_state(c))
        errs[n] = abs(res.energy[-1] / res.energy[0] / target - 1)
    elapsed = time.perf_counter() - start
    ok = errs[64] < 0.02 and errs[128] < 0.005 and elapsed < 120
    verdict(3, "Taylor-Green energy ratio", ok, f"rel error 64: {errs[64]:.2e}, 128: {errs[128]:.2e}; {elapsed:.1f} s")


def test_channel_steady_state():
    start = time.perf_counter()
    c = SolverConfig.channel(16, 21, nu=1.0, dt=0.002, G=1.0)
    s = run_to_steady(c)
    u = s.velocity.values[0][0]
    centre = u[c.grid.dims[1] // 2]
    centre_err = abs(centre / plane_channel_speed(1.0, c.mu, 1.0, 0.0) - 1)
    curv = -diff2(u, 0, c.grid.spacing[1], False)[1:-1]
    curv_err = float(np.max(np.abs(curv / plane_channel_curvature(1.0, c.mu) - 1)))
    elapsed = time.perf_counter() - start
    ok = centre_err < 0.01 and curv_err < 0.01 and elapsed < 300
    verdict(4, "channel centerline and curvature", ok,
            f"centerline {centre_err:.2e}, curvature {curv_err:.2e}; {elapsed:.1f} s")


def test_density_reciprocity():
    f = SinkFlow(q=1.0)
    v, P = f.sample(f.grid(128))
    seeds = [(1.99, 0.0), (1.95, 0.3), (1.9, -0.4), (1.97, 0.15)]
    tubes = extract_density_structure(v, 1.0, seeds, 0.05, pressure=P)
    spreads = []
    for t in tubes:
        exact = f.speed(t.points[:, 0], t.points[:, 1])
        prod = np.array([np.linalg.norm(rho_L_at_station(t, k)) for k in range(t.n_stations)]) * exact
        spreads.append(float(np.ptp(prod) / np.mean(prod)))
    ok = max(spreads) < 0.01 and min(t.n_stations for t in tubes) > 10
    verdict(5, "|rho_L| |u| constant along sink tubes", ok, f"worst spread {max(spreads):.2e}")


def test_product_invariant():
    rho = 1000.0
    worst_ratio = worst_value = 0.0
    passed = True
    for m in (1, 4, 10, 100):
        v = product_invariant(consistent_decomposition(1.0, rho, m), rho)
        passed &= v.passed
        worst_ratio = max(worst_ratio, v.ratio - 1)
        worst_value = max(worst_value, v.value_error)
    rng = np.random.default_rng(11)
    detected = 0
    trials = 0
    for m in (1, 4, 10, 100):
        d = consistent_decomposition(1.0, rho, m)
        for _ in range(25):
            L, S = d.tube_lengths.copy(), d.slab_areas.copy()
            target = S if rng.random() < 0.5 else L
            target[rng.integers(m)] *= 1 + rng.choice([-1, 1]) * rng.uniform(0.01, 0.5)
            trials += 1
            detected += not product_invariant(TubeDecomposition(d.total_mass, m, L, S), rho).passed
    ok = passed and worst_ratio < 1e-12 and worst_value < 1e-12 and detected == trials
    verdict(6, "density product invariant", ok,
            f"ratio-1 {worst_ratio:.1e}, value error {worst_value:.1e}, perturbations caught {detected}/{trials}")


def test_parametric_formula():
    hand = SolutionParams(omega0=1.0, P_L=1.0, theta1=(1, 0, 0), theta2=(0.5, 0, 0))
    exact = np.array_equal(evaluate_velocity(hand, DensityStructure((0.5, 0, 0), 1.0, 1.0)), [1.5, 0.0, 0.0])
    rng = np.random.default_rng(5)
    bit_exact = True
    for _ in range(500):
        p = SolutionParams(
            omega0=rng.uniform(0.1, 10), P_L=rng.uniform(-5, 5), theta1=rng.normal(size=3),
            theta2=(0, 0.5, 0), vartheta=rng.uniform(0, 2), mu_rot=rng.normal(size=3),
            theta3=rng.normal(size=3), L=rng.uniform(0.1, 3),
        )
        ds = DensityStructure(rng.normal(size=3), rng.uniform(0.1, 5), rng.uniform(0.5, 2))
        u_L, u_0 = split_velocity(p, ds)
        bit_exact &= np.array_equal(u_L + u_0, evaluate_velocity(p, ds))
    th = RegimeThresholds()
    agree = True
    for L in (0.0, 1e-12, 1e-9, 2e-9, 1.0):
        for S in (0.0, 1e-10, 1e-9, 1e-8, 5.0):
            ds = DensityStructure((L, 0, 0), S, 1.0)
            try:
                evaluate_velocity(hand, ds, th)
                raised = False
            except SingularityError:
                raised = True
            agree &= raised == (not classify_regime(ds, th).laminar)
    ok = exact and bit_exact and agree
    verdict(7, "parametric velocity evaluator", ok,
            f"hand example exact: {exact}, recombination bit-exact: {bit_exact}, errors match regimes: {agree}")


def test_falsification_fixture():
    r = audit_theorem1()
    mags = r.residuals["at_point_per_grid"]
    errs = [abs(m / (2 * math.sqrt(2)) - 1) for m in mags]
    shear = audit_theorem1(lambda x, y: (y, 0 * x, 0 * x), label="u=(y,0,0)")
    ok = len(mags) == 3 and max(errs) < 0.01 and r.verdict is Verdict.FAILS and shear.verdict is Verdict.HOLDS
    verdict(8, "identity fixture", ok,
            f"|residual(1,1)| {mags[-1]:.6f}, worst rel error {max(errs):.1e}, "
            f"fixture {r.verdict.value}, shear {shear.verdict.value}")


def test_energy_identity():
    start = time.perf_counter()
    r = audit_energy_identity(samples=100_000)
    elapsed = time.perf_counter() - start
    ok = r.residuals["max"] < 1e-14 and elapsed < 1
    verdict(9, "specific-energy identity", ok, f"max residual {r.residuals['max']:.1e}; {elapsed:.3f} s")


@pytest.mark.parametrize("t0", [None, 0.5, 2.0])
def test_decay_audit(t0):
    r = audit_decay(SolverConfig.periodic(32, 0.1, 0.01), t0=t0)
    res = r.residuals
    err = abs(res["energy_ratio"] / math.exp(-0.4 * res["t0"]) - 1)
    recorded = r.verdict in (Verdict.HOLDS, Verdict.FAILS) and r.inputs["stop_threshold"] == 1e-6
    ok = math.isfinite(res["t0"]) and err < 0.03 and recorded
    verdict(10, f"decay ratio at t0={res['t0']:.4g} ({res['t0_source']})", ok,
            f"E(t0)/E(0) {res['energy_ratio']:.5f}, rel error {err:.1e}, finite-stop verdict {r.verdict.value}")


def test_audit_all_deterministic(tmp_path):
    cfg = tmp_path / "audit.ini"
    cfg.write_text("[audit]\nstop_threshold = 1e-6\n")
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["audit", "all", "--config", str(cfg), "--out", str(d)]) for d in dirs]
    names = sorted(p.name for p in dirs[0].iterdir())
    same = names == sorted(p.name for p in dirs[1].iterdir()) and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names
    )
    ok = codes == [0, 0] and same and "report.json" in names
    verdict(11, "audit all byte-identical", ok, f"{len(names)} files compared")

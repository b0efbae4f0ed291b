"""Cross-engine verification suites.

quick: algebra identities, Binder limits, negativity complement symmetry,
trivial-defect cost and determinism, in under a minute.
full: adds the dense / loop-exact equivalences for every diagnostic at L = 2
and the loop / error-configuration duality at L = 2 and L = 3.
"""

from __future__ import annotations

import math
import random

import numpy as np

from . import dense, loopexact
from .lattice import PauliString, build_code, region_sign, y_phase
from .model import ErrorModel
from .spinmc import MCConfig, ObservableSpec, binder_estimate, \
    defect_free_energy_estimate, run_chains

QUICK_MC_SEED = 20240915


def _row(name: str, residual: float, tol: float, detail: str = "") -> dict:
    return {"name": name, "residual": residual, "tol": tol,
            "status": "pass" if residual <= tol else "FAIL", "detail": detail}


def quick_checks() -> list[dict]:
    rows = []
    rng = random.Random(99)
    code = build_code(2)

    # Pauli algebra: y_A(g) y_A(h) = y_A(gh) sgn_A(g, h), multiplicativity
    worst = 0
    for _ in range(1000):
        g = PauliString(8, rng.getrandbits(8), rng.getrandbits(8))
        h = PauliString(8, rng.getrandbits(8), rng.getrandbits(8))
        area = rng.getrandbits(8)
        lhs = y_phase(g, area) * y_phase(h, area)
        rhs = y_phase(g * h, area) * region_sign(g, h, area)
        worst = max(worst, abs(lhs - rhs))
    rows.append(_row("pauli: y/sgn composition (1000 random pairs)", worst, 0))

    worst = 0
    for _ in range(300):
        g = PauliString(8, rng.getrandbits(8), rng.getrandbits(8))
        h = PauliString(8, rng.getrandbits(8), rng.getrandbits(8))
        k = PauliString(8, rng.getrandbits(8), rng.getrandbits(8))
        area = rng.getrandbits(8)
        worst = max(worst, abs(region_sign(g * h, k, area)
                               - region_sign(g, k, area) * region_sign(h, k, area)))
    rows.append(_row("pauli: region-sign bilinearity (300 random triples)", worst, 0))

    # negativity complement symmetry at L = 2, dense engine
    rho = dense.apply_channel(dense.build_rho0(code, "max-mixed"), ErrorModel(0.0, 0.15))
    area = code.edges_interior_to_plaquettes({code.plaquette(0, 0), code.plaquette(0, 1)})
    comp = code.all_edges_mask() ^ area
    res = abs(dense.renyi_negativity(rho, area, 4) - dense.renyi_negativity(rho, comp, 4))
    rows.append(_row("negativity: E_A = E_complement (dense, L=2, p_z=0.15)", res, 1e-10))

    # trivial defect sector costs nothing (loop engine and MC estimator)
    res = abs(loopexact.defect_free_energy(code, "Z", 0.3, 2, [0], [0]))
    rows.append(_row("defects: trivial sector free energy (loop engine)", res, 0))
    cfg = MCConfig(L=6, n=2, p=0.2, sweeps_thermalize=100, sweeps_measure=1200,
                   measure_interval=2, chain_count=1, seed_base=QUICK_MC_SEED)
    est = defect_free_energy_estimate(
        run_chains(cfg, ObservableSpec(defect_sectors=[((0,), (0,))])), 0)
    rows.append(_row("defects: trivial sector free energy (MC estimator)", abs(est.value), 0))

    # Binder limits
    cfg = MCConfig(L=12, n=2, p=0.02, sweeps_thermalize=1200, sweeps_measure=8000,
                   measure_interval=2, chain_count=4, seed_base=QUICK_MC_SEED + 1)
    b_pm = binder_estimate(run_chains(cfg, ObservableSpec()))
    rows.append(_row("binder: paramagnetic limit -> 3 (L=12, p=0.02)",
                     abs(b_pm.value - 3.0), max(5 * b_pm.error, 0.12),
                     f"B = {b_pm.value:.3f} +- {b_pm.error:.3f}"))
    cfg = MCConfig(L=12, n=2, p=0.45, sweeps_thermalize=300, sweeps_measure=3000,
                   measure_interval=2, chain_count=4, seed_base=QUICK_MC_SEED + 2)
    b_fm = binder_estimate(run_chains(cfg, ObservableSpec()))
    rows.append(_row("binder: ferromagnetic limit -> 1 (L=12, p=0.45)",
                     abs(b_fm.value - 1.0), 0.05,
                     f"B = {b_fm.value:.4f} +- {b_fm.error:.4f}"))

    # determinism: identical (seed, config) -> byte-identical accumulators
    cfg = MCConfig(L=6, n=3, p=0.18, sweeps_thermalize=50, sweeps_measure=400,
                   measure_interval=2, chain_count=2, seed_base=QUICK_MC_SEED + 3)
    obs = ObservableSpec(correlator_seps=[1])
    one = "".join(a.to_jsonl() for a in run_chains(cfg, obs))
    two = "".join(a.to_jsonl() for a in run_chains(cfg, obs))
    rows.append(_row("determinism: byte-identical rerun", float(one != two), 0))
    return rows


def full_checks() -> list[dict]:
    rows = quick_checks()
    code = build_code(2)
    rho0 = dense.build_rho0(code, "max-mixed")
    bell = dense.build_rho0(code, "bell-reference")
    endpoints = ((0, 0), (1, 1))
    string = loopexact.dual_path_mask(code, *endpoints)
    excited0 = dense.apply_string(rho0, x_mask=string)
    area = code.edges_interior_to_plaquettes({code.plaquette(0, 0), code.plaquette(0, 1)})

    ps = (0.0, 0.05, 0.1, 0.178, 0.3, 0.45)
    for n in (2, 3):
        for p in ps:
            model = ErrorModel(p, p)
            corrupted = dense.apply_channel(rho0, model)
            d_val = dense.renyi_moment(corrupted, n)
            l_val = loopexact.moment_via_loops(code, model, n)
            rows.append(_row(f"moment: dense vs loops (n={n}, p={p})",
                             abs(d_val - l_val) / abs(d_val), 1e-10))

            model_x = ErrorModel(p, 0.0)
            d_rel = dense.renyi_relative_entropy(
                dense.apply_channel(rho0, model_x),
                dense.apply_channel(excited0, model_x), n)
            l_rel = loopexact.relative_entropy_via_loops(code, model_x, n, endpoints)
            if math.isinf(d_rel) or math.isinf(l_rel):
                res = 0.0 if d_rel == l_rel else math.inf
            else:
                res = abs(d_rel - l_rel) / max(1.0, abs(d_rel))
            rows.append(_row(f"relative entropy: dense vs loops (n={n}, p_x={p})", res, 1e-10))

            d_ic = dense.renyi_coherent_info(dense.apply_channel(bell, model), n)
            l_ic = loopexact.coherent_info_via_defects(code, model, n)
            rows.append(_row(f"coherent info: dense vs defects (n={n}, p={p})",
                             abs(d_ic - l_ic) / max(1.0, abs(d_ic)), 1e-10))

            model_z = ErrorModel(0.0, p)
            d_neg = dense.renyi_negativity(dense.apply_channel(rho0, model_z), area, 2 * n)
            l_neg = loopexact.negativity_via_pinning(code, model_z, 2 * n, area)
            rows.append(_row(f"negativity: dense vs pinning (2n={2 * n}, p_z={p})",
                             abs(d_neg - l_neg) / max(1.0, abs(d_neg)), 1e-10))

    for L, ns in ((2, (2, 3)), (3, (2,))):
        code_l = build_code(L)
        for n in ns:
            for p in (0.109, 0.25):
                for row in loopexact.duality_report(code_l, p, n):
                    rows.append(_row(
                        f"duality: {row['loop_kind']}-loops vs {row['error_kind']}-errors "
                        f"(L={L}, n={n}, p={p})", row["residual"], 1e-10))
    return rows


def format_report(rows: list[dict]) -> str:
    """Stable plain-text residual table."""
    width = max(len(r["name"]) for r in rows) + 2
    lines = [f"{'check'.ljust(width)} {'residual':>12} {'tol':>10} status",
             "-" * (width + 32)]
    for r in rows:
        res = f"{r['residual']:.3e}" if math.isfinite(r["residual"]) else "inf"
        tol = f"{r['tol']:.1e}" if r["tol"] else "0"
        lines.append(f"{r['name'].ljust(width)} {res:>12} {tol:>10} {r['status']}")
    n_fail = sum(1 for r in rows if r["status"] != "pass")
    lines.append("-" * (width + 32))
    lines.append(f"{len(rows)} checks, {n_fail} failures")
    return "\n".join(lines)

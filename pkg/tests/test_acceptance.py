"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v -s tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import math
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

from hmink.bounds import (
    bound_bgl,
    bound_euclidean,
    bound_gallego_solanes,
    bound_ghomi_spruck,
    bound_profile,
    bound_santalo,
    bound_sharp,
    compare_sharp_vs_bgl,
    double_disk,
    santalo_gap,
    santalo_violation_threshold,
    sobol_feasible_sweep,
)
from hmink.flow import (
    FlowConfig,
    make_perturbed_sphere,
    make_sphere,
    measure,
    monotone_audit,
    normal_offset_check,
    run_flow,
    sphere_flow_exact,
)
from hmink.profiles import (
    SpaceForm,
    eta,
    radius_from_volume,
    sphere_area,
    sphere_tmc,
    sphere_volume,
    xi,
    xi_via_radius,
)
from hmink.qiter import IterationConfig, fixed_point_residual, run_iteration, xi_grid

H3 = SpaceForm(-1.0)
FLAT = SpaceForm(0.0)
CURVATURES = (0.0, -0.25, -1.0, -4.0)


SUMMARY = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    SUMMARY.append(line)
    print(line, flush=True)
    return ok


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# shared flow runs -----------------------------------------------------------

FLOW_CFG = FlowConfig(dt=1e-4, t_max=0.4, record_every=100, n_grid=256)


@functools.lru_cache(maxsize=None)
def flow_run(kind):
    t0 = time.perf_counter()
    if kind == "sphere":
        surf = make_sphere(1.0, H3, 256)
    elif kind == "flat_sphere":
        surf = make_sphere(1.0, FLAT, 256)
    else:
        surf = make_perturbed_sphere(1.0, 0.05, 2, H3, 256)
    trace = run_flow(surf, FLOW_CFG)
    return surf, trace, time.perf_counter() - t0


def radius_error(trace, sf):
    return abs(trace.final_surface.rhos.max() - sphere_flow_exact(1.0, sf, trace.times[-1]))


def dt_halving_errors():
    """Temporal self-convergence on a mode-4 perturbed sphere against a dt/16 reference."""
    surf = make_perturbed_sphere(1.0, 0.05, 4, H3, 64)
    final = {}
    for dt in (2e-3, 1e-3, 5e-4, 1.25e-4):
        cfg = FlowConfig(dt=dt, t_max=0.2, record_every=10 ** 6, n_grid=64)
        final[dt] = run_flow(surf, cfg).final_surface.rhos
    ref = final[1.25e-4]
    return [float(np.max(np.abs(final[dt] - ref))) for dt in (2e-3, 1e-3, 5e-4)]


# criteria --------------------------------------------------------------------

def criterion_1():
    worst_d, worst_xi, worst_eta = 0.0, 0.0, 0.0
    for a in CURVATURES:
        sf = SpaceForm(a)
        for r in np.linspace(0.05, 10.0, 200):
            r = float(r)
            h = 1e-5 * max(r, 1.0)
            dV = (sphere_volume(r + h, sf) - sphere_volume(r - h, sf)) / (2 * h)
            dS = (sphere_area(r + h, sf) - sphere_area(r - h, sf)) / (2 * h)
            worst_d = max(worst_d, rel(dV, sphere_area(r, sf)), rel(dS, sphere_tmc(r, sf)))
            x = sphere_volume(r, sf)
            e = eta(x, sf)
            worst_xi = max(worst_xi, rel(xi(x, sf) ** 2, 16 * math.pi * e - 4 * a * e * e),
                           rel(xi_via_radius(x, sf), xi(x, sf)))
            # eta' = dS/dV = M/S at the sphere of volume x
            rr = radius_from_volume(x, sf)
            eta_prime = sphere_tmc(rr, sf) / sphere_area(rr, sf)
            worst_eta = max(worst_eta, rel(eta_prime * e, xi(x, sf)))
    ok = worst_d <= 1e-6 and worst_xi <= 1e-10 and worst_eta <= 1e-10
    return report(1, ok, f"max rel: derivatives {worst_d:.2e}, xi identity {worst_xi:.2e}, "
                         f"eta'eta=xi {worst_eta:.2e}")


def criterion_2():
    r = mpmath.mpf(1)
    oracle = {
        "V": float(mpmath.pi * (mpmath.sinh(2 * r) - 2 * r)),
        "S": float(4 * mpmath.pi * mpmath.sinh(r) ** 2),
        "M": float(4 * mpmath.pi * mpmath.sinh(2 * r)),
    }
    V, S, M = sphere_volume(1.0, H3), sphere_area(1.0, H3), sphere_tmc(1.0, H3)
    m = measure(make_sphere(1.0, H3, 256))
    candidates = {
        "V": [V, m.V],
        "S": [S, m.S, eta(V, H3)],
        "M": [M, m.M, bound_sharp(S, V, H3), bound_santalo(S, H3), bound_bgl(S, V),
              bound_profile(V, H3)],
    }
    worst = max(rel(v, oracle[k]) for k, vs in candidates.items() for v in vs)
    printed = {"V": 5.11073, "S": 17.35529, "M": 45.57519}
    drift = max(rel(printed[k], oracle[k]) for k in printed)
    return report(2, worst <= 1e-6,
                  f"V={V:.10g} S={S:.10g} M={M:.10g}; max rel spread {worst:.2e} "
                  f"(printed approximations differ by up to {drift:.1e})")


def criterion_3():
    t0 = time.perf_counter()
    rep = run_iteration(IterationConfig(sf=H3, x_max=50.0, n_points=2001, sup_tol=1e-4))
    elapsed = time.perf_counter() - t0
    increasing = all(np.all(b.ys >= a.ys) for a, b in zip(rep.iterates, rep.iterates[1:]))
    bounded = all(np.all(q.ys <= rep.xi.ys) for q in rep.iterates)
    gaps_down = all(b <= a for a, b in zip(rep.gaps, rep.gaps[1:]))
    res_xi = fixed_point_residual(xi_grid(rep.xi.xs, H3), H3).sup_norm()
    flat = run_iteration(IterationConfig(sf=FLAT))
    ok = (rep.converged and increasing and bounded and gaps_down and rep.gaps[-1] <= 1e-4
          and res_xi <= 1e-6 and flat.converged and flat.n_final == 1 and elapsed <= 30)
    return report(3, ok, f"n_final={rep.n_final} gap={rep.gaps[-1]:.2e} residual(xi)={res_xi:.2e} "
                         f"flat n_final={flat.n_final} time={elapsed:.1f}s")


def criterion_4():
    S, V, e = sobol_feasible_sweep(10_000, v_max=50.0, s_span=100.0, seed=0)
    # the isoperimetric slice itself, where equality must be flagged
    S = np.concatenate([S, e[:100]])
    V = np.concatenate([V, V[:100]])
    chain = gap_ok = eq_ok = deriv_ok = True
    worst_gap = math.inf
    worst_deriv = -math.inf
    for s, v in zip(S, V):
        s, v = float(s), float(v)
        eu, gs, sh = bound_euclidean(s), bound_ghomi_spruck(s, H3), bound_sharp(s, v, H3)
        if s > 0 and v > 0:
            chain &= sh > gs > eu
        cmp = compare_sharp_vs_bgl(s, v)
        worst_gap = min(worst_gap, cmp.gap)
        gap_ok &= cmp.gap >= -1e-9
        eq_ok &= cmp.equality == (abs(s - eta(v, H3)) <= 1e-8)
        h = 1e-6 * max(1.0, s)
        d1 = (bound_sharp(s + h, v, H3) - bound_sharp(max(s - h, 0.0), v, H3)) / (s + h - max(s - h, 0.0))
        d2 = (bound_bgl(s + h, v) - bound_bgl(max(s - h, 0.0), v)) / (s + h - max(s - h, 0.0))
        worst_deriv = max(worst_deriv, d2 - d1)
        deriv_ok &= d2 <= d1 + 1e-7
    ok = chain and gap_ok and eq_ok and deriv_ok
    return report(4, ok, f"{len(S)} points; chain={chain} min(F1-F2)={worst_gap:.3e} "
                         f"equality flags ok={eq_ok} max(dF2-dF1)={worst_deriv:.2e}")


def _disk_convention(theta):
    """Sign pattern of the Santalo and Gallego-Solanes gaps for edge angle theta."""
    rhos = np.linspace(0.01, 10.0, 1000)
    sant = np.array([santalo_gap(float(r), theta) for r in rhos])
    gs = np.array([double_disk(float(r), theta).M - bound_gallego_solanes(double_disk(float(r), theta).S, H3)
                   for r in rhos])
    c = theta ** 2 / (16 - theta ** 2) if theta < 4 else math.inf
    rho_star = math.acosh(c) if 1 < c < math.inf else (0.0 if c <= 1 else math.inf)
    expected = rhos > rho_star
    # skip samples within a grid step of the predicted switch
    away = np.abs(rhos - rho_star) > 0.02
    matches = bool(np.all((sant < 0)[away] == expected[away]))
    violates = bool(np.any(sant < 0))
    gs_ok = bool(np.all(gs >= 0))
    return matches and violates and gs_ok, violates, gs_ok, rho_star


def criterion_5():
    rho = santalo_violation_threshold()
    closed = math.pi ** 2 / (16 - math.pi ** 2)
    rhos = np.linspace(0.01, 10.0, 1000)
    gaps = np.array([santalo_gap(float(r)) for r in rhos])
    precise = bool(np.all((gaps < 0) == (rhos > rho)))
    flips = int(np.sum(np.diff(np.sign(gaps)) != 0))
    gs = all(double_disk(float(r)).M >= bound_gallego_solanes(double_disk(float(r)).S, H3) for r in rhos)
    core = abs(math.cosh(rho) - closed) <= 1e-9 and precise and flips == 1 and gs
    robust = {}
    for name, theta in (("pi/2", math.pi / 2), ("pi", math.pi), ("2pi", 2 * math.pi)):
        robust[name] = _disk_convention(theta)
    robust_ok = all(v[0] for v in robust.values())
    notes = ", ".join(f"{k}: {'ok' if v[0] else ('no Santalo violation' if not v[1] else 'Gallego-Solanes violated')}"
                      for k, v in robust.items())
    return report(5, core and robust_ok,
                  f"rho*={rho:.10f} cosh err={abs(math.cosh(rho) - closed):.1e} single flip={flips == 1} "
                  f"Gallego-Solanes={gs}; edge-angle robustness [{notes}]")


def criterion_6():
    _, tr_h, t_h = flow_run("sphere")
    _, tr_e, t_e = flow_run("flat_sphere")
    err_h = radius_error(tr_h, H3)
    err_e = radius_error(tr_e, FLAT)
    errs = dt_halving_errors()
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = err_h <= 1e-4 and err_e <= 1e-4 and all(q >= 3.5 for q in ratios) and max(t_h, t_e) <= 120
    return report(6, ok, f"radius err H3={err_h:.2e} flat={err_e:.2e}; dt-halving ratios "
                         f"{', '.join(f'{q:.1f}' for q in ratios)}; runtime {t_h:.1f}s/{t_e:.1f}s")


def criterion_7():
    worst = {"gb": 0.0, "dS": 0.0, "dV": 0.0, "offset": 0.0}
    for kind in ("sphere", "perturbed"):
        surf, trace, _ = flow_run(kind)
        audit = monotone_audit(trace)
        worst["gb"] = max(worst["gb"], audit["gauss_bonnet_max_rel"])
        worst["dS"] = max(worst["dS"], audit["dS_residual_max_rel"])
        worst["dV"] = max(worst["dV"], audit["dV_residual_max_rel"])
        for s in (surf, trace.final_surface):
            off = normal_offset_check(s)
            worst["offset"] = max(worst["offset"], off["area_residual"], off["volume_residual"])
    ok = worst["gb"] <= 1e-6 and worst["dS"] <= 2e-3 and worst["dV"] <= 2e-3 and worst["offset"] <= 5e-3
    return report(7, ok, " ".join(f"{k}={v:.2e}" for k, v in worst.items()))


def criterion_8():
    sphere_phi = 0.0
    for kind in ("sphere", "flat_sphere"):
        _, trace, _ = flow_run(kind)
        sphere_phi = max(sphere_phi, max(abs(p) / m.M ** 2 for p, m in zip(trace.phiInf, trace.measures)))
    _, trace, _ = flow_run("perturbed")
    audit = monotone_audit(trace)
    mono = audit["checks"]["phi1_monotone"] and audit["checks"]["phiInf_monotone"]
    strictly = bool(np.all(np.diff(trace.phi1) < 0) and np.all(np.diff(trace.phiInf) < 0))
    sharp = kleiner = math.inf
    for kind in ("sphere", "flat_sphere", "perturbed"):
        _, tr, _ = flow_run(kind)
        for m in tr.measures:
            sharp = min(sharp, m.M - bound_sharp(m.S, m.V, tr.sf) + 1e-3 * m.M)
            kleiner = min(kleiner, m.S - eta(m.V, tr.sf) + 1e-6)
    ok = sphere_phi <= 1e-6 and mono and sharp >= 0 and kleiner >= 0
    return report(8, ok, f"sphere |phiInf|/M^2<={sphere_phi:.1e}; perturbed phi1/phiInf monotone={mono} "
                         f"(strict={strictly}); sharp margin {sharp:.3e}, Kleiner margin {kleiner:.3e}")


def _cli(args, cwd):
    env = dict(os.environ, HMINK_THREADS="1")
    return subprocess.run([sys.executable, "-m", "hmink.cli", *args], cwd=cwd, env=env,
                          capture_output=True, text=True)


def criterion_9():
    runs = [
        ["profiles", "--n", "301", "--out", "{d}/p.csv"],
        ["qiter", "--n-points", "501", "--out", "{d}/q.csv"],
        ["bounds", "--S", "20", "--V", "5", "--out", "{d}/b.json"],
        ["disk", "--out", "{d}/k.csv"],
        ["flow", "--n", "64", "--dt", "1e-3", "--t-max", "0.05", "--record-every", "10", "--out", "{d}/f.csv"],
    ]
    identical = True
    with tempfile.TemporaryDirectory() as tmp:
        snapshots = []
        for k in range(2):
            d = Path(tmp) / f"run{k}"
            d.mkdir()
            stdout = []
            for args in runs:
                proc = _cli([a.format(d=d) for a in args], tmp)
                stdout.append((proc.returncode, proc.stdout))
            files = {p.name: p.read_bytes() for p in sorted(d.iterdir()) if "manifest" not in p.name}
            snapshots.append((stdout, files))
        identical = snapshots[0] == snapshots[1] and all(code == 0 for code, _ in snapshots[0][0])
        fixtures = [
            (["qiter", "--max-n", "1"], 2),
            (["bounds", "--S", "1", "--V", "50"], 3),
            (["flow", "--shape", "perturbed", "--eps", "0.9"], 1),
            (["flow", "--dt", "0.05", "--n", "64"], 4),
            (["profiles", "--a", "1"], 1),
            (["disk", "--n", "0"], 1),
            (["bounds", "--S", "0", "--V", "0"], 0),
        ]
        codes = [(args, expected, _cli(args, tmp).returncode) for args, expected in fixtures]
    contract = all(e == got for _, e, got in codes)
    bad = [f"{' '.join(a)} -> {got} (want {e})" for a, e, got in codes if e != got]
    return report(9, identical and contract,
                  f"byte-identical reruns={identical}; exit codes {'ok' if contract else bad}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 10)])
def test_acceptance(check):
    assert check()


if __name__ == "__main__":
    results = [check() for check in CRITERIA]
    sys.exit(0 if all(results) else 1)

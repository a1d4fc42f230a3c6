"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line (shown in the terminal summary) before asserting.
"""

import json
import math
import os
import time

import numpy as np

from bykov_atlas.cli import run as cli_run
from bykov_atlas.maps import (
    DiskPoint,
    WallPoint,
    eta_closed_form,
    fd_jacobian,
    jacobian,
    phi1,
    phi2,
    principal,
    segment_trace,
)
from bykov_atlas.model import REFERENCE_PARAMS, draw_params, in_region_B, params_to_config
from bykov_atlas.ode import C_K, divergence_max, equilibria_with_spectrum, integrate, linear_saddle_field, michelson
from bykov_atlas.reversals import (
    circular_distance,
    equidistribution,
    find_reversal_phases,
    formula_discrepancy_report,
    progression_check,
    reversal_sequence,
)
from bykov_atlas.spectra import classify, classify_jacobian, elliptic_strip, find_fixed_points

from conftest import ACCEPTANCE_LINES, make, random_valid_point

P = REFERENCE_PARAMS
GAMMA_SETS = {
    "1": P,
    "3/2": P.with_changes(E2=2.0 / 3.0),
    "1/sqrt2": P.with_changes(E2=math.sqrt(2.0)),
}


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[k] = f"AC{k:<2} {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, detail


def test_ac01_area_preservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_eta = worst_R = 0.0
    for _ in range(10):
        prm = draw_params(rng)
        for _ in range(1000):
            p = random_valid_point(rng, prm)
            worst_eta = max(worst_eta, abs(jacobian("eta", p, prm).det - 1))
            worst_R = max(worst_R, abs(jacobian("return_map", p, prm).det - 1))
    dt = time.perf_counter() - t0
    ok = worst_eta <= 1e-9 and worst_R <= 1e-9 and dt < 5.0
    record(1, ok, f"area preservation: max|det D eta - 1|={worst_eta:.2e}, max|det DR - 1|={worst_R:.2e}, {dt:.2f}s")


def test_ac02_closed_form_matches_composition():
    t0 = time.perf_counter()
    sets = [P, make(a=1.0), make(alpha1=0.4, C1=2.0, E2=3.0, a=1.3), make(alpha1=3.0, alpha2=0.5, a=3.5),
            make(C1=0.3, E2=0.2, a=2.5)]
    worst = 0.0
    compared = 0
    for prm in sets:
        s = np.exp(np.linspace(-0.01, -40.0, 1000))
        tr = segment_trace(0.0, s, prm)
        xs, ys = eta_closed_form(0.0, tr.s[tr.valid], prm)
        dev = np.maximum(np.abs(tr.x[tr.valid] - xs), np.abs(tr.y[tr.valid] - ys))
        worst = max(worst, float(np.max(dev)))
        compared += int(np.sum(tr.valid))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and compared >= 4000 and dt < 2.0
    record(2, ok, f"closed form vs composition: max lift deviation {worst:.2e} over {compared} points, {dt:.2f}s")


def test_ac03_local_maps_match_flow():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    sd = P.saddle
    f1, f2 = linear_saddle_field(sd, "sigma1"), linear_saddle_field(sd, "sigma2")
    worst1 = worst2 = 0.0
    for _ in range(100):
        x = float(rng.uniform(-math.pi, math.pi))
        y = float(math.exp(rng.uniform(math.log(1e-3), 0.0)))
        end = integrate(f1, (math.cos(x), math.sin(x), y), -math.log(y) / sd.E1, rel_tol=1e-11, abs_tol=1e-13).final
        q = phi1(WallPoint(x, y), P)
        target = np.array([q.r * math.cos(q.phi), q.r * math.sin(q.phi), 1.0])
        worst1 = max(worst1, float(np.max(np.abs(end - target))))

        r = float(math.exp(rng.uniform(math.log(1e-2), 0.0)))
        ph = float(rng.uniform(-math.pi, math.pi))
        end = integrate(f2, (r * math.cos(ph), r * math.sin(ph), 1.0), -math.log(r) / sd.E2,
                        rel_tol=1e-11, abs_tol=1e-13).final
        w = phi2(DiskPoint(r, ph), P)
        target = np.array([math.cos(w.x), math.sin(w.x), w.y])
        worst2 = max(worst2, float(np.max(np.abs(end - target))))
    dt = time.perf_counter() - t0
    ok = worst1 <= 1e-8 and worst2 <= 1e-8 and dt < 5.0
    record(3, ok, f"local maps vs flow: entry {worst1:.2e}, exit {worst2:.2e}, {dt:.2f}s")


def test_ac04_ratio_law():
    worst = 0.0
    for prm in GAMMA_SETS.values():
        q = math.exp(-math.pi / prm.g1)
        for phi in find_reversal_phases(prm):
            ev = [e for e in reversal_sequence(phi, 21, prm) if e.n <= 20]
            for a, b in zip(ev, ev[1:]):
                worst = max(worst, abs(b.s_n / a.s_n - q) / q)
    record(4, worst <= 1e-12, f"ratio law: max relative error {worst:.2e} (n <= 20)")


def test_ac05_progression_law():
    t0 = time.perf_counter()
    worst_res = worst_slope = 0.0
    for prm in GAMMA_SETS.values():
        step = math.pi * (1 - prm.gamma)
        for phi in find_reversal_phases(prm):
            ev = reversal_sequence(phi, 21, prm)
            for e in ev:
                worst_res = max(worst_res, abs(e.x_lift - ev[0].x_lift - e.n * step))
            worst_slope = max(worst_slope, progression_check(ev, prm.gamma).slope_error)
    dt = time.perf_counter() - t0
    ok = worst_res <= 1e-6 and worst_slope <= 1e-8 and dt < 2.0
    record(5, ok, f"progression: max residual {worst_res:.2e}, max slope error {worst_slope:.2e}, {dt:.2f}s")


def test_ac06_degenerate_case():
    flat = make(a=1.0)
    assert flat.g2 == -2 * flat.g1
    tr = segment_trace(0.3, np.exp(np.linspace(-0.01, -60.0, 2000)), flat)
    var = float(np.var(tr.x[tr.valid]))
    record(6, var < 1e-20 and np.all(tr.valid), f"degenerate case: variance of x2 along the trace {var:.2e}")


def _distinct_angles(values, tol):
    reps = []
    for v in values:
        if all(circular_distance(v, w) > tol for w in reps):
            reps.append(v)
    return reps


def test_ac07_density_dichotomy():
    t0 = time.perf_counter()
    irr = GAMMA_SETS["1/sqrt2"]
    ev = reversal_sequence(find_reversal_phases(irr)[0], 10_000, irr, log_space=True)
    ds = [equidistribution(ev[:N]).star_discrepancy_estimate for N in (100, 1000, 10_000)]
    rat = GAMMA_SETS["3/2"]
    ev32 = reversal_sequence(find_reversal_phases(rat)[0], 10_000, rat, log_space=True)
    distinct = _distinct_angles(np.mod([e.x_lift for e in ev32], 2 * math.pi), 1e-8)
    dt = time.perf_counter() - t0
    ok = ds[2] < 0.02 and ds[0] > ds[1] > ds[2] and len(distinct) <= 2 and dt < 10.0
    record(7, ok, f"density: D*(1e2,1e3,1e4) = {ds[0]:.4f}, {ds[1]:.4f}, {ds[2]:.5f}; "
                  f"gamma=3/2 distinct angles mod 2pi = {len(distinct)} (criterion <= 2), {dt:.2f}s")


def test_ac08_region_B():
    # oracle: a = 2 gives bounds 7.5/(1 -/+ sqrt 5); the listed decimal -6.06758 is off by 4.7e-5, so the
    # frozen oracle values are compared and the gap is reported on the summary line
    lower_oracle = 7.5 / (1 - math.sqrt(5))
    upper_oracle = 7.5 / (1 + math.sqrt(5))
    b = in_region_B(P)
    ok_fig = (abs(b.lower - lower_oracle) <= 1e-5 and abs(b.upper - upper_oracle) <= 1e-5
              and abs(b.middle + 3.0) <= 1e-5 and b.inside)
    rng = np.random.default_rng(108)
    flat_inside = 0
    for _ in range(1000):
        p = draw_params(rng).with_changes(a=1.0)
        flat_inside += in_region_B(p).inside
    ok = ok_fig and flat_inside == 0
    record(8, ok, f"region B: bounds ({b.lower:.7f}, {b.upper:.7f}) middle {b.middle}, inside={b.inside}; "
                  f"listed -6.06758 differs from 7.5/(1-sqrt5) by {abs(b.lower + 6.06758):.1e}; "
                  f"a=1 inside count {flat_inside}/1000")


def test_ac09_classification_soundness():
    res = find_fixed_points(((-1.0, 0.0), (1e-6, 1e-2)), 20, 1e-10, P)
    bad_det = [r for r in res.reports if abs(r.det - 1) > 1e-9]
    bad_ell = []
    for r in res.reports:
        if r.cls == "elliptic":
            l1, l2 = r.eigenvalues
            if abs(abs(l1) - 1) > 1e-9 or abs(abs(l2) - 1) > 1e-9 or l1 != l2.conjugate():
                bad_ell.append(r)
    # elliptic points along a reversal fiber exercise the elliptic branch as well
    phi = find_reversal_phases(P)[0]
    for y in np.exp(np.linspace(math.log(1e-8), math.log(1e-3), 50)):
        c = classify(WallPoint(principal(phi + P.g1 * math.log(y)), float(y)), P)
        if c.cls == "elliptic":
            l1, l2 = c.eigenvalues
            if abs(abs(l1) - 1) > 1e-9 or l1 != l2.conjugate():
                bad_ell.append(c)
    rng = np.random.default_rng(109)
    flips = 0
    for _ in range(100):
        p = random_valid_point(rng, P, y_lo=1e-6)
        c = classify(p, P)
        fd = classify_jacobian(fd_jacobian("return_map", p, P))
        band = 1e-3 * max(1.0, abs(c.trace))
        if abs(abs(c.trace) - 2) > band and fd.cls != c.cls:
            flips += 1
    ok = not bad_det and not bad_ell and flips == 0 and res.reports
    record(9, bool(ok), f"classification: {len(res.reports)} fixed points, det violations {len(bad_det)}, "
                        f"elliptic violations {len(bad_ell)}, oracle flips {flips}/100")


def test_ac10_elliptic_strip():
    phi = min(find_reversal_phases(P), key=lambda r: abs(r - 1.397))
    strips = elliptic_strip(phi, 1e-2, P)
    lo = strips[0][0] if strips else float("nan")
    record(10, bool(strips) and lo <= 1e-6, f"elliptic strip at phi0={phi:.6f}: {strips}")


def test_ac11_michelson_suite():
    t0 = time.perf_counter()
    box = ((-3.0, -3.0, -3.0), (3.0, 3.0, 3.0))
    div = divergence_max(michelson(C_K), box, 1000)
    eq_err = 0.0
    for c in (1.0, C_K):
        reports, _ = equilibria_with_spectrum(michelson(c), [(1.2 * c, 0.1, 0.0), (-1.2 * c, 0.0, 0.1)])
        xs = sorted(reports, key=lambda r: r.location[0])
        want = [(-math.sqrt(2) * c, 0, 0), (math.sqrt(2) * c, 0, 0)]
        eq_err = max([eq_err] + [float(np.max(np.abs(np.array(r.location) - w))) for r, w in zip(xs, want)])
        if len(reports) != 2:
            eq_err = math.inf
    reports, _ = equilibria_with_spectrum(michelson(C_K), [(1.2, 0.0, 0.0)])
    plus = reports[0]
    resid = max(abs(lam ** 3 + lam + math.sqrt(2) * C_K) for lam in plus.eigenvalues)
    res_rel = abs(plus.saddle_params_estimate.resonance_residual)
    fwd = integrate(michelson(1.0), (0, 0.1, 0), 5)
    back = integrate(michelson(1.0), fwd.final, -5)
    closure = float(np.linalg.norm(back.final - [0, 0.1, 0]))
    dt = time.perf_counter() - t0
    ok = div <= 1e-9 and eq_err <= 1e-10 and resid <= 1e-10 and res_rel <= 1e-9 and closure <= 1e-6 and dt < 10.0
    record(11, ok, f"Michelson: divergence {div:.1e}, equilibria {eq_err:.1e}, cubic residual {resid:.1e}, "
                   f"C2=2E2 residual {res_rel:.1e}, closure {closure:.1e}, {dt:.2f}s")


def test_ac12_discrepancy_report():
    rep = formula_discrepancy_report(P)
    d = rep["dxds"]["derived_vs_fd"]
    rc = rep["reversal_condition"]
    minus = rc["A_printed_eq_minus_rhs"]
    ok = (d["verdict"] == "matches" and d["max_rel_dev"] <= 1e-5 and minus["roots"] == []
          and minus["verdict"] in ("sign-off", "mismatch") and len(rc["oracle_phases"]) > 0)
    record(12, ok, f"discrepancy report: derived dxds {d['verdict']} (rel {d['max_rel_dev']:.1e}); "
                   f"A_printed=-rhs roots {minus['roots']} verdict {minus['verdict']}; "
                   f"oracle phases {[round(x, 4) for x in rc['oracle_phases']]}")


def _cli_outputs(tmp, tag, jobs, cfg):
    out = os.path.join(tmp, tag)
    for cmd in ("region-report", "fixed-points", "horseshoe", "reversals", "timedelay"):
        code = cli_run([cmd, "--config", cfg, "--out", out, "--seed", "17", "--jobs", str(jobs)])
        assert code == 0, cmd
    files = {}
    for name in sorted(os.listdir(out)):
        if name.endswith((".csv", ".json")):
            with open(os.path.join(out, name), "rb") as fh:
                files[name] = fh.read()
    return files


def test_ac13_reproducibility(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "params": params_to_config(P),
        "region": {"samples": 16, "grid": 2000},
        "fixed_points": {"grid": 10},
        "horseshoe": {"samples": 200},
        "timedelay": {"p0": [-1.3, 0, 0], "p1": [-1.1, 0, 0], "N": 9, "t_max": 30},
    }))
    a = _cli_outputs(str(tmp_path), "j1", 1, str(cfg))
    b = _cli_outputs(str(tmp_path), "j8", 8, str(cfg))
    c = _cli_outputs(str(tmp_path), "j1-again", 1, str(cfg))
    same = a == b == c and len(a) >= 9
    differing = sorted(k for k in a if a.get(k) != b.get(k) or a.get(k) != c.get(k))
    record(13, same, f"reproducibility: {len(a)} CSV/JSON files byte-identical across reruns and --jobs 1/8; "
                     f"differing: {differing or 'none'}")

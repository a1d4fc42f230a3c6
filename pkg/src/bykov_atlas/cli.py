"""Command-line front end: ``bykov-atlas <command> --config cfg.json --out DIR``.

Exit codes: 0 success, 1 usage error or unreadable config, 2 domain/validation
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import (
    BykovError,
    DomainEscape,
    EmptyDataset,
    NoReversals,
    ValidationError,
)
from .maps import iterated_segment_trace, stable_spiral, unstable_spiral
from .model import (
    REFERENCE_PARAMS,
    ModelParams,
    gamma_rationality,
    in_region_B,
    params_from_config,
    params_to_config,
    region_consistency_report,
)
from .output import Provenance, write_csv, write_json, write_svg
from .parallel import resolve_jobs

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3
FORMATS = ("csv", "json", "svg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(message)


# ---------------------------------------------------------------------------
# context shared by the commands

class Run:
    def __init__(self, args, config: dict):
        self.args = args
        self.config = config
        self.out = args.out
        self.seed = args.seed
        self.jobs = resolve_jobs(args.jobs)
        self.formats = set(args.format)
        if "params" in config:
            self.params: ModelParams = params_from_config(config["params"])
        elif "alpha1" in config:
            self.params = params_from_config(config)
        else:
            self.params = REFERENCE_PARAMS

    def block(self, name: str) -> dict:
        b = self.config.get(name, {})
        if not isinstance(b, Mapping):
            raise ValidationError(f"config block {name!r} must be an object")
        return dict(b)

    def prov(self, **extra) -> Provenance:
        return Provenance.of({"command": self.args.command, "config": self.config,
                              "options": self.options()}, self.seed, command=self.args.command, **extra)

    def options(self) -> dict:
        keep = {}
        for k in ("nmax",):
            v = getattr(self.args, k, None)
            if v is not None:
                keep[k] = v
        return keep

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def csv(self, name, columns, rows, **extra):
        if "csv" in self.formats:
            write_csv(self.path(name), columns, rows, self.prov(**extra))

    def json(self, name, payload, **extra):
        if "json" in self.formats:
            write_json(self.path(name), payload, self.prov(**extra))

    def svg(self, name, dataset, kind, title=""):
        if "svg" in self.formats:
            write_svg(self.path(name), dataset, kind, title=title, prov=self.prov())


def _f(v) -> float:
    return float(v)


# ---------------------------------------------------------------------------
# commands

def cmd_params_check(run: Run) -> None:
    p = run.params
    b = in_region_B(p)
    rat = gamma_rationality(p)
    print(f"g1={p.g1!r} g2={p.g2!r} gamma={p.gamma!r}")
    print(f"region B: lower={b.lower!r} middle={b.middle!r} upper={b.upper!r} inside={b.inside}")
    print(f"gamma rationality ({rat.method}): {rat.verdict} p/q={rat.p}/{rat.q} error={rat.error!r}")
    run.json("params_check.json", {
        "params": params_to_config(p),
        "derived": {"g1": p.g1, "g2": p.g2, "gamma": p.gamma},
        "region_B": {"lower": b.lower, "middle": b.middle, "upper": b.upper, "inside": b.inside},
        "gamma_rationality": {"verdict": rat.verdict, "p": rat.p, "q": rat.q, "error": rat.error,
                              "max_denominator": rat.max_denominator, "tol": rat.tol, "method": rat.method},
    })


def _segment_grid(blk: dict) -> tuple[float, np.ndarray]:
    x0 = _f(blk.get("x0", 0.0))
    s_min = _f(blk.get("s_min", math.exp(-6 * math.pi)))
    s_max = _f(blk.get("s_max", 1.0))
    n = int(blk.get("n", 2000))
    if not 0 < s_min < s_max <= 1 or n < 2:
        raise ValidationError("segment needs 0 < s_min < s_max <= 1 and n >= 2")
    return x0, np.exp(np.linspace(math.log(s_max), math.log(s_min), n))


def cmd_segment_trace(run: Run) -> None:
    blk = run.block("segment")
    x0, grid = _segment_grid(blk)
    k = int(blk.get("k", 1))
    traces = iterated_segment_trace(x0, grid, k, run.params)
    from .maps import CurveTrace

    for j, tr in enumerate(traces, start=1):
        name = "segment_trace.csv" if j == 1 else f"segment_trace_k{j}.csv"
        run.csv(name, CurveTrace.CSV_COLUMNS, tr.rows(), iterate=j)
    tr = traces[0]
    y = np.where(tr.valid, tr.y, np.nan)
    x = np.where(tr.valid, tr.x, np.nan)
    run.svg("segment_y2.svg", {"x": tr.s, "y": y, "log_x": True, "xlabel": "s", "ylabel": "y2"}, "curve", "height along the image")
    run.svg("segment_x2.svg", {"x": tr.s, "y": x, "log_x": True, "xlabel": "s", "ylabel": "x2 (lift)"}, "curve", "angle along the image")
    run.json("segment_trace.json", {"iterates": len(traces), "samples": [len(t.samples) for t in traces],
                                    "valid": [int(np.sum(t.valid)) for t in traces]})
    print(f"{len(traces)} iterate(s); samples per iterate: {[len(t.samples) for t in traces]}")


def cmd_reversals(run: Run) -> None:
    from .reversals import ReversalEvent, find_reversal_phases, progression_check, reversal_sequence

    blk = run.block("reversals")
    n_max = run.args.nmax if run.args.nmax is not None else int(blk.get("n_max", 20))
    x0 = _f(blk.get("x0", 0.0))
    phases = find_reversal_phases(run.params)
    rows, fits, ladder_n, ladder_x = [], [], [], []
    for fam, ph in enumerate(phases):
        ev = reversal_sequence(ph, n_max, run.params, x0=x0, log_space=True, family=fam)
        for e in ev:
            rows.append({**e.row(), "family": fam})
            ladder_n.append(e.n)
            ladder_x.append(e.x_lift)
        if len(ev) >= 3:
            f = progression_check(ev, run.params.gamma)
            fits.append({"family": fam, "phi0": ph, "slope_fit": f.slope_fit, "expected_slope": f.expected_slope,
                         "intercept": f.intercept, "max_abs_residual": f.max_abs_residual})
    run.csv("reversals.csv", ReversalEvent.CSV_COLUMNS + ("family",), rows)
    run.json("reversals.json", {"phases": phases, "n_max": n_max, "progression": fits})
    if rows:
        run.svg("reversal_ladder.svg", {"x": ladder_n, "y": ladder_x, "xlabel": "n", "ylabel": "x2(s_n)"}, "ladder",
                "reversal ladder")
    print(f"{len(phases)} phase famil{'y' if len(phases) == 1 else 'ies'}, {len(rows)} reversal events")


def _candidate_rows(cands):
    return [c.row() for c in cands]


def cmd_tangency(run: Run) -> None:
    from .reversals import TangencyCandidate, tangency_search

    blk = run.block("tangency")
    cands = tangency_search(_f(blk.get("stable_line_x", 0.0)), blk.get("phi0"), int(blk.get("n_max", 1000)),
                            _f(blk.get("tol_angle", 0.05)), run.params, x0=_f(blk.get("x0", 0.0)))
    run.csv("candidates.csv", TangencyCandidate.CSV_COLUMNS, _candidate_rows(cands))
    run.json("tangency.json", {"count": len(cands),
                               "min_distance": cands[0].circular_distance if cands else None})
    print(f"{len(cands)} order-1 candidates")


def cmd_cascade(run: Run) -> None:
    from .reversals import TangencyCandidate, cascade_scan

    blk = run.block("cascade")
    x0, grid = _segment_grid(blk)
    res = cascade_scan(int(blk.get("k_max", 2)), _f(blk.get("stable_line_x", 0.0)), _f(blk.get("tol_angle", math.pi)),
                       run.params, x0=x0, s_grid=grid)
    rows = [r for k in sorted(res) for r in _candidate_rows(res[k])]
    run.csv("candidates.csv", TangencyCandidate.CSV_COLUMNS, rows)
    run.json("cascade.json", {"per_order": {str(k): len(v) for k, v in sorted(res.items())},
                              "parent_arclen": {str(k): [c.parent_arclen for c in v] for k, v in sorted(res.items())}})
    print("candidates per order: " + ", ".join(f"k={k}: {len(v)}" for k, v in sorted(res.items())))


def cmd_spirals(run: Run) -> None:
    from .maps import DiskCurve
    from .reversals import spiral_intersections

    blk = run.block("spirals")
    lo = _f(blk.get("s_min", math.exp(-6 * math.pi)))
    hi = _f(blk.get("s_max", 1.0))
    x_s = _f(blk.get("x_s", 0.0))
    x0 = _f(blk.get("x0", 0.0))
    hits = spiral_intersections((x_s, lo, hi), (x0, lo, hi), run.params)
    cols = ("r", "phi", "angle_between", "s_stable", "s_unstable", "tangential", "overlap")
    run.csv("spirals.csv", cols, [h.row() for h in hits])
    grid = np.exp(np.linspace(math.log(hi), math.log(lo), int(blk.get("n", 2000))))
    s1 = stable_spiral(x_s, grid, run.params)
    s2 = unstable_spiral(x0, grid, run.params)
    run.csv("stable_spiral.csv", DiskCurve.CSV_COLUMNS, s1.rows())
    run.csv("unstable_spiral.csv", DiskCurve.CSV_COLUMNS, s2.rows())
    u1, v1 = s1.cartesian().T
    run.svg("stable_spiral.svg", {"x": u1, "y": v1, "xlabel": "u", "ylabel": "v"}, "curve", "pulled-back stable segment")
    u2, v2 = s2.cartesian().T
    run.svg("unstable_spiral.svg", {"x": u2, "y": v2, "xlabel": "u", "ylabel": "v"}, "curve", "pushed unstable segment")
    run.json("spirals.json", {"intersections": len(hits), "tangential": sum(h.tangential for h in hits)})
    print(f"{len(hits)} intersections ({sum(h.tangential for h in hits)} tangential)")


def cmd_fixed_points(run: Run) -> None:
    from .spectra import FixedPointReport, find_fixed_points

    blk = run.block("fixed_points")
    xr = tuple(blk.get("x_range", (-1.0, 0.0)))
    yr = tuple(blk.get("y_range", (1e-6, 1e-2)))
    res = find_fixed_points((xr, yr), int(blk.get("grid", 20)), _f(blk.get("tol", 1e-10)), run.params, jobs=run.jobs)
    run.csv("fixed_points.csv", FixedPointReport.CSV_COLUMNS, [r.row() for r in res.reports])
    run.json("fixed_points.json", {"seeds": res.seeds, "dropped": res.dropped, "found": len(res.reports),
                                   "classes": {c: sum(r.cls == c for r in res.reports)
                                               for c in ("elliptic", "hyperbolic", "parabolic-within-tol")}})
    print(f"{len(res.reports)} fixed points from {res.seeds} seeds ({res.dropped} dropped)")


def cmd_elliptic_strip(run: Run) -> None:
    from .reversals import find_reversal_phases
    from .spectra import elliptic_strip

    blk = run.block("elliptic_strip")
    phases = [blk["phi0"]] if "phi0" in blk else find_reversal_phases(run.params)
    if not phases:
        raise NoReversals()
    y_max = _f(blk.get("y_max", 1e-2))
    y_min = _f(blk.get("y_min", 1e-8))
    out = []
    rows = []
    for ph in phases:
        iv = elliptic_strip(_f(ph), y_max, run.params, y_min=y_min)
        out.append({"phi0": _f(ph), "intervals": [list(t) for t in iv]})
        rows.extend({"phi0": _f(ph), "y_lo": a, "y_hi": b} for a, b in iv)
    run.csv("elliptic_strip.csv", ("phi0", "y_lo", "y_hi"), rows)
    run.json("elliptic_strip.json", {"y_min": y_min, "y_max": y_max, "fibers": out})
    print(f"{len(rows)} elliptic interval(s) over {len(phases)} fiber(s)")


def cmd_horseshoe(run: Run) -> None:
    from .spectra import HorseshoeResult, StripSpec, horseshoe_crossing

    blk = run.block("horseshoe")
    strip = StripSpec.make(int(blk.get("k", 0)), tuple(blk.get("x_range", (-1e-3, 0.0))), run.params,
                           y_ref=_f(blk.get("y_ref", 1e-4)))
    res = horseshoe_crossing(strip, run.params, samples=int(blk.get("samples", 1000)),
                             iterates=int(blk.get("iterates", 1)), jobs=run.jobs)
    run.csv("strip_evidence.csv", HorseshoeResult.CSV_COLUMNS, res.evidence, label=res.label)
    run.json("horseshoe.json", {"label": res.label, "crossing": res.crossing, "reason": res.reason,
                                "expansion_estimate": res.expansion_estimate,
                                "strip": {"k": strip.k, "x_range": list(strip.x_range), "y_range": list(strip.y_range)}})
    print(f"{res.label}: crossing={res.crossing} ({res.reason}), expansion~{res.expansion_estimate:.3g}")


def cmd_timedelay(run: Run) -> None:
    from .ode import C_K, TimeDelaySample, equilibria_with_spectrum, michelson, time_delay_scan

    blk = run.block("timedelay")
    if blk.get("field", "michelson") != "michelson":
        raise ValidationError("only the 'michelson' field is available from the command line")
    c = _f(blk.get("c", C_K))
    fld = michelson(c)
    r = _f(blk.get("r", 4.0))
    t_max = _f(blk.get("t_max", 100.0))
    p0 = [_f(v) for v in blk.get("p0", (-2.0, 0.0, 0.0))]
    p1 = [_f(v) for v in blk.get("p1", (2.0, 0.0, 0.0))]
    N = int(blk.get("N", 101))
    rel_tol = _f(blk.get("rel_tol", 1e-10))
    abs_tol = _f(blk.get("abs_tol", 1e-12))
    prof = time_delay_scan(fld, (p0, p1, N), r, t_max, jobs=run.jobs, rel_tol=rel_tol, abs_tol=abs_tol,
                           spike_factor=_f(blk.get("spike_factor", 2.0)))
    hdr = dict(field="michelson", c=c, r=r, t_max=t_max, rel_tol=rel_tol, abs_tol=abs_tol)
    run.csv("timedelay.csv", TimeDelaySample.CSV_COLUMNS, [s.row(i) for i, s in enumerate(prof.samples)], **hdr)
    eq, fails = equilibria_with_spectrum(fld, [[math.sqrt(2) * c, 0, 0], [-math.sqrt(2) * c, 0, 0]])
    run.json("equilibria.json", {"equilibria": [e.to_json() for e in eq], "failed_seeds": [list(f.seed) for f in fails]},
             **hdr)
    run.json("timedelay.json", {"spikes": prof.spikes, "values": prof.values.tolist()}, **hdr)
    run.svg("timedelay.svg", {"x": np.arange(N), "y": prof.values, "marks": prof.spikes,
                              "xlabel": "sample", "ylabel": "T+ + T-"}, "profile", "time-delay profile")
    print(f"{N} samples, {len(prof.spikes)} spike(s) at {prof.spikes}")


def cmd_discrepancy_report(run: Run) -> None:
    from .reversals import formula_discrepancy_report

    rep = formula_discrepancy_report(run.params, seed=run.seed)
    run.json("discrepancy_report.json", rep)
    rc = rep["reversal_condition"]
    print(f"dxds derived vs fd: {rep['dxds']['derived_vs_fd']['verdict']}; printed: "
          f"{rep['dxds']['printed_vs_fd']['verdict']}; A_printed=-rhs: {rc['A_printed_eq_minus_rhs']['verdict']}; "
          f"trace (printed A): {rep['trace']['printed_with_A_printed']['verdict']}")


def cmd_region_report(run: Run) -> None:
    from .model import RegionReport

    blk = run.block("region")
    rep = region_consistency_report(int(blk.get("samples", 100)), run.seed, jobs=run.jobs,
                                    grid=int(blk.get("grid", 10_000)))
    run.csv("region_report.csv", RegionReport.CSV_COLUMNS, rep.rows)
    run.json("region_report.json", {"samples": len(rep.rows), "agreement_rate": rep.agreement_rate, "rows": rep.rows})
    print(f"{len(rep.rows)} draws, agreement rate {rep.agreement_rate:.4f}")


COMMANDS = {
    "params-check": cmd_params_check,
    "segment-trace": cmd_segment_trace,
    "reversals": cmd_reversals,
    "tangency": cmd_tangency,
    "cascade": cmd_cascade,
    "spirals": cmd_spirals,
    "fixed-points": cmd_fixed_points,
    "elliptic-strip": cmd_elliptic_strip,
    "horseshoe": cmd_horseshoe,
    "timedelay": cmd_timedelay,
    "discrepancy-report": cmd_discrepancy_report,
    "region-report": cmd_region_report,
}


def _formats(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"formats must be a subset of {','.join(FORMATS)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config (defaults to the reference parameters)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", type=_formats, default=["csv", "json"], help="comma list of csv,json,svg")
    common.add_argument("--jobs", type=int, default=None, help="worker threads (env BYKOV_ATLAS_JOBS)")
    parser = _Parser(prog="bykov-atlas", description="Section maps, reversals and spectra near a conservative heteroclinic cycle.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "reversals":
            sp.add_argument("--nmax", type=int, default=None, help="events per phase family")
    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {"params": params_to_config(REFERENCE_PARAMS)}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        config = _load_config(args.config)
    except UsageError as exc:
        print(f"bykov-atlas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        ctx = Run(args, config)
        COMMANDS[args.command](ctx)
    except (ValidationError, DomainEscape, NoReversals, EmptyDataset, ValueError, TypeError, KeyError) as exc:
        print(f"bykov-atlas: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (BykovError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"bykov-atlas: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

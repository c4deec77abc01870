"""Command-line front end.

Usage::

    kahlerpinch curvature --config run.json --out results/
    kahlerpinch compare   --config run.json --out results/ [--audit]
    kahlerpinch pinch     --config run.json --out results/ [--seed 3]
    kahlerpinch verify    --suite chern-lu --out results/
    kahlerpinch squeeze   --config run.json --out results/

Exit codes: 0 all checks pass, 2 configuration or precondition error,
3 mathematical hypothesis not met, 4 inequality violation.  Outputs are
written only after the computation finished; JSON payloads are
deterministic, wall-clock time goes to ``timing.json``.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from . import zoo
from .combiner import (CombinerError, PinchConfig, pinch_combine, spherical_comparison,
                       verify_inequality_4, verify_wu_theorem)
from .config import ConfigError, RunConfig, complex_pairs, dump_json, load_config
from .curvature import (CurvatureError, OptimizerConfig, chern_lu_residual, constant_map, hbc_bounds_on_set,
                        identity_map, rescaled, ricci, schwarz_yau_check, slice_map)
from .domains import (Ball, DomainError, boundary_distance, contains, decode_complex_vector, sample_global,
                      squeezing_lower_bound)
from .jets import JetError

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_VIOLATION = 0, 2, 3, 4
SUITES = ("wu-hsc", "chern-lu", "ineq4", "schwarz-yau")


class Outcome:
    """Files to write plus the exit code of one command."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.files: dict[str, str] = {}
        self.results: dict = {}
        self.warnings: list[str] = []
        self.code = EXIT_OK
        self.lines: list[str] = []

    def report(self) -> dict:
        return {"command": self.command, "config": self.cfg.echo(), "results": self.results,
                "warnings": self.warnings, "exit_code": self.code}


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _need_domain(cfg: RunConfig):
    if cfg.domain is None:
        raise ConfigError("config needs a 'domain'")
    return cfg.domain


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_curvature(cfg: RunConfig, args) -> Outcome:
    out = Outcome("curvature", cfg)
    dom = _need_domain(cfg)
    g = cfg.metric(cfg.raw.get("metric", "g"))
    samples = cfg.region.sample(dom, cfg.seed)
    rep = hbc_bounds_on_set(g, samples, cfg.optimizer)
    out.results = rep.to_dict()
    bad = rep.optimizer_stats()["nonconverged_points"]
    if bad:
        out.warnings.append(f"optimizer did not converge at {bad} of {len(rep.per_point)} points")
    out.files["curvature.json"] = dump_json(out.report())
    out.files["curvature.csv"] = rep.to_csv()
    out.lines.append(f"HBC range [{rep.hbc_inf:.10g}, {rep.hbc_sup:.10g}] on {rep.region} "
                     f"({len(rep.per_point)} points)")
    if rep.hsc_inf is not None:
        out.lines.append(f"HSC range [{rep.hsc_inf:.10g}, {rep.hsc_sup:.10g}]")
    return out


def cmd_compare(cfg: RunConfig, args) -> Outcome:
    out = Outcome("compare", cfg)
    dom = _need_domain(cfg)
    h, g = cfg.metric("h"), cfg.metric("g")
    samples = cfg.region.sample(dom, cfg.seed)
    rep = spherical_comparison(h, g, samples, audit_points=5 if args.audit else 0)
    out.results = rep.to_dict()
    inv = rep.invariant_defects()
    if inv["max_sum_minus_one"] > 1e-12 or not inv["in_open_unit_interval"]:
        out.code = EXIT_VIOLATION
        out.warnings.append("pointwise comparison invariant violated")
    if rep.audit:
        dev = max(abs(a["deviation"]) for a in rep.audit)
        below = min(a["deviation"] for a in rep.audit)
        out.results["audit_max_deviation"] = dev
        if dev > 1e-3 or below < -1e-12:
            out.code = EXIT_VIOLATION
            out.warnings.append(f"brute-force audit deviation {dev:.3g}")
    out.files["compare.json"] = dump_json(out.report())
    out.files["compare.csv"] = rep.to_csv()
    out.lines.append(f"C(h,g) = {rep.C_hg:.10g}, C(g,h) = {rep.C_gh:.10g} over {rep.region}")
    return out


def cmd_pinch(cfg: RunConfig, args) -> Outcome:
    out = Outcome("pinch", cfg)
    dom = _need_domain(cfg)
    g = cfg.metric(cfg.raw.get("metric", "g"))
    p = cfg.raw.get("pinch", {})
    try:
        pc = PinchConfig(delta=float(p.get("delta", 0.5)), collar=tuple(p.get("collar", (0.05, 0.5))),
                         R=float(p.get("R", cfg.raw.get("R", 2.0))), density=int(p.get("density", 64)),
                         seed=cfg.seed, tol_curv=cfg.tol_curv, refine=bool(p.get("refine", True)),
                         max_evals=int(p.get("max_evals", 300)),
                         R_sweep=tuple(float(r) for r in p.get("R_sweep", ())),
                         optimizer=OptimizerConfig(**{**cfg.raw.get("optimizer", {}), "with_hsc": False,
                                                      "seed": cfg.seed}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid pinch section: {exc}") from exc
    _, cert = pinch_combine(g, dom, pc)
    out.results = cert.to_dict()
    out.files["certificate.json"] = cert.to_json()
    combined = cert.combined
    rows = [[k, repr(float(v["value"])), v["region"], "" if v["seed"] is None else v["seed"],
             "curvature" if k.startswith(("A0", "B", "C1")) else "metric factor"]
            for k, v in sorted(cert.constants.items())]
    out.files["constants.csv"] = _csv(["constant", "value", "region", "seed", "units"], rows)
    out.code = {"pass": EXIT_OK, "hypothesis_not_met": EXIT_HYPOTHESIS}.get(cert.status, EXIT_VIOLATION)
    out.warnings += cert.reasons
    c = cert.constants
    out.lines.append(f"verdict {cert.status}")
    for k in ("A0", "C0", "C1"):
        if k in c:
            out.lines.append(f"{k} = {c[k]['value']:.10g}")
    if cert.R_sensitivity:
        out.lines.append("C0 over R (sampled): " + ", ".join(
            f"R={r['R']:g}: " + ("n/a" if r["C0"] is None else f"{r['C0']:.6g}") for r in cert.R_sensitivity))
    if combined:
        out.lines.append(f"combined HBC range [{combined['hbc_inf']:.10g}, {combined['hbc_sup']:.10g}]")
    return out


def _suite_wu(cfg: RunConfig) -> dict:
    s = cfg.raw.get("wu", {})
    disc = Ball(np.zeros(1), 1.0)
    h = cfg.metrics.get("h", zoo.ball_bergman(1.0, 1))
    g = cfg.metrics.get("g", zoo.scale(0.5, zoo.ball_bergman(1.0, 1)))
    dom = cfg.domain or disc
    samples = sample_global(dom, int(s.get("density", 200)), cfg.seed)
    res = verify_wu_theorem(h, g, float(s.get("K1", 4.0)), float(s.get("K2", 2.0)), samples, cfg.tol_curv,
                            cfg.optimizer)
    return {"checks": [{"name": "wu-hsc", **res}]}


def _suite_chern_lu(cfg: RunConfig) -> dict:
    fixtures = [("disc identity", identity_map(1), zoo.ball_bergman(1.0, 1)),
                ("disc slice into ball", slice_map(2), zoo.ball_bergman(1.0, 2)),
                ("rescaled slice", rescaled(slice_map(2), 0.5), zoo.ball_bergman(1.0, 2))]
    checks = []
    for name, f, h in fixtures:
        r = chern_lu_residual(f, h)
        checks.append({"name": name, **r, "tol": 1e-4, "passed": r["residual"] <= 1e-4,
                       "cr_residual": f.cr_residual(np.zeros(1))})
    return {"checks": checks}


def _suite_ineq4(cfg: RunConfig) -> dict:
    s = cfg.raw.get("ineq4", {})
    dom = cfg.domain or Ball(np.zeros(2), 1.0)
    h = cfg.metrics.get("h", zoo.ball_bergman(1.0, dom.dim))
    g = cfg.metrics.get("g", zoo.quartic_potential(dom.dim))
    samples = sample_global(dom, int(s.get("points", 50)), cfg.seed)
    res = verify_inequality_4(h, g, samples, int(s.get("pairs", 50)), cfg.tol_curv,
                              swap_weights=bool(s.get("swap_weights", False)), seed=cfg.seed)
    res = {k: v for k, v in res.items() if k != "per_point"}
    name = "ineq4 (swapped weights)" if res["swap_weights"] else "ineq4"
    return {"checks": [{"name": name, **res}]}


def _suite_schwarz_yau(cfg: RunConfig) -> dict:
    disc = Ball(np.zeros(1), 1.0)
    samples = sample_global(disc, int(cfg.raw.get("schwarz_yau", {}).get("density", 64)), cfg.seed)
    g = zoo.ball_bergman(1.0, 1)
    # Ric(g) >= -C g with C = 2 for the disc; target B(0,2) has HBC <= -2/3
    C = -float(np.real(ricci(g, np.zeros(1))[0, 0] / g.metric(np.zeros(1))[0, 0]))
    checks = []
    h = zoo.ball_bergman(2.0, 2)
    r = schwarz_yau_check(slice_map(2), g, h, C, 2.0 / 3.0, samples)
    checks.append({"name": "disc into B(0,2)", **{k: v for k, v in r.items() if k != "per_point"}})
    hb = zoo.ball_bergman(1.0, 2)
    ball2 = sample_global(Ball(np.zeros(2), 1.0), 32, cfg.seed)
    r = schwarz_yau_check(identity_map(2), hb, hb, 2.0, 2.0 / 3.0, ball2)
    checks.append({"name": "ball identity", **{k: v for k, v in r.items() if k != "per_point"}})
    r = schwarz_yau_check(constant_map([0.1, 0.2], 1), g, hb, C, 2.0 / 3.0, samples)
    checks.append({"name": "constant map", **{k: v for k, v in r.items() if k != "per_point"}})
    # product metric on the bidisc has HBC sup 0, so the bound does not apply
    pd = zoo.polydisc_bergman([1.0, 1.0])
    r = schwarz_yau_check(slice_map(2), g, pd, C, 0.0, samples)
    checks.append({"name": "disc into bidisc (product metric)", **r})
    return {"checks": checks}


_SUITE_FN = {"wu-hsc": _suite_wu, "chern-lu": _suite_chern_lu, "ineq4": _suite_ineq4,
             "schwarz-yau": _suite_schwarz_yau}


def cmd_verify(cfg: RunConfig, args) -> Outcome:
    out = Outcome("verify", cfg)
    suite = args.suite or cfg.raw.get("suite")
    if suite is None:
        raise ConfigError("verify needs --suite or a 'suite' entry")
    names = SUITES if suite == "all" else (suite,)
    for s in names:
        if s not in _SUITE_FN:
            raise ConfigError(f"unknown suite {s!r}; choose from {', '.join(SUITES)} or all")
    rows = []
    for s in names:
        res = _SUITE_FN[s](cfg)
        out.results[s] = res
        for c in res["checks"]:
            status = "inapplicable" if c.get("passed") is None else ("pass" if c["passed"] else "fail")
            margin = c.get("min_margin", c.get("margin", -c["residual"] if "residual" in c else None))
            rows.append([s, c["name"], status, "" if margin is None else repr(float(margin)),
                         "curvature" if s != "schwarz-yau" else "metric ratio"])
            out.lines.append(f"{s}: {c['name']}: {status}" + ("" if margin is None else f" (margin {margin:.3g})"))
            if c.get("passed") is False:
                out.code = EXIT_VIOLATION
    out.files["verify.json"] = dump_json(out.report())
    out.files["margins.csv"] = _csv(["suite", "check", "status", "margin", "units"], rows)
    return out


def cmd_squeeze(cfg: RunConfig, args) -> Outcome:
    out = Outcome("squeeze", cfg)
    dom = _need_domain(cfg)
    s = cfg.raw.get("squeeze", {})
    pts = [decode_complex_vector(p) for p in s.get("points", [])]
    if not pts:
        pts = [dom.interior_point()]
    rows, table = [], []
    for i, z in enumerate(pts):
        r = squeezing_lower_bound(dom, z)
        table.append({"point": complex_pairs(z), **r})
        rows.append(["point", i, "", *_coords(z), repr(r["bound"]), repr(r["distance"]), repr(r["diameter"]),
                     r["diameter_kind"], repr(r["exact"]) if "exact" in r else "", "dimensionless"])
        note = " (exact value 1)" if "exact" in r else ""
        out.lines.append(f"z={_fmt(z)}: bound {r['bound']:.10g}{note}")
    rays = []
    for k, ray in enumerate(s.get("rays", [])):
        start = decode_complex_vector(ray.get("start", [0.0] * dom.dim))
        direction = decode_complex_vector(ray["direction"])
        steps = int(ray.get("steps", 20))
        direction = direction / np.linalg.norm(direction)
        ts, bounds = [], []
        t_hi = _exit_time(dom, start, direction)
        # geometric approach to the exit point so the bound visibly tends to 0
        for j in range(steps):
            t = t_hi * (1.0 - 0.5 ** j)
            z = start + t * direction
            r = squeezing_lower_bound(dom, z)
            ts.append(t)
            bounds.append(r["bound"])
            rows.append(["ray", k, repr(t), *_coords(z), repr(r["bound"]), repr(r["distance"]),
                         repr(r["diameter"]), r["diameter_kind"], "", "dimensionless"])
        mono = all(b2 <= b1 + 1e-15 for b1, b2 in zip(bounds, bounds[1:]))
        rays.append({"ray": k, "exit_time": t_hi, "t": ts, "bound": bounds, "monotone_nonincreasing": mono,
                     "last_bound": bounds[-1], "distance_to_boundary_at_start": boundary_distance(dom, start)})
        out.lines.append(f"ray {k}: bound {bounds[0]:.4g} -> {bounds[-1]:.4g}, monotone {mono}")
    out.results = {"points": table, "rays": rays}
    n = dom.dim
    coord_cols = [f"{p}(z{k + 1})" for k in range(n) for p in ("re", "im")]
    out.files["squeeze.json"] = dump_json(out.report())
    out.files["squeeze.csv"] = _csv(["kind", "index", "t", *coord_cols, "bound", "distance", "diameter",
                                     "diameter_kind", "exact", "units"], rows)
    return out


def _coords(z):
    return [repr(float(v)) for c in z for v in (c.real, c.imag)]


def _fmt(z):
    return "(" + ", ".join(f"{c.real:g}{c.imag:+g}i" for c in z) + ")"


def _exit_time(dom, start, direction) -> float:
    """Largest ``t`` with ``start + t * direction`` inside, by doubling and bisection."""
    lo, hi = 0.0, 1.0
    while contains(dom, start + hi * direction):
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if contains(dom, start + mid * direction):
            lo = mid
        else:
            hi = mid
    return lo


COMMANDS = {"curvature": cmd_curvature, "compare": cmd_compare, "pinch": cmd_pinch, "verify": cmd_verify,
            "squeeze": cmd_squeeze}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kahlerpinch", description="Curvature pinching of Hermitian metrics on "
                                "bounded domains: sweeps, comparisons and certificates.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--audit", action="store_true", help="add brute-force oracle columns")
    p.add_argument("--suite", help="verification suite: " + ", ".join(SUITES) + " or all")
    return p


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.config is None and args.command != "verify":
            raise ConfigError(f"{args.command} needs --config")
        cfg = load_config(args.config, args.seed)
        out = COMMANDS[args.command](cfg, args)
    except (ConfigError, CombinerError, CurvatureError, DomainError, JetError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(out.files.items()):
        (outdir / name).write_text(text, encoding="utf-8")
    (outdir / "timing.json").write_text(dump_json({"command": args.command,
                                                   "wall_seconds": time.perf_counter() - t0}), encoding="utf-8")
    for line in out.lines:
        print(line, file=stdout)
    for w in out.warnings:
        print(f"warning: {w}", file=stdout)
    return out.code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

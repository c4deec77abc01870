"""Combining two metrics: spherical comparison, Wu-type bounds and the pinching pipeline.

All infima and suprema over the sphere bundle of a noncompact domain are
replaced by values over finite sample sets (optionally sharpened by a local
search inside the sampled region); reports say which region produced each
number.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import zoo
from .curvature import (CurvatureBoundsReport, OptimizerConfig, curvature_tensor, hbc_bounds_on_set,
                        hsc_extrema_tensor, refine_extremum)
from .domains import (Domain, SampleSet, from_real, region_projector, sample_collar, sample_compact,
                      sphere_directions)
from .jets import MetricField

SCHEMA = "pinch-cert/1"


class CombinerError(ValueError):
    pass


class PreconditionError(CombinerError):
    """Inputs violate a precondition of the pipeline (bad radius, wrong dimensions)."""


# ---------------------------------------------------------------------------
# spherical comparison
# ---------------------------------------------------------------------------


def _pencil(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    try:
        return sla.eigh(A, B, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise CombinerError("pencil solve failed (reference form not positive definite)") from exc


def spherical_comparison_at(h: MetricField, g: MetricField, z) -> float:
    """``min |X|_h^2`` over ``|X|_{h+g} = 1``: the least eigenvalue of ``h v = lam (h+g) v``."""
    H, G = h.metric(z), g.metric(z)
    return float(_pencil(H, H + G)[0])


def pencil_max(g: MetricField, h: MetricField, z) -> float:
    """``max |X|_g^2`` over ``|X|_h = 1``."""
    return float(_pencil(g.metric(z), h.metric(z))[-1])


def brute_force_comparison(h: MetricField, g: MetricField, z, count: int = 10_000, seed: int = 0) -> float:
    """Minimum of ``|X|_h^2`` over ``count`` quasi-random ``(h+g)``-unit directions."""
    H, G = h.metric(z), g.metric(z)
    X = from_real(sphere_directions(count, 2 * len(H), seed=seed))
    nh = np.real(np.einsum("ij,mi,mj->m", H, X, X.conj()))
    ng = np.real(np.einsum("ij,mi,mj->m", G, X, X.conj()))
    return float(np.min(nh / (nh + ng)))


@dataclass
class ComparisonReport:
    h_name: str
    g_name: str
    region: str
    seed: int
    per_point_hg: np.ndarray
    per_point_gh: np.ndarray
    points: np.ndarray
    tol: float = 1e-12
    audit: list = field(default_factory=list)
    refined: dict = field(default_factory=dict)

    @property
    def C_hg(self) -> float:
        return float(min(np.min(self.per_point_hg), self.refined.get("C_hg", math.inf)))

    @property
    def C_gh(self) -> float:
        return float(min(np.min(self.per_point_gh), self.refined.get("C_gh", math.inf)))

    def invariant_defects(self) -> dict:
        s = self.per_point_hg + self.per_point_gh
        return {"max_sum_minus_one": float(np.max(s) - 1.0),
                "in_open_unit_interval": bool(np.all((self.per_point_hg > 0) & (self.per_point_hg < 1)
                                                     & (self.per_point_gh > 0) & (self.per_point_gh < 1)))}

    def to_dict(self) -> dict:
        return {"h": self.h_name, "g": self.g_name, "region": self.region, "seed": self.seed,
                "C_hg": self.C_hg, "C_gh": self.C_gh, "tol": self.tol,
                "per_point": [{"index": i, "C_hg": float(a), "C_gh": float(b)}
                              for i, (a, b) in enumerate(zip(self.per_point_hg, self.per_point_gh))],
                "invariants": self.invariant_defects(), "audit": self.audit, "refined": self.refined}

    def to_csv(self) -> str:
        n = self.points.shape[1]
        audit = {a["index"]: a for a in self.audit}
        cols = ["index"] + [f"{p}(z{k + 1})" for k in range(n) for p in ("re", "im")]
        cols += ["C_hg", "C_gh", "sum"]
        if self.audit:
            cols += ["brute_force_C_hg", "deviation"]
        lines = [",".join(cols + ["units"])]
        for i, z in enumerate(self.points):
            row = [str(i)] + [repr(float(v)) for c in z for v in (c.real, c.imag)]
            a, b = float(self.per_point_hg[i]), float(self.per_point_gh[i])
            row += [repr(a), repr(b), repr(a + b)]
            if self.audit:
                row += ([repr(audit[i]["brute_force"]), repr(audit[i]["deviation"])] if i in audit else ["", ""])
            lines.append(",".join(row + ["dimensionless ratio"]))
        return "\n".join(lines) + "\n"


def spherical_comparison(h: MetricField, g: MetricField, samples: SampleSet, audit_points: int = 0,
                         audit_directions: int = 10_000, project=None) -> ComparisonReport:
    """Pointwise comparisons ``C(h, g)`` and ``C(g, h)`` over a sample set.

    ``audit_points`` evenly spaced samples get a brute-force recomputation over
    quasi-random directions.  With a region projector the two infima are
    sharpened by a local search started at the worst samples.
    """
    if len(samples) == 0:
        raise CombinerError("empty sample set")
    hg, gh = [], []
    for z in samples.points:
        H, G = h.metric(z), g.metric(z)
        w = _pencil(H, H + G)
        hg.append(w[0])
        gh.append(float(_pencil(G, H + G)[0]))
    rep = ComparisonReport(h.name, g.name, samples.region, samples.seed, np.array(hg), np.array(gh),
                           samples.points)
    if audit_points:
        idx = np.unique(np.linspace(0, len(samples) - 1, min(audit_points, len(samples))).astype(int))
        for i in idx:
            bf = brute_force_comparison(h, g, samples.points[i], audit_directions, seed=samples.seed + int(i))
            rep.audit.append({"index": int(i), "pencil": float(hg[i]), "brute_force": bf,
                              "deviation": bf - float(hg[i])})
    if project is not None:
        for key, a, b, vals in (("C_hg", h, g, rep.per_point_hg), ("C_gh", g, h, rep.per_point_gh)):
            starts = samples.points[np.argsort(vals, kind="stable")[:2]]
            z, v = refine_extremum(lambda z, a=a, b=b: spherical_comparison_at(a, b, z), starts, project,
                                   maximize=False)
            rep.refined[key] = float(v)
            rep.refined[key + "_point"] = [[float(c.real), float(c.imag)] for c in z]
    return rep


# ---------------------------------------------------------------------------
# Wu-type bounds
# ---------------------------------------------------------------------------


def wu_hsc_bound(K1: float, K2: float) -> float:
    """``K1 K2 / (K1 + K2)``: the sum of metrics with HSC below ``-K1`` and ``-K2`` has HSC below minus this."""
    if not (K1 > 0 and K2 > 0):
        raise CombinerError("Wu bound needs positive curvature bounds")
    return K1 * K2 / (K1 + K2)


def wu_hbc_bound(B1: float, B2: float, C_gh: float, C_hg: float) -> float:
    """``C_gh^2 B1 + C_hg^2 B2`` (a zero comparison gives the degenerate bound 0)."""
    if not (B1 > 0 and B2 > 0):
        raise CombinerError("HBC bound needs positive B1, B2")
    for c in (C_gh, C_hg):
        if not 0 <= c < 1:
            raise CombinerError(f"comparison value {c} outside [0, 1)")
    return C_gh ** 2 * B1 + C_hg ** 2 * B2


def _unit_pairs(count: int, n: int, seed: int):
    d = sphere_directions(count, 4 * n, seed=seed)
    return from_real(d[:, :2 * n]), from_real(d[:, 2 * n:])


def verify_inequality_4(h: MetricField, g: MetricField, samples, pairs: int = 50, tol: float = 1e-6,
                        swap_weights: bool = False, seed: int = 0) -> dict:
    """Margin of the bisectional curvature inequality for ``h + g``.

    For ``(h+g)``-unit ``X, Y`` the margin is

        R_h(X,X,Y,Y) + R_g(X,X,Y,Y) - R_{h+g}(X,X,Y,Y),

    i.e. ``|X|_h^2 |Y|_h^2 HBC(h) + |X|_g^2 |Y|_g^2 HBC(g) - HBC(h+g)``.  With
    ``swap_weights`` the two weight products are exchanged, which gives a
    false statement and serves as a negative control.
    """
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=complex)
    s = zoo.metric_sum(h, g)
    X0, Y0 = _unit_pairs(pairs, h.dim, seed)
    worst, worst_at, per = math.inf, None, []
    for i, z in enumerate(pts):
        Th, Tg, Ts = curvature_tensor(h, z), curvature_tensor(g, z), curvature_tensor(s, z)
        S = Ts.h
        nX = np.sqrt(np.real(np.einsum("ij,mi,mj->m", S, X0, X0.conj())))
        nY = np.sqrt(np.real(np.einsum("ij,mi,mj->m", S, Y0, Y0.conj())))
        X, Y = X0 / nX[:, None], Y0 / nY[:, None]

        def quad(T):
            return np.real(np.einsum("ijkl,mi,mj,mk,ml->m", T.R, X, X.conj(), Y, Y.conj()))

        def norms(T):
            a = np.real(np.einsum("ij,mi,mj->m", T.h, X, X.conj()))
            b = np.real(np.einsum("ij,mi,mj->m", T.h, Y, Y.conj()))
            return a * b

        lhs = quad(Ts)
        rh, rg = quad(Th), quad(Tg)
        if swap_weights:
            wh, wg = norms(Th), norms(Tg)
            # HBC(h) weighted by the g-norms and vice versa
            rh, rg = rh / wh * wg, rg / wg * wh
        margin = rh + rg - lhs
        m = float(np.min(margin))
        per.append(m)
        if m < worst:
            worst, worst_at = m, (i, int(np.argmin(margin)))
    return {"h": h.name, "g": g.name, "swap_weights": swap_weights, "min_margin": worst,
            "worst": {"point_index": worst_at[0], "pair_index": worst_at[1]} if worst_at else None,
            "per_point": per, "tol": tol, "passed": worst >= -tol}


def verify_wu_theorem(h: MetricField, g: MetricField, K1: float, K2: float, samples, tol: float = 1e-6,
                      config: OptimizerConfig = OptimizerConfig()) -> dict:
    """Sampled check of ``sup HSC(h+g) <= -K1 K2/(K1+K2)`` given ``HSC(g) <= -K1``, ``HSC(h) <= -K2``."""
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=complex)
    if not (K1 > 0 and K2 > 0):
        return {"status": "inapplicable", "reason": "curvature bounds must be positive", "passed": None}
    sup_h = max(hsc_extrema_tensor(curvature_tensor(h, z), config).max for z in pts)
    sup_g = max(hsc_extrema_tensor(curvature_tensor(g, z), config).max for z in pts)
    base = {"K1": K1, "K2": K2, "sup_hsc_h": sup_h, "sup_hsc_g": sup_g, "tol": tol}
    if sup_h > -K2 + tol or sup_g > -K1 + tol:
        return {**base, "status": "inapplicable", "reason": "hypothesis fails on the samples", "passed": None}
    s = zoo.metric_sum(h, g)
    sup_s = max(hsc_extrema_tensor(curvature_tensor(s, z), config).max for z in pts)
    bound = wu_hsc_bound(K1, K2)
    margin = -bound - sup_s
    return {**base, "status": "checked", "bound": -bound, "sup_hsc_sum": sup_s, "margin": margin,
            "passed": margin >= -tol}


# ---------------------------------------------------------------------------
# constants of the pinching pipeline
# ---------------------------------------------------------------------------


def compute_A0(g: MetricField, K: SampleSet, config: OptimizerConfig = OptimizerConfig(), project=None,
               max_evals: int = 300) -> tuple[float, CurvatureBoundsReport]:
    """Sampled sup of HBC(g) over the compact set."""
    if len(K) == 0:
        raise CombinerError("empty compact sample set")
    rep = hbc_bounds_on_set(g, K, config, project=project, refine=("max",), max_evals=max_evals)
    return rep.hbc_sup, rep


def pencil_sup(g: MetricField, h: MetricField, K: SampleSet, project=None) -> tuple[float, dict]:
    """Sampled sup of ``|X|_g^2`` over the ``h``-unit sphere bundle on ``K``."""
    vals = np.array([pencil_max(g, h, z) for z in K.points])
    best = float(np.max(vals))
    info = {"sampled": best}
    if project is not None:
        starts = K.points[np.argsort(-vals, kind="stable")[:2]]
        z, v = refine_extremum(lambda z: pencil_max(g, h, z), starts, project, maximize=True)
        info["refined_point"] = [[float(c.real), float(c.imag)] for c in z]
        best = max(best, v)
    return best, info


def compute_C0(h: MetricField, g: MetricField, K: SampleSet, B2: float, A0: float,
               project=None) -> tuple[float, dict]:
    """``(sup_K max |X|_g^2 over |X|_h = 1)^2 (1 + A0) / B2``."""
    if not B2 > 0:
        raise CombinerError("B2 must be positive")
    if A0 < 0:
        raise CombinerError("C0 is only defined for A0 >= 0; use the unmodified metric")
    s, info = pencil_sup(g, h, K, project)
    return s ** 2 * (1 + A0) / B2, {"pencil_sup": s, **info}


def compute_C1(h: MetricField, g: MetricField, C0: float, B1: float, B2: float, samples: SampleSet,
               project=None) -> dict:
    """``min(C(C0 h, g)^2 B2 / C0 + C(g, C0 h)^2 B1, C(g, C0 h)^2)`` over the samples."""
    if not C0 > 0:
        raise CombinerError("C0 must be positive")
    if not (B1 > 0 and B2 > 0):
        raise CombinerError("B1 and B2 must be positive")
    h0 = h if C0 == 1 else zoo.scale(C0, h)
    rep = spherical_comparison(h0, g, samples, project=project)
    c_hg, c_gh = rep.C_hg, rep.C_gh
    first = c_hg ** 2 * B2 / C0 + c_gh ** 2 * B1
    second = c_gh ** 2
    return {"C1": min(first, second), "branch_1": first, "branch_2": second,
            "C_hg": c_hg, "C_gh": c_gh, "degenerate": c_hg <= 0 or c_gh <= 0, "report": rep}


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PinchConfig:
    delta: float = 0.5
    collar: tuple = (0.05, 0.5)
    R: float = 2.0
    density: int = 64
    seed: int = 0
    tol_curv: float = 1e-6
    refine: bool = True
    max_evals: int = 300
    optimizer: OptimizerConfig = OptimizerConfig(with_hsc=False)
    R_sweep: tuple = ()

    def to_dict(self) -> dict:
        return {"delta": self.delta, "collar": list(self.collar), "R": self.R, "density": self.density,
                "seed": self.seed, "tol_curv": self.tol_curv, "refine": self.refine,
                "max_evals": self.max_evals, "optimizer": self.optimizer.to_dict(),
                "R_sweep": list(self.R_sweep)}


@dataclass
class PinchCertificate:
    domain: dict
    config: dict
    metric: dict
    constants: dict
    combined: dict
    status: str
    reasons: list
    seed: int
    short_circuit: bool = False
    R_sensitivity: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return self.status

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "domain": self.domain, "config": self.config, "metric": self.metric,
                "constants": self.constants, "combined": self.combined, "verdict": self.status,
                "reasons": self.reasons, "seed": self.seed, "short_circuit": self.short_circuit,
                "sample_relative": True, "R_sensitivity": self.R_sensitivity}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v + 0.0 if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _const(value, region, seed, **extra):
    return {"value": value, "region": region, "seed": seed, **extra}


def r_sensitivity(g: MetricField, domain: Domain, K: SampleSet, B2: float, A0: float, radii) -> list:
    """Sampled C0 for other ball radii (no refinement); radii not enclosing the domain are skipped."""
    rows = []
    for R in radii:
        R = float(R)
        if not R > domain.farthest_modulus():
            rows.append({"R": R, "C0": None, "note": "ball does not contain the domain"})
            continue
        C0, info = compute_C0(zoo.ball_bergman(R, domain.dim), g, K, B2, A0)
        rows.append({"R": R, "C0": C0, "pencil_sup": info["pencil_sup"]})
    return rows


def pinch_combine(g: MetricField, domain: Domain, config: PinchConfig = PinchConfig()):
    """Build ``g + C0 b^R`` and certify negative pinching of its HBC on the sampled regions.

    Returns ``(combined_field, certificate)``.  ``b^R`` is the Bergman metric
    of the ball of radius ``R`` about the origin restricted to the domain.
    """
    n = domain.dim
    if g.dim != n:
        raise PreconditionError("metric and domain dimensions differ")
    R = float(config.R)
    if not R > domain.farthest_modulus():
        raise PreconditionError(f"domain is not relatively compact in B(0, {R:g}): "
                                f"reaches |z| = {domain.farthest_modulus():.6g}")
    do, di = config.collar
    seed = config.seed
    opt = OptimizerConfig(**{**config.optimizer.to_dict(), "seed": seed})
    K = sample_compact(domain, config.delta, config.density, seed)
    collar = sample_collar(domain, do, di, config.density, seed)
    both = K.union(collar, tag="compact+collar")
    for s in (K, collar):
        if np.max(np.linalg.norm(s.points, axis=1)) >= R:
            raise PreconditionError("samples leave B(0, R)")
    proj_K = region_projector(domain, config.delta, math.inf) if config.refine else None
    proj_collar = region_projector(domain, do, di) if config.refine else None
    proj_both = region_projector(domain, do, math.inf) if config.refine else None
    for s in (K, collar):
        for z in s.points:
            g.jet(z)  # raises NotPositiveDefiniteError
    h = zoo.ball_bergman(R, n)
    B2, B2p = 2.0 / (n + 1), 4.0 / (n + 1)
    cfg_echo = {"pinch": config.to_dict(), "metric": g.meta, "domain": domain.to_dict()}
    base = dict(domain=domain.to_dict(), config=cfg_echo, metric={"name": g.name, "meta": g.meta}, seed=seed)

    gc = hbc_bounds_on_set(g, collar, opt, project=proj_collar, refine=("max", "min"),
                           max_evals=config.max_evals)
    B1, B1p = -gc.hbc_sup, -gc.hbc_inf
    consts = {"B1": _const(B1, collar.region, seed), "B1_prime": _const(B1p, collar.region, seed),
              "B2": _const(B2, "exact space form", None), "B2_prime": _const(B2p, "exact space form", None)}
    if not B1 > 0:
        return g, PinchCertificate(**base, constants=consts, combined={}, status="hypothesis_not_met",
                                   reasons=[f"collar HBC sup {gc.hbc_sup:.6g} is not negative"])

    A0, kr = compute_A0(g, K, opt, proj_K, config.max_evals)
    consts["A0"] = _const(A0, K.region, seed, sampled_hbc_range=[kr.hbc_inf, kr.hbc_sup])
    if A0 < 0:
        combined, C0 = g, 0.0
        consts["C0"] = _const(0.0, K.region, seed, note="A0 < 0, metric left unchanged")
        C1 = min(B1, -A0)
        consts["C1"] = _const(C1, both.region, seed, note="min(B1, -A0)")
        short = True
    else:
        C0, c0info = compute_C0(h, g, K, B2, A0, proj_K)
        consts["C0"] = _const(C0, K.region, seed, **c0info)
        combined = zoo.metric_sum(g, zoo.scale(C0, h))
        c1 = compute_C1(h, g, C0, B1, B2, both, proj_both)
        C1 = c1["C1"]
        rep = c1["report"]
        consts["C1"] = _const(C1, both.region, seed, branch_1=c1["branch_1"], branch_2=c1["branch_2"],
                              C_hg=c1["C_hg"], C_gh=c1["C_gh"], degenerate=c1["degenerate"],
                              comparison_invariants=rep.invariant_defects())
        short = False

    sensitivity = [] if short else r_sensitivity(g, domain, K, B2, A0, config.R_sweep)

    cb = hbc_bounds_on_set(combined, both, opt, project=proj_both, refine=("max",),
                           max_evals=config.max_evals)
    sup, inf = cb.hbc_sup, cb.hbc_inf
    margin = -C1 - sup
    combined_info = {"hbc_sup": sup, "hbc_inf": inf, "region": both.region, "points": len(cb.per_point),
                     "margin": margin, "optimizer": cb.optimizer_stats(), "tol": config.tol_curv}
    reasons = []
    if not short and not C0 > 0:
        reasons.append("C0 is not positive")
    if not C1 > 0:
        reasons.append("C1 is not positive")
    if margin < -config.tol_curv:
        reasons.append(f"sampled HBC sup {sup:.6g} exceeds -C1 = {-C1:.6g}")
    if not math.isfinite(inf):
        reasons.append("sampled HBC inf is not finite")
    status = "pass" if not reasons else "fail"
    return combined, PinchCertificate(**base, constants=consts, combined=combined_info, status=status,
                                      reasons=reasons, short_circuit=short, R_sensitivity=sensitivity)


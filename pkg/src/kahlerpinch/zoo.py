"""Concrete metrics: Euclidean, Bergman metrics of balls, polydiscs and complete
Reinhardt domains, plus the algebra (scaling, sums, bump perturbations) used to
stage combination experiments.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .domains import Ball, Domain, Polydisc, Reinhardt, SampleSet, boundary_distance, contains
from .jets import MetricField, MetricJet, radial_potential_jet, zero_jet


class ZooError(ValueError):
    pass


def _abs2(w):
    return w.real ** 2 + w.imag ** 2


def euclidean(n: int) -> MetricField:
    if n < 1:
        raise ZooError("dimension must be >= 1")

    def jet_fn(z):
        j = zero_jet(z)
        return MetricJet(z, np.eye(n, dtype=complex), j.dh, j.dbar_h, j.ddbar_h, 0.0)

    return MetricField(n, "euclidean", jet_fn=jet_fn,
                       potential=lambda Z: _abs2(Z).sum(axis=-1),
                       meta={"kind": "euclidean", "parameters": {"n": n}})


def _log_barrier_derivs(coef: float, R2: float):
    """Derivatives of ``F(s) = -coef * log(R2 - s)``."""

    def derivs(s):
        d = R2 - s
        return coef / d, coef / d ** 2, 2 * coef / d ** 3, 6 * coef / d ** 4

    return derivs


def ball_bergman(R: float, n: int, center=None) -> MetricField:
    """Bergman metric of ``B(center, R)``: ``ddbar log K = -(n+1) ddbar log(R^2 - |z - c|^2)``."""
    if not R > 0:
        raise ZooError("radius must be positive")
    c = np.zeros(n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    derivs = _log_barrier_derivs(n + 1.0, R * R)

    def jet_fn(z):
        return radial_potential_jet(z, c, 1.0, derivs)

    def potential(Z):
        # log1p keeps the absolute rounding of phi near eps * |phi|, which the
        # fourth-order stencil divides by step**4
        return -(n + 1) * np.log1p(-_abs2(Z - c).sum(axis=-1) / (R * R))

    return MetricField(
        n, f"ball_bergman(R={R:g}, n={n})", jet_fn=jet_fn, potential=potential,
        valid=lambda z: bool(np.linalg.norm(z - c) < R),
        boundary_distance=lambda z: float(R - np.linalg.norm(z - c)),
        meta={"kind": "ball_bergman", "parameters": {"R": float(R), "n": n},
              "reference": {"hsc": -4.0 / (n + 1), "hbc_range": [-4.0 / (n + 1), -2.0 / (n + 1)]}},
    )


def polydisc_bergman(radii, center=None) -> MetricField:
    """Product of disc Bergman metrics ``2 r_i^2 / (r_i^2 - |z_i - c_i|^2)^2``."""
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if np.any(radii <= 0):
        raise ZooError("radii must be positive")
    n = radii.size
    c = np.zeros(n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    factors = [_log_barrier_derivs(2.0, r * r) for r in radii]

    def jet_fn(z):
        out = zero_jet(z)
        h, dh, db, dd = out.h.copy(), out.dh.copy(), out.dbar_h.copy(), out.ddbar_h.copy()
        for i in range(n):
            j1 = radial_potential_jet(z[i:i + 1], c[i:i + 1], 1.0, factors[i])
            h[i, i] = j1.h[0, 0]
            dh[i, i, i] = j1.dh[0, 0, 0]
            db[i, i, i] = j1.dbar_h[0, 0, 0]
            dd[i, i, i, i] = j1.ddbar_h[0, 0, 0, 0]
        return MetricJet(z, h, dh, db, dd, 0.0)

    def potential(Z):
        return np.sum(-2.0 * np.log1p(-_abs2(Z - c) / radii ** 2), axis=-1)

    return MetricField(
        n, f"polydisc_bergman(radii={radii.tolist()})", jet_fn=jet_fn, potential=potential,
        valid=lambda z: bool(np.all(np.abs(z - c) < radii)),
        boundary_distance=lambda z: float(np.min(radii - np.abs(z - c))),
        meta={"kind": "polydisc_bergman", "parameters": {"radii": radii.tolist()}},
    )


def quartic_potential(n: int, a: float = 0.5) -> MetricField:
    """Kähler metric with potential ``|z|^2 + a |z|^4`` (a >= 0), a conformal-type perturbation of Euclidean."""
    if a < 0:
        raise ZooError("coefficient must be nonnegative")

    def derivs(s):
        return 1.0 + 2 * a * s, 2 * a, 0.0, 0.0

    c = np.zeros(n, dtype=complex)
    return MetricField(
        n, f"quartic(a={a:g})", jet_fn=lambda z: radial_potential_jet(z, c, 1.0, derivs),
        potential=lambda Z: np.sum(np.abs(Z) ** 2, axis=-1) + a * np.sum(np.abs(Z) ** 2, axis=-1) ** 2,
        meta={"kind": "quartic", "parameters": {"n": n, "a": a}},
    )


# ---------------------------------------------------------------------------
# algebra on fields
# ---------------------------------------------------------------------------


def scale(lam: float, h: MetricField) -> MetricField:
    """The metric ``lam * h``."""
    if not lam > 0:
        raise ZooError("scale factor must be positive")
    pot = None if h.potential is None else (lambda Z: lam * h.potential(Z))
    return MetricField(
        h.dim, f"{lam:g}*{h.name}", jet_fn=lambda z: h.raw_jet(z).scaled(lam), potential=pot,
        kahler=h.kahler, valid=h.valid, boundary_distance=h.boundary_distance,
        meta={"kind": "scale", "parameters": {"lambda": float(lam)}, "base": h.meta},
    )


def metric_sum(h: MetricField, g: MetricField) -> MetricField:
    """Componentwise sum ``h + g`` of two metrics on the same region."""
    if h.dim != g.dim:
        raise ZooError("cannot add metrics of different dimensions")
    pot = None
    if h.potential is not None and g.potential is not None:
        pot = lambda Z: h.potential(Z) + g.potential(Z)  # noqa: E731

    def valid(z):
        return (h.valid is None or h.valid(z)) and (g.valid is None or g.valid(z))

    def bd(z):
        vals = [f.boundary_distance(z) for f in (h, g) if f.boundary_distance is not None]
        return min(vals) if vals else None

    has_bd = h.boundary_distance is not None or g.boundary_distance is not None
    return MetricField(
        h.dim, f"({h.name} + {g.name})", jet_fn=lambda z: h.raw_jet(z) + g.raw_jet(z),
        potential=pot, kahler=h.kahler and g.kahler, valid=valid,
        boundary_distance=bd if has_bd else None,
        meta={"kind": "sum", "terms": [h.meta, g.meta]},
    )


# ---------------------------------------------------------------------------
# bump perturbations
# ---------------------------------------------------------------------------


def bump_derivs(s: float):
    """Derivatives of ``f(s) = exp(-1/(1-s))`` for ``s < 1`` (all zero for ``s >= 1``)."""
    if s >= 1.0:
        return 0.0, 0.0, 0.0, 0.0
    u = 1.0 / (1.0 - s)
    f = math.exp(-u)
    return (-u ** 2 * f,
            (u ** 4 - 2 * u ** 3) * f,
            (-u ** 6 + 6 * u ** 5 - 6 * u ** 4) * f,
            (u ** 8 - 12 * u ** 7 + 36 * u ** 6 - 24 * u ** 5) * f)


def bump_function(Z, center, radius):
    t2 = np.sum(np.abs(np.asarray(Z) - center) ** 2, axis=-1) / radius ** 2
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(-1.0 / (1.0 - np.minimum(t2, 1.0 - 1e-300)))
    return np.where(t2 < 1.0, val, 0.0)


class BumpError(ZooError):
    def __init__(self, msg, max_epsilon=None):
        super().__init__(msg)
        self.max_epsilon = max_epsilon


def _support_grid(center, radius, n, count=256):
    from .domains import sphere_directions

    dirs = sphere_directions(count, 2 * n, seed=3)
    radii = np.linspace(0.0, 1.0, 9)[1:-1]
    pts = [center]
    for k, d in enumerate(dirs):
        r = radii[k % len(radii)]
        pts.append(center + r * radius * (d[:n] + 1j * d[n:]))
    return np.array(pts)


def _min_eig_on(field: MetricField, pts) -> float:
    return min(float(np.linalg.eigvalsh(field.raw_jet(p).h)[0]) for p in pts)


def bump_perturbation(base: MetricField, epsilon: float, center, radius: float,
                      domain: Domain | None = None, check_points: int = 256) -> MetricField:
    """Add ``epsilon * chi`` to the potential of ``base``.

    ``chi(z) = exp(-1/(1 - t^2))`` with ``t = |z - center| / radius`` inside the
    support ball and zero outside, so the result stays Kähler and coincides
    with ``base`` off the support.  Positive definiteness is verified on a grid
    in the support; on failure a :class:`BumpError` carries the largest
    admissible epsilon found by bisection.
    """
    n = base.dim
    c = np.asarray(center, dtype=complex).reshape(-1)
    if c.size != n:
        raise ZooError("bump center has the wrong dimension")
    if not radius > 0:
        raise ZooError("bump radius must be positive")
    if domain is not None:
        if not contains(domain, c) or boundary_distance(domain, c) <= radius:
            raise BumpError("bump support touches the boundary of the domain")
    meta = {"kind": "bump", "parameters": {"epsilon": float(epsilon), "center": [[v.real, v.imag] for v in c],
                                           "radius": float(radius)}, "base": base.meta}
    if epsilon == 0:
        return MetricField(n, base.name, jet_fn=base.raw_jet, potential=base.potential,
                           kahler=base.kahler, valid=base.valid,
                           boundary_distance=base.boundary_distance, meta=meta)

    def make(eps):
        pot = None
        if base.potential is not None:
            pot = lambda Z: base.potential(Z) + eps * bump_function(Z, c, radius)  # noqa: E731
        if base.mode == "potential_fd":
            return MetricField(n, f"{base.name}+bump({eps:g})", mode="potential_fd", potential=pot,
                               kahler=base.kahler, fd_step=base.fd_step, fd_order=base.fd_order,
                               valid=base.valid, boundary_distance=base.boundary_distance, meta=meta)

        def jet_fn(z):
            j = base.raw_jet(z)
            if np.sum(np.abs(z - c) ** 2) >= radius ** 2:
                return j
            return j + radial_potential_jet(z, c, radius, bump_derivs).scaled(eps)

        return MetricField(n, f"{base.name}+bump({eps:g})", jet_fn=jet_fn, potential=pot,
                           kahler=base.kahler, valid=base.valid,
                           boundary_distance=base.boundary_distance, meta=meta)

    grid = _support_grid(c, radius, n, check_points)
    field = make(epsilon)
    if _min_eig_on(field, grid) <= 0:
        eps_max = max_admissible_epsilon(base, c, radius, hi=epsilon, grid=grid, sign=np.sign(epsilon))
        raise BumpError(f"epsilon={epsilon:g} destroys positive definiteness; "
                        f"largest admissible magnitude ~ {eps_max:.6g}", eps_max)
    return field


def max_admissible_epsilon(base: MetricField, center, radius: float, hi: float | None = None,
                           grid=None, sign: float = 1.0, iters: int = 50) -> float:
    """Largest ``|epsilon|`` (in direction ``sign``) keeping the perturbed metric positive definite on the grid."""
    c = np.asarray(center, dtype=complex).reshape(-1)
    if grid is None:
        grid = _support_grid(c, radius, base.dim)
    jets_base = [base.raw_jet(p) for p in grid]
    jets_bump = [radial_potential_jet(p, c, radius, bump_derivs) if np.sum(np.abs(p - c) ** 2) < radius ** 2
                 else None for p in grid]

    def ok(eps):
        for jb, jp in zip(jets_base, jets_bump):
            hm = jb.h if jp is None else jb.h + eps * jp.h
            if np.linalg.eigvalsh(hm)[0] <= 0:
                return False
        return True

    lo, top = 0.0, abs(hi) if hi else 1.0
    while ok(sign * top):
        lo, top = top, 2 * top
        if top > 1e12:
            return math.inf
    for _ in range(iters):
        mid = 0.5 * (lo + top)
        if ok(sign * mid):
            lo = mid
        else:
            top = mid
    return lo


# ---------------------------------------------------------------------------
# uniform equivalence with the Euclidean metric
# ---------------------------------------------------------------------------


def uniform_equivalence_bounds(h: MetricField, samples: SampleSet | np.ndarray) -> tuple[float, float]:
    """``(min lambda_min(h), max lambda_max(h))`` over the samples."""
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples)
    if len(pts) == 0:
        raise ZooError("empty sample set")
    lo, hi = math.inf, -math.inf
    for p in pts:
        ev = np.linalg.eigvalsh(h.metric(p))
        lo, hi = min(lo, float(ev[0])), max(hi, float(ev[-1]))
    return lo, hi


# ---------------------------------------------------------------------------
# truncated Bergman kernels of complete Reinhardt domains
# ---------------------------------------------------------------------------


def multi_indices(n: int, N: int) -> np.ndarray:
    """All ``alpha`` in N^n with ``|alpha| <= N``, graded then lexicographic."""
    out = []
    for total in range(N + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            a = [0] * n
            for k in combo:
                a[k] += 1
            out.append(tuple(a))
    seen, uniq = set(), []
    for a in out:
        if a not in seen:
            seen.add(a)
            uniq.append(a)
    return np.array(uniq, dtype=int).reshape(-1, n)


@dataclass(frozen=True, eq=False)
class ReinhardtCoefficients:
    """``c_alpha = integral over Omega of |z^alpha|^2 dV`` for ``|alpha| <= degree``."""

    alphas: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    degree: int

    def to_csv(self) -> str:
        n = self.alphas.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"alpha_{k + 1}" for k in range(n)] + ["c_alpha", "error", "units"])
        for a, v, e in zip(self.alphas, self.values, self.errors):
            w.writerow([int(x) for x in a] + [repr(float(v)), repr(float(e)), "volume"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ReinhardtCoefficients":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        n = sum(1 for h in header if h.startswith("alpha_"))
        alphas = np.array([[int(r[k]) for k in range(n)] for r in body], dtype=int)
        vals = np.array([float(r[n]) for r in body])
        errs = np.array([float(r[n + 1]) for r in body])
        return cls(alphas, vals, errs, int(alphas.sum(axis=1).max()))


def _modulus_limit(profile, prefix: tuple, k: int, n: int, cap: float) -> float:
    """``sup {t : profile(prefix, t, 0, ..., 0) < 0}`` for a complete Reinhardt shadow."""
    def f(t):
        r = np.zeros(n)
        r[:k] = prefix
        r[k] = t
        return float(profile(r))

    if f(0.0) >= 0:
        return 0.0
    hi = cap
    while f(hi) < 0:
        hi *= 2.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def reinhardt_coefficients(domain: Reinhardt, N: int, tol: float = 1e-8) -> ReinhardtCoefficients:
    """Moments ``c_alpha`` by nested adaptive quadrature over the shadow in |z|-space.

    In polar coordinates ``c_alpha = (2 pi)^n int prod r_j^(2 alpha_j + 1) dr``;
    the innermost radial integral is done in closed form up to the boundary
    modulus, the remaining ones with :func:`scipy.integrate.quad`.
    """
    if N < 0:
        raise ZooError("degree must be nonnegative")
    n = domain.dim
    caps = domain.bounding_radii * (1 + 1e-12)
    profile = domain.profile

    @lru_cache(maxsize=None)
    def limit(prefix):
        k = len(prefix)
        return _modulus_limit(profile, prefix, k, n, float(caps[k]))

    def integral(alpha, prefix):
        k = len(prefix)
        top = limit(prefix)
        if k == n - 1:
            return top ** (2 * alpha[k] + 2) / (2 * alpha[k] + 2), 0.0
        errs = []

        def integrand(t):
            val, err = integral(alpha, prefix + (t,))
            errs.append(err)
            return t ** (2 * alpha[k] + 1) * val

        val, err = integrate.quad(integrand, 0.0, top, epsabs=0.0, epsrel=tol, limit=200)
        return val, err + (max(errs) * top if errs else 0.0)

    alphas = multi_indices(n, N)
    vals, errs = [], []
    norm = (2 * math.pi) ** n
    for a in alphas:
        v, e = integral(tuple(int(x) for x in a), ())
        vals.append(norm * v)
        errs.append(norm * e)
    vals = np.array(vals)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise ZooError("quadrature produced non-positive moments")
    return ReinhardtCoefficients(alphas, vals, np.array(errs), N)


def reinhardt_bergman(domain: Reinhardt | Ball | Polydisc, N: int = 20, tol: float = 1e-8,
                      coefficients: ReinhardtCoefficients | None = None,
                      fd_step: float | None = None) -> MetricField:
    """Metric ``ddbar log K_N`` with ``K_N = sum_{|alpha| <= N} |z^alpha|^2 / c_alpha``.

    Balls and polydiscs centred at the origin are accepted and converted to
    their Reinhardt description.  Jets come from finite differences of the
    potential; the quadrature error is kept in ``meta``.
    """
    if isinstance(domain, (Ball, Polydisc)):
        if np.any(domain.center != 0):
            raise ZooError("Reinhardt domains must be centred at the origin")
        from .domains import lp_reinhardt

        if isinstance(domain, Ball):
            domain = lp_reinhardt([2.0] * domain.dim, [domain.radius] * domain.dim)
        else:
            domain = Reinhardt(profile=lambda r, a=domain.radii: np.max(np.asarray(r) / a, axis=-1) - 1.0,
                               bounding_radii=domain.radii,
                               spec={"variant": "polydisc", "radii": domain.radii.tolist()})
    if N < 2:
        raise ZooError("truncation degree must be at least 2")
    coeffs = coefficients if coefficients is not None else reinhardt_coefficients(domain, N, tol)
    keep = coeffs.alphas.sum(axis=1) <= N
    alphas, inv_c = coeffs.alphas[keep], 1.0 / coeffs.values[keep]

    def potential(Z):
        a2 = np.abs(np.asarray(Z)) ** 2
        mon = np.prod(a2[..., None, :] ** alphas, axis=-1)
        return np.log(mon @ inv_c)

    return MetricField(
        domain.dim, f"reinhardt_bergman(N={N})", mode="potential_fd", potential=potential,
        fd_step=fd_step, valid=lambda z: bool(domain._inside(z[None])[0]),
        meta={"kind": "reinhardt_bergman", "parameters": {"N": N, "tol": tol},
              "truncation_degree": N, "quadrature_error": float(np.max(coeffs.errors / coeffs.values)),
              "domain": domain.spec},
    )

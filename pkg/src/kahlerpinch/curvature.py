"""Curvature of Hermitian metrics from their jets.

Normalization
-------------
The tensor returned by :func:`curvature_tensor` is

    R_{i jbar k lbar} = 2 * ( -d_k dbar_l h_{i jbar}
                              + sum_{p,q} h^{p qbar} d_k h_{i qbar} dbar_l h_{p jbar} )

with ``HSC(X) = R(X, Xbar, X, Xbar) / |X|^4`` and
``HBC(X, Y) = R(X, Xbar, Y, Ybar) / (|X|^2 |Y|^2)``.  The factor 2 puts
the holomorphic sectional curvature in the Riemannian normalization where
``ds^2 = h_{i jbar} dz_i dzbar_j`` on the unit disc with ``h = 2/(1-|z|^2)^2``
has Gaussian curvature -2, the ball Bergman metric has constant holomorphic
sectional curvature ``-4/(n+1)``, and the disc identity

    HSC(h)(X) = -2 / |X|^2 * d^2/dz dzbar log u_h(0),   u_h = |f'|_h^2

holds exactly (:func:`chern_lu_residual` checks it against the tensor).
Without the factor the bracket alone gives half of these values.  The factor
is a single constant, so all sign statements, ratios, the scaling law
``HBC(lam h) = HBC(h)/lam`` and the sum inequality are unaffected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from .domains import SampleSet, as_point, from_real, sphere_directions, to_real
from .jets import JetError, MetricField, MetricJet

CURVATURE_SCALE = 2.0
MAX_CONDITION = 1e12


class CurvatureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    point: np.ndarray
    R: np.ndarray
    h: np.ndarray
    tol: float
    condition: float

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    def form(self, X, Y, Z, T) -> complex:
        """``R(X, Ybar, Z, Tbar)``."""
        return complex(np.einsum("ijkl,i,j,k,l->", self.R, X, np.conj(Y), Z, np.conj(T)))

    def norm2(self, X) -> float:
        return float(np.real(np.einsum("ij,i,j->", self.h, X, np.conj(X))))

    def hsc(self, X) -> float:
        X = np.asarray(X, dtype=complex)
        nx = self.norm2(X)
        if not nx > 0:
            raise CurvatureError("HSC needs a nonzero vector")
        return float(np.real(self.form(X, X, X, X))) / nx ** 2

    def hbc(self, X, Y) -> float:
        X = np.asarray(X, dtype=complex)
        Y = np.asarray(Y, dtype=complex)
        nx, ny = self.norm2(X), self.norm2(Y)
        if not (nx > 0 and ny > 0):
            raise CurvatureError("HBC needs nonzero vectors")
        return float(np.real(self.form(X, X, Y, Y))) / (nx * ny)

    def symmetry_defects(self) -> dict[str, float]:
        R = self.R
        return {
            "conjugation": float(np.max(np.abs(R - np.conj(np.transpose(R, (1, 0, 3, 2)))))),
            "kahler": float(np.max(np.abs(R - np.transpose(R, (2, 1, 0, 3))))),
        }

    def orthonormal(self) -> np.ndarray:
        """Components in an ``h``-unitary frame: ``Rt(x, xbar, y, ybar) = R(Px, ..)``."""
        P = unitary_frame(self.h)
        return np.einsum("ijkl,ia,jb,kc,ld->abcd", self.R, P, P.conj(), P, P.conj())


def unitary_frame(h: np.ndarray) -> np.ndarray:
    """Matrix ``P`` with ``|P x|_h = |x|`` for every complex vector ``x``.

    ``|X|_h^2 = sum h_{i jbar} X_i Xbar_j = X^H conj(h) X``, so ``P`` inverts the
    conjugate-transposed Cholesky factor of ``conj(h)``.
    """
    L = np.linalg.cholesky(np.conj(h))
    return sla.solve_triangular(L, np.eye(len(h)), lower=True, trans="C")


def tensor_from_jet(jet: MetricJet) -> CurvatureTensor:
    h = jet.h
    n = h.shape[0]
    cond = float(np.linalg.cond(h))
    if not cond < MAX_CONDITION:
        raise CurvatureError(f"metric too ill-conditioned for curvature (condition {cond:.3e})")
    try:
        cho = sla.cho_factor(h)
    except np.linalg.LinAlgError as exc:
        raise CurvatureError("metric is not positive definite") from exc
    Y = sla.cho_solve(cho, jet.dbar_h.reshape(n, n * n)).reshape(n, n, n)  # h^{-1} dbar_l h
    correction = np.einsum("iqk,qjl->ijkl", jet.dh, Y)
    R = CURVATURE_SCALE * (correction - jet.ddbar_h)
    tol = CURVATURE_SCALE * jet.tol * (1 + cond * float(np.max(np.abs(jet.dh), initial=0.0)))
    return CurvatureTensor(jet.point, R, h, tol, cond)


def curvature_tensor(field: MetricField, z) -> CurvatureTensor:
    return tensor_from_jet(field.jet(z))


def hsc(field: MetricField, z, X) -> float:
    return curvature_tensor(field, z).hsc(X)


def hbc(field: MetricField, z, X, Y) -> float:
    return curvature_tensor(field, z).hbc(X, Y)


def ricci_from_tensor(T: CurvatureTensor) -> np.ndarray:
    """``Ric_{k lbar} = sum h^{i jbar} R_{i jbar k lbar}`` (trace over the first pair)."""
    hinv = np.linalg.inv(T.h)
    ric = np.einsum("ji,ijkl->kl", hinv, T.R)
    return 0.5 * (ric + ric.conj().T)


def ricci(field: MetricField, z) -> np.ndarray:
    return ricci_from_tensor(curvature_tensor(field, z))


# ---------------------------------------------------------------------------
# extrema over the unit sphere bundle at a point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    gtol: float = 1e-10
    max_iter: int = 500
    pair_samples: int = 200
    seed: int = 0
    with_hsc: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Extrema:
    min: float
    max: float
    converged_min: bool
    converged_max: bool
    iterations: int
    sampled_min: float
    sampled_max: float
    local_values: list = field(default_factory=list)
    argopt: dict = field(default_factory=dict)
    unconverged_restarts: int = 0

    @property
    def converged(self) -> bool:
        return self.converged_min and self.converged_max


def _random_units(count: int, n: int, seed: int, blocks: int) -> list[np.ndarray]:
    d = sphere_directions(count, 2 * n * blocks, seed=seed)
    out = []
    for b in range(blocks):
        v = from_real(d[:, 2 * n * b:2 * n * (b + 1)])
        out.append(v / np.linalg.norm(v, axis=1, keepdims=True))
    return out


def _pair_values(Rt, X, Y):
    return np.real(np.einsum("abcd,ma,mb,mc,md->m", Rt, X, X.conj(), Y, Y.conj()))


def _block_step(A, x, maximize):
    """One projected-gradient step with exact line search for ``x^H A x`` on the sphere."""
    Ax = np.einsum("mij,mj->mi", A, x)
    q = np.real(np.einsum("mi,mi->m", x.conj(), Ax))
    g = Ax - q[:, None] * x
    gn = np.linalg.norm(g, axis=1)
    # below this the direction is roundoff and no longer orthogonal to x
    active = gn > 1e-13 * np.maximum(np.linalg.norm(Ax, axis=1), 1e-300)
    d = g - np.einsum("mi,mi->m", x.conj(), g)[:, None] * x
    dn = np.linalg.norm(d, axis=1)
    active &= dn > 0
    d = np.where(active[:, None], d / np.where(active, dn, 1.0)[:, None], 0.0)
    Ad = np.einsum("mij,mj->mi", A, d)
    M2 = np.empty((len(x), 2, 2), dtype=complex)
    M2[:, 0, 0] = q
    M2[:, 0, 1] = np.einsum("mi,mi->m", x.conj(), Ad)
    M2[:, 1, 0] = np.conj(M2[:, 0, 1])
    M2[:, 1, 1] = np.real(np.einsum("mi,mi->m", d.conj(), Ad))
    w, V = np.linalg.eigh(M2)
    pick = V[:, :, 1] if maximize else V[:, :, 0]
    x_new = pick[:, :1] * x + pick[:, 1:] * d
    nrm = np.linalg.norm(x_new, axis=1, keepdims=True)
    x_new = np.where(active[:, None], x_new / np.where(nrm > 0, nrm, 1.0), x)
    return x_new, np.where(active, gn, 0.0)


def _pair_grad(Rt, x, y):
    """Value and Riemannian gradients in ``x`` and ``y`` at unit vectors."""
    Ay = np.einsum("abcd,c,d->ba", Rt, y, y.conj())
    Ay = 0.5 * (Ay + Ay.conj().T)
    Bx = np.einsum("abcd,a,b->dc", Rt, x, x.conj())
    Bx = 0.5 * (Bx + Bx.conj().T)
    v = float(np.real(x.conj() @ Ay @ x))
    return v, Ay @ x - v * x, Bx @ y - v * y


def _polish_pair(Rt, x, y, maximize, gtol, max_iter):
    """BFGS on the scale-invariant quotient ``R(x,x,y,y) / (|x|^2 |y|^2)`` in real coordinates,
    finished by Newton steps on the gradient.

    The quotient is flat along phase rotations of ``x`` and ``y``; least
    squares handles that null space.  Newton steps only use gradients, so they
    keep reducing the gradient where value-based line searches stall.
    """
    n = len(x)
    sgn = -1.0 if maximize else 1.0

    def split(u):
        return from_real(u[:2 * n]), from_real(u[2 * n:])

    def grad(u):
        xx, yy = split(u)
        nx, ny = np.linalg.norm(xx), np.linalg.norm(yy)
        v, gx, gy = _pair_grad(Rt, xx / nx, yy / ny)
        # d/d(re, im) of a real function equals 2 d/dzbar, rescaled off the unit sphere
        return v, 2 * np.concatenate([to_real(gx / nx), to_real(gy / ny)])

    def fg(u):
        v, gr = grad(u)
        return sgn * v, sgn * gr

    u0 = np.concatenate([to_real(x), to_real(y)])
    res = optimize.minimize(fg, u0, jac=True, method="BFGS",
                            options={"gtol": 0.1 * gtol, "maxiter": max_iter})
    u, nit = res.x, int(res.nit)
    xx, yy = split(u)
    u = np.concatenate([to_real(xx / np.linalg.norm(xx)), to_real(yy / np.linalg.norm(yy))])
    v, gr = grad(u)
    eps = 1e-6
    for _ in range(6):
        if np.linalg.norm(gr) < gtol or nit >= max_iter:
            break
        Hs = np.empty((len(u), len(u)))
        for k in range(len(u)):
            e = np.zeros(len(u))
            e[k] = eps
            Hs[:, k] = (grad(u + e)[1] - grad(u - e)[1]) / (2 * eps)
        step = np.linalg.lstsq(0.5 * (Hs + Hs.T), -gr, rcond=1e-10)[0]
        un = u + step
        xx, yy = split(un)
        un = np.concatenate([to_real(xx / np.linalg.norm(xx)), to_real(yy / np.linalg.norm(yy))])
        vn, gn = grad(un)
        nit += 1
        if np.linalg.norm(gn) >= np.linalg.norm(gr) or sgn * (vn - v) > 1e-12 * max(1.0, abs(v)):
            break
        u, v, gr = un, vn, gn
    xx, yy = split(u)
    return xx / np.linalg.norm(xx), yy / np.linalg.norm(yy), nit


def _optimize_pairs(Rt, X, Y, maximize, gtol, max_iter, polish_after: int = 300):
    """Batched alternating projected-gradient steps, then BFGS on unconverged starts.

    Iterations of both phases count against ``max_iter``.
    """
    scale = max(1.0, float(np.max(np.abs(Rt))))
    it = 0
    gmax = np.full(len(X), np.inf)
    for it in range(1, min(max_iter, polish_after) + 1):
        Ay = np.einsum("abcd,mc,md->mba", Rt, Y, Y.conj())
        X, gx = _block_step(0.5 * (Ay + np.conj(np.transpose(Ay, (0, 2, 1)))), X, maximize)
        Bx = np.einsum("abcd,ma,mb->mdc", Rt, X, X.conj())
        Y, gy = _block_step(0.5 * (Bx + np.conj(np.transpose(Bx, (0, 2, 1)))), Y, maximize)
        gmax = np.maximum(gx, gy)
        if np.all(gmax < gtol * scale):
            break
    total = it
    if max_iter > it:
        X, Y = X.copy(), Y.copy()
        for m in np.flatnonzero(gmax >= gtol * scale):
            x, y, k = _polish_pair(Rt, X[m], Y[m], maximize, gtol * scale, max_iter - it)
            v0 = _pair_values(Rt, X[m:m + 1], Y[m:m + 1])[0]
            v1 = _pair_values(Rt, x[None], y[None])[0]
            if (v1 >= v0) if maximize else (v1 <= v0):
                X[m], Y[m] = x, y
            _, gx, gy = _pair_grad(Rt, X[m], Y[m])
            gmax[m] = max(np.linalg.norm(gx), np.linalg.norm(gy))
            total = max(total, it + k)
    return X, Y, gmax < gtol * scale, total


def hbc_extrema_tensor(T: CurvatureTensor, config: OptimizerConfig = OptimizerConfig(),
                       sides: tuple[str, ...] = ("min", "max"), warm: dict | None = None) -> Extrema:
    """Min and max of HBC over pairs of unit vectors at one point.

    ``config.pair_samples`` quasi-random pairs seed ``config.restarts`` runs of
    alternating projected-gradient ascent (descent) with exact line search on
    each sphere factor.  ``warm`` maps a side to a pair ``(x, y)`` in the
    unitary frame (see :attr:`Extrema.argopt`) used as an extra start.
    Sides not requested are reported as the sampled values.
    """
    Rt = T.orthonormal()
    n = T.dim
    if n == 1:
        v = float(np.real(Rt[0, 0, 0, 0]))
        one = np.ones((1, 1), dtype=complex)
        return Extrema(v, v, True, True, 0, v, v, [v], {"max": (one, one), "min": (one, one)})
    X, Y = _random_units(config.pair_samples, n, config.seed, 2)
    vals = _pair_values(Rt, X, Y)
    order = np.argsort(vals, kind="stable")
    k = min(config.restarts, len(vals))
    res = {}
    iters = 0
    unconverged = 0
    argopt = {}
    for maximize, idx in ((True, order[::-1][:k]), (False, order[:k])):
        side = "max" if maximize else "min"
        if side not in sides:
            continue
        Xs, Ys = X[idx], Y[idx]
        if warm and side in warm:
            Xs = np.vstack([warm[side][0][None], Xs])
            Ys = np.vstack([warm[side][1][None], Ys])
        Xo, Yo, conv, it = _optimize_pairs(Rt, Xs, Ys, maximize, config.gtol, config.max_iter)
        v = _pair_values(Rt, Xo, Yo)
        best = int(np.argmax(v) if maximize else np.argmin(v))  # first found wins on ties
        # a side counts as converged when a converged restart attains the reported value
        scale = max(1.0, float(np.max(np.abs(Rt))))
        ok = bool(np.any(conv & (np.abs(v - v[best]) <= 1e-12 * scale)))
        res[maximize] = (float(v[best]), ok, v)
        unconverged += int(np.sum(~conv))
        argopt[side] = (Xo[best], Yo[best])
        iters = max(iters, it)
    vmax = max(res[True][0], float(vals.max())) if True in res else float(vals.max())
    vmin = min(res[False][0], float(vals.min())) if False in res else float(vals.min())
    local = sorted(set(np.round(np.concatenate([r[2] for r in res.values()]), 12).tolist()))
    return Extrema(vmin, vmax, res[False][1] if False in res else False,
                   res[True][1] if True in res else False, iters, float(vals.min()),
                   float(vals.max()), local, argopt, unconverged)


def _quartic(Rt, X):
    return np.real(np.einsum("abcd,ma,mb,mc,md->m", Rt, X, X.conj(), X, X.conj()))


def _quartic_grad(Rt, X):
    return (np.einsum("abcd,ma,mc,md->mb", Rt, X, X, X.conj())
            + np.einsum("abcd,ma,mb,mc->md", Rt, X, X.conj(), X))


def _trig_fourier(Rt, X, D):
    """Fourier coefficients of ``t -> P(cos t x + sin t d)`` (frequencies 0, 2, 4)."""
    t = np.arange(16) * (np.pi / 8)
    V = np.cos(t)[None, :, None] * X[:, None] + np.sin(t)[None, :, None] * D[:, None]
    P = np.real(np.einsum("abcd,mta,mtb,mtc,mtd->mt", Rt, V, V.conj(), V, V.conj()))
    F = np.fft.rfft(P, axis=1) / 16
    return F[:, 0].real, 2 * F[:, 2], 2 * F[:, 4]


def _trig_eval(F, t, deriv=0):
    a0, c2, c4 = F
    out = np.zeros_like(t) if deriv else a0 + 0 * t
    for k, c in ((2, c2), (4, c4)):
        e = np.exp(1j * k * t)
        out = out + np.real(c * (1j * k) ** deriv * e)
    return out


def _optimize_quartic(Rt, X, maximize, gtol, max_iter):
    """Projected gradient on the sphere with exact line search along great circles.

    The restriction of the quartic to a great circle is a trigonometric
    polynomial; its optimum is located on a grid and polished by Newton steps
    on the derivative, which keeps the iteration accurate near flat optima.
    """
    sgn = 1.0 if maximize else -1.0
    scale = max(1.0, float(np.max(np.abs(Rt))))
    grid = np.linspace(-np.pi / 2, np.pi / 2, 181)
    it = 0
    gn = np.full(len(X), np.inf)
    for it in range(1, max_iter + 1):
        G = _quartic_grad(Rt, X)
        G = G - np.real(np.einsum("mi,mi->m", X.conj(), G))[:, None] * X
        gn = np.linalg.norm(G, axis=1)
        if np.all(gn < gtol * scale):
            break
        active = gn >= gtol * scale
        D = G - np.einsum("mi,mi->m", X.conj(), G)[:, None] * X
        dn = np.linalg.norm(D, axis=1)
        active &= dn > 0
        D = np.where(active[:, None], D / np.where(active, dn, 1.0)[:, None], 0.0)
        F = _trig_fourier(Rt, X, D)
        vals = sgn * _trig_eval(tuple(f[:, None] for f in F), grid[None, :])
        t = grid[np.argmax(vals, axis=1)]
        for _ in range(8):
            d1 = _trig_eval(F, t, 1)
            d2 = _trig_eval(F, t, 2)
            ok = sgn * d2 < 0
            t = np.where(ok, t - d1 / np.where(ok, d2, 1.0), t)
        Xn = np.cos(t)[:, None] * X + np.sin(t)[:, None] * D
        Xn /= np.linalg.norm(Xn, axis=1, keepdims=True)
        X = np.where(active[:, None], Xn, X)
    return X, gn < gtol * scale, it


def hsc_extrema_tensor(T: CurvatureTensor, config: OptimizerConfig = OptimizerConfig()) -> Extrema:
    Rt = T.orthonormal()
    n = T.dim
    if n == 1:
        v = float(np.real(Rt[0, 0, 0, 0]))
        return Extrema(v, v, True, True, 0, v, v, [v])
    (X,) = _random_units(config.pair_samples, n, config.seed + 1, 1)
    vals = _quartic(Rt, X)
    order = np.argsort(vals, kind="stable")
    k = min(config.restarts, len(vals))
    out = {}
    iters = 0
    for maximize, idx in ((True, order[::-1][:k]), (False, order[:k])):
        Xo, conv, it = _optimize_quartic(Rt, X[idx], maximize, config.gtol, config.max_iter)
        v = _quartic(Rt, Xo)
        out[maximize] = (float(v.max() if maximize else v.min()), bool(np.all(conv)))
        iters = max(iters, it)
    return Extrema(min(out[False][0], float(vals.min())), max(out[True][0], float(vals.max())),
                   out[False][1], out[True][1], iters, float(vals.min()), float(vals.max()))


def hbc_extrema(field: MetricField, z, config: OptimizerConfig = OptimizerConfig()) -> tuple[float, float]:
    e = hbc_extrema_tensor(curvature_tensor(field, z), config)
    return e.min, e.max


def hsc_extrema(field: MetricField, z, config: OptimizerConfig = OptimizerConfig()) -> tuple[float, float]:
    e = hsc_extrema_tensor(curvature_tensor(field, z), config)
    return e.min, e.max


# ---------------------------------------------------------------------------
# sweeps over sample regions
# ---------------------------------------------------------------------------


@dataclass
class PointBounds:
    index: int
    point: np.ndarray
    hbc_min: float
    hbc_max: float
    hsc_min: float | None
    hsc_max: float | None
    converged: bool
    refined: bool = False


@dataclass
class CurvatureBoundsReport:
    region: str
    seed: int
    field_name: str
    per_point: list[PointBounds]
    optimizer: OptimizerConfig
    refinement: dict = field(default_factory=dict)

    @property
    def hbc_inf(self) -> float:
        return min(p.hbc_min for p in self.per_point)

    @property
    def hbc_sup(self) -> float:
        return max(p.hbc_max for p in self.per_point)

    @property
    def hsc_inf(self):
        vals = [p.hsc_min for p in self.per_point if p.hsc_min is not None]
        return min(vals) if vals else None

    @property
    def hsc_sup(self):
        vals = [p.hsc_max for p in self.per_point if p.hsc_max is not None]
        return max(vals) if vals else None

    def optimizer_stats(self) -> dict:
        return {"restarts": self.optimizer.restarts, "points": len(self.per_point),
                "nonconverged_points": sum(1 for p in self.per_point if not p.converged),
                "config": self.optimizer.to_dict(), "refinement": self.refinement}

    def to_dict(self) -> dict:
        return {
            "region": self.region, "seed": self.seed, "field": self.field_name,
            "per_point": [{"index": p.index, "point": [[float(c.real), float(c.imag)] for c in p.point],
                           "hbc_min": p.hbc_min, "hbc_max": p.hbc_max, "hsc_min": p.hsc_min,
                           "hsc_max": p.hsc_max, "converged": p.converged, "refined": p.refined}
                          for p in self.per_point],
            "aggregate": {"hbc_inf": self.hbc_inf, "hbc_sup": self.hbc_sup,
                          "hsc_inf": self.hsc_inf, "hsc_sup": self.hsc_sup},
            "optimizer_stats": self.optimizer_stats(),
        }

    def to_csv(self) -> str:
        n = len(self.per_point[0].point) if self.per_point else 0
        cols = ["index"] + [f"{p}(z{k + 1})" for k in range(n) for p in ("re", "im")]
        lines = [",".join(cols + ["hbc_min", "hbc_max", "hsc_min", "hsc_max", "converged", "refined", "units"])]
        for p in self.per_point:
            coords = [repr(float(v)) for c in p.point for v in (c.real, c.imag)]
            vals = [repr(p.hbc_min), repr(p.hbc_max),
                    "" if p.hsc_min is None else repr(p.hsc_min), "" if p.hsc_max is None else repr(p.hsc_max),
                    str(p.converged).lower(), str(p.refined).lower(), "curvature (Riemannian normalization)"]
            lines.append(",".join([str(p.index)] + coords + vals))
        return "\n".join(lines) + "\n"


def point_bounds(field: MetricField, z, index: int, config: OptimizerConfig) -> PointBounds:
    T = curvature_tensor(field, z)
    e = hbc_extrema_tensor(T, config)
    smin = smax = None
    conv = e.converged
    if config.with_hsc:
        s = hsc_extrema_tensor(T, config)
        smin, smax = s.min, s.max
        conv = conv and s.converged
    return PointBounds(index, np.asarray(z, dtype=complex), e.min, e.max, smin, smax, conv)


def refine_extremum(fun: Callable[[np.ndarray], float], starts, project: Callable[[np.ndarray], np.ndarray],
                    maximize: bool = True, xatol: float = 1e-7, fatol: float = 1e-12,
                    max_evals: int = 400) -> tuple[np.ndarray, float]:
    """Local refinement of a pointwise quantity over a region (Nelder-Mead on projected points).

    Returns the best point found (already projected into the region) and its
    value; never worse than the best start.
    """
    sgn = -1.0 if maximize else 1.0
    best_z, best_v = None, None
    for z0 in starts:
        z0 = project(np.asarray(z0, dtype=complex))
        v0 = fun(z0)
        if best_v is None or sgn * v0 < sgn * best_v:
            best_z, best_v = z0, v0

        def obj(x):
            z = project(from_real(x))
            try:
                return sgn * fun(z)
            except (CurvatureError, JetError, ValueError):
                return math.inf

        res = optimize.minimize(obj, to_real(z0), method="Nelder-Mead",
                                options={"xatol": xatol, "fatol": fatol, "maxfev": max_evals,
                                         "initial_simplex": to_real(z0)[None] + 0.02 * np.vstack(
                                             [np.zeros(2 * len(z0)), np.eye(2 * len(z0))])})
        z = project(from_real(res.x))
        v = fun(z)
        if sgn * v < sgn * best_v:
            best_z, best_v = z, v
    return best_z, best_v


def hbc_bounds_on_set(field: MetricField, samples: SampleSet,
                      config: OptimizerConfig = OptimizerConfig(),
                      project: Callable[[np.ndarray], np.ndarray] | None = None,
                      refine_top: int = 2, refine: tuple[str, ...] = ("max", "min"),
                      max_evals: int = 300) -> CurvatureBoundsReport:
    """Per-point HBC (and HSC) extrema aggregated over a sample region.

    With a region projector the aggregate sup and inf of HBC are refined by a
    local search over the region started from the ``refine_top`` best samples;
    refined points are appended to the report, so refinement only widens the
    reported range.
    """
    if len(samples) == 0:
        raise CurvatureError("empty sample set")
    per = [point_bounds(field, z, i, config) for i, z in enumerate(samples.points)]
    info = {}
    if project is not None:
        inner = OptimizerConfig(restarts=4, gtol=config.gtol, max_iter=config.max_iter,
                                pair_samples=64, seed=config.seed, with_hsc=False)
        for maximize, key in ((True, "hbc_max"), (False, "hbc_min")):
            if key[4:] not in refine:
                continue
            ranked = sorted(per, key=lambda p: getattr(p, key), reverse=maximize)[:refine_top]

            side = key[4:]
            state = {}

            def fun(z, side=side, state=state):
                e = hbc_extrema_tensor(curvature_tensor(field, z), inner, sides=(side,), warm=state or None)
                state[side] = e.argopt[side]
                return e.max if side == "max" else e.min

            zbest, _ = refine_extremum(fun, [p.point for p in ranked], project, maximize,
                                       max_evals=max_evals)
            pb = point_bounds(field, zbest, len(per), config)
            pb.refined = True
            per.append(pb)
            info[key] = {"point": [[float(c.real), float(c.imag)] for c in zbest],
                         "value": getattr(pb, key)}
    return CurvatureBoundsReport(samples.region, samples.seed, field.name, per, config, info)


# ---------------------------------------------------------------------------
# holomorphic maps, the disc formula and the Schwarz lemma
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HolomorphicMap:
    """A holomorphic map ``f`` from a domain in C^m to C^n given in closed form.

    ``jacobian(zeta)[a, i] = d f_a / d zeta_i``.
    """

    source_dim: int
    target_dim: int
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    name: str = "f"

    def cr_residual(self, zeta, step: float = 1e-3) -> float:
        """Mismatch between the realified numeric Jacobian and the complex-linear one."""
        zeta = as_point(zeta, self.source_dim)
        m = self.source_dim
        x0 = to_real(zeta)
        cols = []
        for a in range(2 * m):
            e = np.zeros(2 * m)
            e[a] = step
            f = lambda t: to_real(np.asarray(self.value(from_real(x0 + t * e)), dtype=complex))  # noqa: E731
            cols.append((-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * step))
        numeric = np.stack(cols, axis=1)
        J = np.asarray(self.jacobian(zeta), dtype=complex)
        expected = np.block([[J.real, -J.imag], [J.imag, J.real]])
        return float(np.max(np.abs(numeric - expected)))


def linear_map(A, b=None, name: str = "linear") -> HolomorphicMap:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n, m = A.shape
    b = np.zeros(n, dtype=complex) if b is None else np.asarray(b, dtype=complex)
    return HolomorphicMap(m, n, lambda z: A @ z + b, lambda z: A, name)


def identity_map(n: int) -> HolomorphicMap:
    return linear_map(np.eye(n), name="identity")


def slice_map(n: int, k: int = 0) -> HolomorphicMap:
    """``zeta -> zeta * e_k`` from the disc into C^n."""
    A = np.zeros((n, 1), dtype=complex)
    A[k, 0] = 1.0
    return linear_map(A, name=f"slice_e{k + 1}")


def constant_map(p, m: int) -> HolomorphicMap:
    p = np.asarray(p, dtype=complex)
    return HolomorphicMap(m, p.size, lambda z: p.copy(), lambda z: np.zeros((p.size, m), complex), "constant")


def rescaled(f: HolomorphicMap, c: complex) -> HolomorphicMap:
    """``zeta -> f(c zeta)``."""
    return HolomorphicMap(f.source_dim, f.target_dim, lambda z: f.value(c * z),
                          lambda z: c * np.asarray(f.jacobian(c * z)), f"{f.name}(c*z)")


def energy_density(f: HolomorphicMap, h: MetricField, zeta) -> float:
    """``u_h = |df(d/dzeta)|_h^2`` for a map from the disc."""
    X = np.asarray(f.jacobian(zeta), dtype=complex)[:, 0]
    H = h.metric(f.value(zeta))
    return float(np.real(X @ H @ X.conj()))


def chern_lu_residual(f: HolomorphicMap, h: MetricField, step: float = 1e-3) -> dict:
    """Compare ``-2/|X|^2 ddbar log u_h(0)`` with the tensor HSC of ``X = f'(0)``.

    The complex Laplacian at 0 is ``d^2/dz dzbar = (1/4)(d_xx + d_yy)``, taken
    with fourth-order central differences.
    """
    if f.source_dim != 1:
        raise CurvatureError("the disc formula needs a map from a disc")
    zero = np.zeros(1, dtype=complex)
    u0 = energy_density(f, h, zero)
    if not u0 > 0:
        raise CurvatureError("vanishing differential: u_h(0) = 0")
    lu = lambda w: math.log(energy_density(f, h, np.array([w])))  # noqa: E731
    lap = 0.0
    for d in (1.0, 1j):
        lap += (-lu(2 * step * d) + 16 * lu(step * d) - 30 * lu(0) + 16 * lu(-step * d)
                - lu(-2 * step * d)) / (12 * step ** 2)
    lhs = -2.0 / u0 * (0.25 * lap)
    X = np.asarray(f.jacobian(zero), dtype=complex)[:, 0]
    rhs = curvature_tensor(h, f.value(zero)).hsc(X)
    return {"map": f.name, "metric": h.name, "lhs": lhs, "rhs": rhs, "residual": abs(lhs - rhs)}


def pullback(f: HolomorphicMap, h: MetricField, zeta) -> np.ndarray:
    """``(f^* h)_{i jbar} = sum h_{a bbar} J_{a i} conj(J_{b j})``."""
    J = np.asarray(f.jacobian(zeta), dtype=complex)
    H = h.metric(f.value(zeta))
    return J.T @ H @ J.conj()


def schwarz_yau_check(f: HolomorphicMap, g: MetricField, h: MetricField, C: float, A: float,
                      samples, tol: float = 1e-9) -> dict:
    """Check ``f^* h <= (C/A) g`` through the largest eigenvalue of the pencil ``(f^*h, g)``.

    ``C`` bounds ``-Ric(g)`` from above and ``A`` bounds ``-HBC(h)`` from below;
    both are supplied by the caller.
    """
    if f.source_dim != g.dim or f.target_dim != h.dim:
        raise CurvatureError("inconsistent dimensions between map and metrics")
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=complex)
    if not (A > 0 and C >= 0):
        return {"status": "inapplicable", "reason": "need A > 0 and C >= 0", "passed": None}
    bound = C / A
    worst = -math.inf
    rows = []
    for z in pts:
        P = pullback(f, h, z)
        G = g.metric(z)
        lam = float(sla.eigh(P, G, eigvals_only=True)[-1])
        worst = max(worst, lam)
        rows.append(lam)
    margin = bound - worst
    return {"status": "checked", "bound": bound, "max_pencil": worst, "ratio": worst / bound if bound else math.inf,
            "margin": margin, "passed": margin >= -tol, "per_point": rows}

"""Bounded domains in C^n: membership, boundary distance, diameter and sampling.

Points are plain complex numpy arrays of shape ``(n,)``; batches of points are
arrays of shape ``(m, n)``.  Every domain type is an immutable dataclass and all
functions here are pure.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm, qmc


class DomainError(ValueError):
    """Raised for invalid domain queries (dimension mismatch, point outside)."""


class EmptyRegionError(DomainError):
    """Raised when a requested sample region contains no points."""


def as_point(z, n: int | None = None) -> np.ndarray:
    """Coerce ``z`` to a finite complex vector, optionally checking its dimension."""
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"a point must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("point has non-finite coordinates")
    if n is not None and arr.size != n:
        raise DomainError(f"dimension mismatch: expected {n}, got {arr.size}")
    return arr


def to_real(z: np.ndarray) -> np.ndarray:
    """``(..., n)`` complex -> ``(..., 2n)`` real as ``[Re z, Im z]``."""
    return np.concatenate([z.real, z.imag], axis=-1)


def from_real(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def sphere_directions(count: int, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors in R^dim (Halton pushed through the normal ppf)."""
    u = qmc.Halton(d=dim, scramble=True, seed=seed).random(count)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    v = norm.ppf(u)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# domain variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Domain:
    """Common behaviour; subclasses implement ``_inside`` and the box."""

    smoothness: str = field(default="", kw_only=True)

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def bounding_box(self) -> np.ndarray:
        """Real box of shape ``(2n, 2)`` (rows ordered as ``[Re z, Im z]``)."""
        raise NotImplementedError

    def _inside(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def interior_point(self) -> np.ndarray:
        return np.zeros(self.dim, dtype=complex)

    def farthest_modulus(self) -> float:
        """Upper bound for ``max |z|`` over the closure."""
        box = self.bounding_box()
        return float(np.sqrt(np.sum(np.max(np.abs(box), axis=1) ** 2)))

    def to_dict(self) -> dict:
        raise NotImplementedError


def _encode_complex(z) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(z, dtype=complex)]


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.size

    def bounding_box(self):
        c = to_real(self.center)
        return np.stack([c - self.radius, c + self.radius], axis=1)

    def _inside(self, z):
        return np.linalg.norm(z - self.center, axis=-1) < self.radius

    def interior_point(self):
        return self.center.copy()

    def farthest_modulus(self):
        return float(np.linalg.norm(self.center) + self.radius)

    def to_dict(self):
        return {"variant": "ball", "center": _encode_complex(self.center), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class Polydisc(Domain):
    center: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        radii = np.asarray(self.radii, dtype=float).reshape(-1)
        if radii.size != self.center.size:
            raise DomainError("polydisc needs one radius per coordinate")
        if np.any(radii <= 0):
            raise DomainError("polydisc radii must be positive")
        object.__setattr__(self, "radii", radii)

    @property
    def dim(self):
        return self.center.size

    def bounding_box(self):
        c = to_real(self.center)
        r = np.concatenate([self.radii, self.radii])
        return np.stack([c - r, c + r], axis=1)

    def _inside(self, z):
        return np.all(np.abs(z - self.center) < self.radii, axis=-1)

    def interior_point(self):
        return self.center.copy()

    def farthest_modulus(self):
        return float(np.sqrt(np.sum((np.abs(self.center) + self.radii) ** 2)))

    def to_dict(self):
        return {"variant": "polydisc", "center": _encode_complex(self.center),
                "radii": [float(r) for r in self.radii]}


@dataclass(frozen=True, eq=False)
class Reinhardt(Domain):
    """Complete Reinhardt domain ``{z : profile(|z_1|, ..., |z_n|) < 0}``.

    ``profile`` must be vectorized over leading axes and nondecreasing in each
    modulus (completeness); ``bounding_radii`` bound each modulus.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    bounding_radii: np.ndarray
    spec: dict | None = None

    def __post_init__(self):
        radii = np.asarray(self.bounding_radii, dtype=float).reshape(-1)
        if np.any(radii <= 0):
            raise DomainError("bounding radii must be positive")
        object.__setattr__(self, "bounding_radii", radii)

    @property
    def dim(self):
        return self.bounding_radii.size

    def bounding_box(self):
        r = np.concatenate([self.bounding_radii, self.bounding_radii])
        return np.stack([-r, r], axis=1)

    def _inside(self, z):
        return np.asarray(self.profile(np.abs(z))) < 0

    def farthest_modulus(self):
        return float(np.linalg.norm(self.bounding_radii))

    def to_dict(self):
        if self.spec is None:
            raise DomainError("this Reinhardt domain was built from a callable and has no JSON form")
        return dict(self.spec)


def lp_reinhardt(exponents: Sequence[float], radii: Sequence[float]) -> Reinhardt:
    """``sum_i (|z_i|/a_i)^{p_i} < 1``; unit ball for p=2, a=1."""
    p = np.asarray(exponents, dtype=float)
    a = np.asarray(radii, dtype=float)
    if p.shape != a.shape or np.any(p <= 0):
        raise DomainError("exponents and radii must match and be positive")

    def profile(r):
        return np.sum((np.asarray(r) / a) ** p, axis=-1) - 1.0

    spec = {"variant": "reinhardt", "profile": "lp", "exponents": p.tolist(), "radii": a.tolist()}
    return Reinhardt(profile=profile, bounding_radii=a, spec=spec, smoothness="C^1 if all p >= 1")


@dataclass(frozen=True, eq=False)
class DefiningDomain(Domain):
    """``{z in box : rho(z) < 0}``; no pseudoconvexity check is made."""

    rho: Callable[[np.ndarray], np.ndarray]
    box: np.ndarray
    spec: dict | None = None

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] % 2:
            raise DomainError("box must have shape (2n, 2)")
        if np.any(box[:, 0] >= box[:, 1]):
            raise DomainError("box lower bounds must be below upper bounds")
        object.__setattr__(self, "box", box)

    @property
    def dim(self):
        return self.box.shape[0] // 2

    def bounding_box(self):
        return self.box.copy()

    def _inside(self, z):
        x = to_real(z)
        in_box = np.all((x > self.box[:, 0]) & (x < self.box[:, 1]), axis=-1)
        return in_box & (np.asarray(self.rho(z)) < 0)

    def interior_point(self):
        c = from_real(self.box.mean(axis=1))
        if self._inside(c[None])[0]:
            return c
        pts = _halton_box(self.box, 4096, seed=0)
        hits = pts[self._inside(pts)]
        if len(hits) == 0:
            raise EmptyRegionError("could not locate an interior point of the defining domain")
        return hits[0]

    def to_dict(self):
        if self.spec is None:
            raise DomainError("this domain was built from a callable and has no JSON form")
        return dict(self.spec)


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------


def contains(domain: Domain, z) -> bool:
    """Strict membership ``z in Omega``."""
    z = as_point(z, domain.dim)
    return bool(domain._inside(z[None])[0])


def contains_many(domain: Domain, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=complex)
    if pts.shape[-1] != domain.dim:
        raise DomainError("dimension mismatch")
    return np.asarray(domain._inside(pts), dtype=bool)


_RAY_DIRECTIONS = 512
_RAY_GRID = 96
_BISECT_STEPS = 48


def _ray_exit(domain: Domain, z: np.ndarray, dirs: np.ndarray, tmax: float) -> np.ndarray:
    """Exit distance along each real direction (grid march + bisection)."""
    ts = np.linspace(0.0, tmax, _RAY_GRID + 1)[1:]
    cdirs = from_real(dirs)
    pts = z[None, None, :] + ts[None, :, None] * cdirs[:, None, :]
    inside = domain._inside(pts)
    first_out = np.argmax(~inside, axis=1)
    never_out = np.all(inside, axis=1)
    hi = np.where(never_out, tmax, ts[first_out])
    lo = np.where(first_out > 0, ts[np.maximum(first_out - 1, 0)], 0.0)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        ok = domain._inside(z[None, :] + mid[:, None] * cdirs)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return hi


def boundary_distance_estimate(domain: Domain, z) -> tuple[float, float]:
    """Euclidean distance to the boundary and an error estimate.

    Exact (error 0) for balls and polydiscs.  Otherwise the distance is found by
    marching rays in 512 quasi-uniform directions and bisecting the exit point;
    the reported error combines the bisection width and the angular resolution
    of the direction net.
    """
    z = as_point(z, domain.dim)
    if not contains(domain, z):
        raise DomainError("boundary_distance requires an interior point")
    if isinstance(domain, Ball):
        return float(domain.radius - np.linalg.norm(z - domain.center)), 0.0
    if isinstance(domain, Polydisc):
        return float(np.min(domain.radii - np.abs(z - domain.center))), 0.0
    box = domain.bounding_box()
    tmax = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    dirs = sphere_directions(_RAY_DIRECTIONS, 2 * domain.dim, seed=7)
    dirs = np.concatenate([dirs, np.eye(2 * domain.dim), -np.eye(2 * domain.dim)])
    t = _ray_exit(domain, z, dirs, tmax)
    d = float(np.min(t))
    # covering angle of the direction net, estimated from nearest-neighbour gaps
    cosines = dirs @ dirs.T
    np.fill_diagonal(cosines, -1.0)
    theta = float(np.max(np.arccos(np.clip(np.max(cosines, axis=1), -1, 1))))
    tol = d * (1.0 - math.cos(theta)) + tmax * 2.0 ** (-_BISECT_STEPS) * 2
    return d, tol


def boundary_distance(domain: Domain, z) -> float:
    """``d(z, boundary)``; see :func:`boundary_distance_estimate` for accuracy."""
    return boundary_distance_estimate(domain, z)[0]


def _boundary_distance_many(domain: Domain, pts: np.ndarray) -> np.ndarray:
    if isinstance(domain, Ball):
        return domain.radius - np.linalg.norm(pts - domain.center, axis=-1)
    if isinstance(domain, Polydisc):
        return np.min(domain.radii - np.abs(pts - domain.center), axis=-1)
    return np.array([boundary_distance(domain, p) for p in pts])


def diameter_estimate(domain: Domain) -> tuple[float, str]:
    """Diameter and the direction of the bound: ``"exact"`` or ``"lower"``.

    For general variants boundary points are located by rays from an interior
    point and the largest pairwise distance is returned, which can only
    underestimate the true diameter.
    """
    if isinstance(domain, Ball):
        return 2.0 * float(domain.radius), "exact"
    if isinstance(domain, Polydisc):
        return 2.0 * float(np.sqrt(np.sum(domain.radii ** 2))), "exact"
    box = domain.bounding_box()
    tmax = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    z0 = domain.interior_point()
    dirs = sphere_directions(2048, 2 * domain.dim, seed=11)
    dirs = np.concatenate([dirs, np.eye(2 * domain.dim), -np.eye(2 * domain.dim)])
    t = _ray_exit(domain, z0, dirs, tmax)
    bpts = to_real(z0)[None] + t[:, None] * dirs
    sq = np.sum(bpts ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2 * bpts @ bpts.T
    return float(np.sqrt(max(np.max(d2), 0.0))), "lower"


def diameter(domain: Domain) -> float:
    return diameter_estimate(domain)[0]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Ordered sample points tagged with the region they discretize."""

    points: np.ndarray
    seed: int
    tag: str
    params: tuple = ()

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def region(self) -> str:
        if not self.params:
            return self.tag
        return f"{self.tag}({', '.join(f'{p:g}' for p in self.params)})"

    def union(self, other: "SampleSet", tag: str = "union") -> "SampleSet":
        return SampleSet(np.concatenate([self.points, other.points]), self.seed, tag,
                         self.params + other.params)

    def to_csv(self) -> str:
        n = self.dim
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = []
        for k in range(1, n + 1):
            header += [f"re(z{k})", f"im(z{k})"]
        w.writerow(header + ["tag", "seed", "units"])
        for p in self.points:
            row = []
            for c in p:
                row += [repr(float(c.real)), repr(float(c.imag))]
            w.writerow(row + [self.region, self.seed, "euclidean coordinates"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampleSet":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        ncoord = sum(1 for h in header if h.startswith("re("))
        pts = np.array([[float(r[2 * k]) + 1j * float(r[2 * k + 1]) for k in range(ncoord)] for r in body])
        seed = int(body[0][2 * ncoord + 1]) if body else 0
        tag = body[0][2 * ncoord] if body else "global"
        return cls(pts.reshape(-1, ncoord), seed, tag)


def _halton_box(box: np.ndarray, count: int, seed: int, skip: int = 0) -> np.ndarray:
    eng = qmc.Halton(d=box.shape[0], scramble=True, seed=seed)
    if skip:
        eng.fast_forward(skip)
    u = eng.random(count)
    return from_real(box[:, 0] + u * (box[:, 1] - box[:, 0]))


_MAX_DRAWS = 400_000


def _rejection_sample(domain, box, accept, density, seed, batch=4096):
    taken = []
    drawn = 0
    while sum(len(t) for t in taken) < density and drawn < _MAX_DRAWS:
        cand = _halton_box(box, batch, seed, skip=drawn)
        drawn += batch
        cand = cand[contains_many(domain, cand)]
        if len(cand):
            cand = cand[accept(cand)]
        taken.append(cand)
    pts = np.concatenate(taken) if taken else np.empty((0, domain.dim), complex)
    return pts[:density]


def _sub_box(domain: Domain, shrink: float) -> np.ndarray:
    box = domain.bounding_box()
    if isinstance(domain, (Ball, Polydisc)):
        mid = box.mean(axis=1, keepdims=True)
        half = (box[:, 1:] - box[:, :1]) / 2 - shrink
        return np.concatenate([mid - half, mid + half], axis=1)
    return box


def sample_compact(domain: Domain, delta: float, density: int, seed: int = 0) -> SampleSet:
    """Low-discrepancy points of ``K_delta = {z : d(z, boundary) >= delta}``."""
    if delta <= 0 or density <= 0:
        raise DomainError("delta and density must be positive")
    box = _sub_box(domain, delta)
    if np.any(box[:, 1] <= box[:, 0]):
        raise EmptyRegionError(f"K_delta is empty for delta={delta}")
    pts = _rejection_sample(domain, box, lambda c: _boundary_distance_many(domain, c) >= delta,
                            density, seed)
    if len(pts) == 0:
        raise EmptyRegionError(f"no samples found in K_delta for delta={delta}")
    return SampleSet(pts, seed, "compact", (float(delta),))


def sample_collar(domain: Domain, delta_out: float, delta_in: float, density: int,
                  seed: int = 0) -> SampleSet:
    """Points with ``delta_out <= d(z, boundary) <= delta_in``."""
    if not 0 < delta_out < delta_in:
        raise DomainError("collar requires 0 < delta_out < delta_in")
    if density <= 0:
        raise DomainError("density must be positive")
    box = _sub_box(domain, delta_out)

    def accept(c):
        d = _boundary_distance_many(domain, c)
        return (d >= delta_out) & (d <= delta_in)

    pts = _rejection_sample(domain, box, accept, density, seed)
    if len(pts) == 0:
        raise EmptyRegionError("collar region is empty")
    return SampleSet(pts, seed, "collar", (float(delta_out), float(delta_in)))


def sample_global(domain: Domain, density: int, seed: int = 0) -> SampleSet:
    pts = _rejection_sample(domain, domain.bounding_box(), lambda c: np.ones(len(c), bool),
                            density, seed)
    if len(pts) == 0:
        raise EmptyRegionError("no interior samples found")
    return SampleSet(pts, seed, "global")


def squeezing_lower_bound(domain: Domain, z) -> dict:
    """Lower bound ``d(z, boundary) / diam`` for the squeezing function at ``z``.

    When the diameter is only estimated from below the ratio is reported with
    ``diameter_kind = "lower"`` and is then not guaranteed to be a lower bound.
    """
    z = as_point(z, domain.dim)
    if not contains(domain, z):
        raise DomainError("point is not in the domain")
    d = boundary_distance(domain, z)
    diam, kind = diameter_estimate(domain)
    out = {"distance": d, "diameter": diam, "diameter_kind": kind, "bound": d / diam}
    if isinstance(domain, Ball):
        out["exact"] = 1.0
    return out


# ---------------------------------------------------------------------------
# projection onto sample regions (used by extremum refinement)
# ---------------------------------------------------------------------------


def region_projector(domain: Domain, lo: float, hi: float) -> Callable[[np.ndarray], np.ndarray] | None:
    """Map a point to the nearest point with ``lo <= d(z, boundary) <= hi``.

    Only available for balls and polydiscs; returns None otherwise.
    """
    if isinstance(domain, Ball):
        c, R = domain.center, domain.radius

        def project(z):
            w = z - c
            r = np.linalg.norm(w)
            target = min(max(r, R - hi), R - lo)
            if r == 0:
                if target == 0:
                    return z
                w = np.zeros_like(w)
                w[0] = 1.0
                r = 1.0
            return c + w * (target / r)

        return project
    if isinstance(domain, Polydisc):
        c, radii = domain.center, domain.radii

        def project(z):
            w = z - c
            mod = np.abs(w)
            mod = np.minimum(mod, radii - lo)
            gaps = radii - mod
            if np.min(gaps) > hi:
                k = int(np.argmin(gaps))
                mod[k] = radii[k] - hi
            phase = np.where(np.abs(w) > 0, w / np.where(np.abs(w) > 0, np.abs(w), 1), 1.0)
            return c + mod * phase

        return project
    return None


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------


def decode_complex_vector(values) -> np.ndarray:
    """Accept ``[x, ...]`` (reals) or ``[[re, im], ...]`` pairs."""
    out = []
    for v in values:
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise DomainError(f"complex entries must be [re, im] pairs, got {v!r}")
            out.append(complex(float(v[0]), float(v[1])))
        else:
            out.append(complex(float(v)))
    return np.array(out, dtype=complex)


_RHO_NAMESPACE = {"np": np, "abs": np.abs, "sqrt": np.sqrt, "exp": np.exp, "log": np.log}


def domain_from_dict(cfg: dict) -> Domain:
    """Build a domain from its JSON description."""
    variant = cfg.get("variant")
    if variant == "ball":
        dim = cfg.get("dim")
        center = decode_complex_vector(cfg["center"]) if "center" in cfg else np.zeros(int(dim))
        return Ball(center, float(cfg.get("radius", 1.0)))
    if variant == "polydisc":
        radii = np.asarray(cfg["radii"], dtype=float)
        center = decode_complex_vector(cfg["center"]) if "center" in cfg else np.zeros(len(radii))
        return Polydisc(center, radii)
    if variant == "reinhardt":
        if cfg.get("profile", "lp") != "lp":
            raise DomainError(f"unknown Reinhardt profile {cfg.get('profile')!r}")
        return lp_reinhardt(cfg["exponents"], cfg["radii"])
    if variant == "defining":
        expr = cfg["rho"]
        code = compile(expr, "<rho>", "eval")

        def rho(z):
            return eval(code, dict(_RHO_NAMESPACE), {"z": np.moveaxis(np.asarray(z), -1, 0)})

        return DefiningDomain(rho=rho, box=np.asarray(cfg["box"], dtype=float), spec=dict(cfg))
    raise DomainError(f"unknown domain variant {variant!r}")

"""Metric jets: the metric matrix with its first and mixed second Wirtinger derivatives.

Index conventions (``h[i, j]`` is ``h_{i jbar}``)::

    dh[i, j, k]         = d/dz_k      h_{i jbar}
    dbar_h[i, j, l]     = d/dzbar_l   h_{i jbar}
    ddbar_h[i, j, k, l] = d/dz_k d/dzbar_l h_{i jbar}

A :class:`MetricField` produces jets either from closed-form expressions or by
central finite differences of a real Kähler potential ``phi`` with
``h_{i jbar} = d^2 phi / dz_i dzbar_j``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .domains import DomainError, as_point, from_real, to_real

HERMITIAN_TOL = 1e-12


class JetError(ValueError):
    """Raised when a jet cannot be produced or fails the metric axioms."""


class NotPositiveDefiniteError(JetError):
    def __init__(self, min_eig: float, where=None):
        self.min_eig = float(min_eig)
        msg = f"metric is not positive definite (smallest eigenvalue {self.min_eig:.3e})"
        if where is not None:
            msg += f" at z={np.round(where, 6).tolist()}"
        super().__init__(msg)


@dataclass(frozen=True, eq=False)
class MetricJet:
    point: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    dbar_h: np.ndarray
    ddbar_h: np.ndarray
    tol: float = 0.0

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    def __add__(self, other: "MetricJet") -> "MetricJet":
        return MetricJet(self.point, self.h + other.h, self.dh + other.dh,
                         self.dbar_h + other.dbar_h, self.ddbar_h + other.ddbar_h,
                         self.tol + other.tol)

    def scaled(self, lam: float) -> "MetricJet":
        return MetricJet(self.point, lam * self.h, lam * self.dh, lam * self.dbar_h,
                         lam * self.ddbar_h, abs(lam) * self.tol)

    def symmetry_defects(self) -> dict[str, float]:
        """Residuals of the conjugation symmetries every Hermitian jet satisfies."""
        return {
            "hermitian": float(np.max(np.abs(self.h - self.h.conj().T))),
            "dbar": float(np.max(np.abs(self.dbar_h - np.conj(np.transpose(self.dh, (1, 0, 2)))))),
            "ddbar": float(np.max(np.abs(self.ddbar_h - np.conj(np.transpose(self.ddbar_h, (1, 0, 3, 2)))))),
        }

    def kahler_defect(self) -> float:
        """``max |d_k h_{i jbar} - d_i h_{k jbar}|``; zero for Kähler metrics."""
        return float(np.max(np.abs(self.dh - np.transpose(self.dh, (2, 1, 0)))))

    def to_dict(self) -> dict:
        def enc(a):
            a = np.asarray(a, dtype=complex).reshape(-1)
            return [[float(v.real), float(v.imag)] for v in a]

        return {
            "point": enc(self.point),
            "shape": {"h": list(self.h.shape), "dh": list(self.dh.shape),
                      "dbar_h": list(self.dbar_h.shape), "ddbar_h": list(self.ddbar_h.shape)},
            "h": enc(self.h), "dh": enc(self.dh), "dbar_h": enc(self.dbar_h),
            "ddbar_h": enc(self.ddbar_h), "tol": self.tol,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def zero_jet(z: np.ndarray) -> MetricJet:
    n = len(z)
    c = complex
    return MetricJet(z, np.zeros((n, n), c), np.zeros((n, n, n), c), np.zeros((n, n, n), c),
                     np.zeros((n, n, n, n), c))


def validate_positive_definite(jet: MetricJet) -> float:
    """Smallest eigenvalue of ``jet.h``; raises unless the jet is a metric."""
    herm = float(np.max(np.abs(jet.h - jet.h.conj().T)))
    if herm > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(jet.h)))):
        raise JetError(f"metric matrix is not Hermitian (defect {herm:.3e})")
    lam = float(np.linalg.eigvalsh(jet.h)[0])
    if not lam > 0:
        raise NotPositiveDefiniteError(lam, jet.point)
    return lam


# ---------------------------------------------------------------------------
# finite differences of a potential
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _stencil(d: int, order: int):
    """Composed central-difference stencils for all derivative multisets of ``order``."""
    combos = list(itertools.combinations_with_replacement(range(d), order))
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=order)))
    weights = np.prod(signs, axis=1)
    offsets = np.zeros((len(combos), len(signs), d))
    for c, idx in enumerate(combos):
        for m, a in enumerate(idx):
            offsets[c, :, a] += signs[:, m]
    return combos, offsets, weights


def _full_tensor(combos, values, d, order):
    t = np.zeros((d,) * order)
    for idx, v in zip(combos, values):
        for perm in set(itertools.permutations(idx)):
            t[perm] = v
    return t


def _real_derivatives(phi, x0: np.ndarray, s: float):
    """Real derivative tensors of orders 2, 3, 4 at ``x0`` with step ``s``."""
    d = x0.size
    parts, shapes = [], []
    for order in (2, 3, 4):
        combos, offsets, weights = _stencil(d, order)
        parts.append(x0 + s * offsets.reshape(-1, d))
        shapes.append((combos, offsets.shape[:2], weights, order))
    pts = np.concatenate(parts)
    vals = np.asarray(phi(from_real(pts)), dtype=float)
    out, start = [], 0
    for combos, shape, weights, order in shapes:
        m = shape[0] * shape[1]
        v = vals[start:start + m].reshape(shape)
        start += m
        deriv = (v @ weights) / (2.0 * s) ** order
        out.append(_full_tensor(combos, deriv, d, order))
    return out


def _wirtinger(n: int):
    W = np.zeros((n, 2 * n), dtype=complex)
    for j in range(n):
        W[j, j] = 0.5
        W[j, n + j] = -0.5j
    return W, W.conj()


def _jet_arrays(D2, D3, D4, n):
    W, Wb = _wirtinger(n)
    h = np.einsum("ab,ia,jb->ij", D2, W, Wb)
    dh = np.einsum("abc,ia,jb,kc->ijk", D3, W, Wb, W)
    dbar = np.einsum("abc,ia,jb,lc->ijl", D3, W, Wb, Wb)
    ddbar = np.einsum("abcd,ia,jb,kc,ld->ijkl", D4, W, Wb, W, Wb)
    return h, dh, dbar, ddbar


STENCIL_REACH = 4.0  # farthest stencil point, in units of the step


def default_step(z: np.ndarray) -> float:
    return float(np.finfo(float).eps ** (1 / 6) * max(1.0, float(np.linalg.norm(z))))


def jet_from_potential(phi: Callable[[np.ndarray], np.ndarray], z, step: float | None = None,
                       order: int = 4, boundary_distance: float | None = None) -> MetricJet:
    """Jet of ``h = ddbar phi`` by central differences on the 2n real coordinates.

    Parameters
    ----------
    phi : callable
        Real potential, vectorized over leading axes of a complex ``(..., n)`` array.
    z : array_like
        Base point.
    step : float, optional
        Difference step; defaults to ``eps**(1/6) * max(1, |z|)``.
    order : {2, 4}
        2 uses the plain step; 4 applies one Richardson extrapolation between
        ``step`` and ``step/2``.
    boundary_distance : float, optional
        Distance from ``z`` to the singular set of ``phi``; the step is shrunk so
        the whole stencil stays within half of it.

    Returns
    -------
    MetricJet
        ``tol`` holds the largest deviation between the two step sizes plus
        the Hermitian correction applied to ``h``.
    """
    if order not in (2, 4):
        raise JetError("order must be 2 or 4")
    z = as_point(z)
    n = z.size
    s = default_step(z) if step is None else float(step)
    if not s > 0:
        raise JetError("step must be positive")
    if boundary_distance is not None:
        if not boundary_distance > 0:
            raise JetError("stencil base point is not interior")
        s = min(s, 0.5 * boundary_distance / STENCIL_REACH)
    x0 = to_real(z)
    coarse = _jet_arrays(*_real_derivatives(phi, x0, s), n)
    fine = _jet_arrays(*_real_derivatives(phi, x0, s / 2), n)
    if order == 4:
        best = tuple((4 * f - c) / 3 for f, c in zip(fine, coarse))
        ref = fine
    else:
        best, ref = coarse, fine
    if not all(np.all(np.isfinite(a)) for a in best):
        raise JetError("potential produced non-finite values on the stencil (stencil exits its domain?)")
    tol = max(float(np.max(np.abs(b - r))) for b, r in zip(best, ref))
    h, dh, dbar, ddbar = best
    h_sym = 0.5 * (h + h.conj().T)
    tol += float(np.max(np.abs(h - h_sym)))
    return MetricJet(z, h_sym, dh, dbar, ddbar, tol)


# ---------------------------------------------------------------------------
# radial potentials in closed form
# ---------------------------------------------------------------------------


def radial_potential_jet(z: np.ndarray, center: np.ndarray, scale: float,
                         derivs: Callable[[float], tuple[float, float, float, float]]) -> MetricJet:
    """Closed-form jet of ``phi(z) = F(|z - center|^2 / scale^2)``.

    ``derivs(s)`` returns ``(F', F'', F''', F'''')`` at ``s``.  The jet need not
    be positive definite (bump perturbations are not metrics on their own).
    """
    n = z.size
    w = (z - center) / scale
    s = float(np.real(np.vdot(w, w)))
    f1, f2, f3, f4 = derivs(s)
    wb = w.conj()
    eye = np.eye(n)
    r2, r3, r4 = scale ** 2, scale ** 3, scale ** 4
    h = (f1 * eye + f2 * np.outer(wb, w)) / r2
    wbw = np.outer(wb, w)  # [i, j] = wbar_i w_j
    dh = (f2 * np.einsum("k,ij->ijk", wb, eye)
          + f3 * np.einsum("k,ij->ijk", wb, wbw)
          + f2 * np.einsum("i,jk->ijk", wb, eye)) / r3
    dbar = (f2 * np.einsum("l,ij->ijl", w, eye)
            + f3 * np.einsum("l,ij->ijl", w, wbw)
            + f2 * np.einsum("il,j->ijl", eye, w)) / r3
    ddbar = (f3 * np.einsum("l,k,ij->ijkl", w, wb, eye)
             + f2 * np.einsum("kl,ij->ijkl", eye, eye)
             + f4 * np.einsum("l,k,ij->ijkl", w, wb, wbw)
             + f3 * np.einsum("kl,ij->ijkl", eye, wbw)
             + f3 * np.einsum("il,k,j->ijkl", eye, wb, w)
             + f3 * np.einsum("l,i,jk->ijkl", w, wb, eye)
             + f2 * np.einsum("il,jk->ijkl", eye, eye)) / r4
    return MetricJet(z, h.astype(complex), dh.astype(complex), dbar.astype(complex),
                     ddbar.astype(complex), 0.0)


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricField:
    """A Hermitian metric on a region of C^n that can be evaluated to jets.

    Exactly one evaluation mode is active: ``"closed_form"`` calls ``jet_fn``;
    ``"potential_fd"`` differentiates ``potential`` numerically.  ``valid``
    guards the evaluation region and ``boundary_distance`` (when known) shrinks
    finite-difference stencils near singularities of the potential.
    """

    dim: int
    name: str
    mode: str = "closed_form"
    jet_fn: Callable[[np.ndarray], MetricJet] | None = None
    potential: Callable[[np.ndarray], np.ndarray] | None = None
    kahler: bool = True
    fd_step: float | None = None
    fd_order: int = 4
    valid: Callable[[np.ndarray], bool] | None = None
    boundary_distance: Callable[[np.ndarray], float] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode == "closed_form" and self.jet_fn is None:
            raise JetError("closed_form fields need a jet function")
        if self.mode == "potential_fd" and self.potential is None:
            raise JetError("potential_fd fields need a potential")
        if self.mode not in ("closed_form", "potential_fd"):
            raise JetError(f"unknown evaluation mode {self.mode!r}")

    def _check_point(self, z) -> np.ndarray:
        z = as_point(z, self.dim)
        if self.valid is not None and not self.valid(z):
            raise DomainError(f"{self.name}: point {np.round(z, 6).tolist()} outside the field's domain")
        return z

    def raw_jet(self, z) -> MetricJet:
        """Jet without the positive-definiteness check."""
        z = self._check_point(z)
        if self.mode == "closed_form":
            return self.jet_fn(z)
        bd = self.boundary_distance(z) if self.boundary_distance is not None else None
        return jet_from_potential(self.potential, z, self.fd_step, self.fd_order, bd)

    def jet(self, z) -> MetricJet:
        jet = self.raw_jet(z)
        validate_positive_definite(jet)
        return jet

    def metric(self, z) -> np.ndarray:
        return self.jet(z).h

    def fd_jet(self, z, step: float | None = None, order: int = 4) -> MetricJet:
        if self.potential is None:
            raise JetError(f"{self.name} has no potential")
        z = self._check_point(z)
        bd = self.boundary_distance(z) if self.boundary_distance is not None else None
        return jet_from_potential(self.potential, z, step, order, bd)


def fd_cross_check(field: MetricField, z, step: float | None = None, tol: float = 1e-6) -> dict:
    """Compare a closed-form jet against finite differences of the field's potential."""
    if field.potential is None:
        raise JetError(f"{field.name} has no potential to cross-check against")
    if field.jet_fn is None:
        raise JetError(f"{field.name} has no closed form")
    z = as_point(z, field.dim)
    exact = field.jet_fn(z)
    approx = field.fd_jet(z, step)
    devs = {
        "h": float(np.max(np.abs(exact.h - approx.h))),
        "dh": float(np.max(np.abs(exact.dh - approx.dh))),
        "dbar_h": float(np.max(np.abs(exact.dbar_h - approx.dbar_h))),
        "ddbar_h": float(np.max(np.abs(exact.ddbar_h - approx.ddbar_h))),
    }
    worst = max(devs.values())
    return {"field": field.name, "max_deviation": worst, "components": devs,
            "fd_tolerance": approx.tol, "tol": tol, "passed": worst <= tol}

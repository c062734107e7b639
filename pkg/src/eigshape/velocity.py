"""Polynomial velocity fields, the monomial basis, and the H1 dual norm.

A field stores one monomial-coefficient array per component; evaluation,
Jacobian and divergence are closed-form. The basis spans both components of
every monomial of total degree <= gamma, giving q = 2*C(gamma+2, 2) fields.
The dual norm of an error vector w is sqrt(w^T K^{-1} w) with K the H1
Gramian of the basis over the (discrete) domain.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as npoly

from .mesh import Mesh
from .quadrature import physical_points

log = logging.getLogger(__name__)

_CHUNK = 200_000  # quadrature points per evaluation chunk


class FactorizationError(RuntimeError):
    """The Gramian is numerically not SPD (gamma too large for the domain)."""


@dataclass(frozen=True)
class VelocityField:
    """Vector field with polynomial components c[i, j] x1^i x2^j."""

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    name: str = ""

    @property
    def degree(self) -> int:
        return max(d for c in (self.coeffs_x, self.coeffs_y)
                   for d in [_total_degree(c)])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        x, y = points[..., 0], points[..., 1]
        return np.stack([npoly.polyval2d(x, y, self.coeffs_x),
                         npoly.polyval2d(x, y, self.coeffs_y)], axis=-1)

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        x, y = points[..., 0], points[..., 1]
        out = np.empty(points.shape[:-1] + (2, 2))
        for row, c in enumerate((self.coeffs_x, self.coeffs_y)):
            out[..., row, 0] = npoly.polyval2d(x, y, npoly.polyder(c, axis=0))
            out[..., row, 1] = npoly.polyval2d(x, y, npoly.polyder(c, axis=1))
        return out

    def divergence(self, points: np.ndarray) -> np.ndarray:
        x, y = points[..., 0], points[..., 1]
        return (npoly.polyval2d(x, y, npoly.polyder(self.coeffs_x, axis=0))
                + npoly.polyval2d(x, y, npoly.polyder(self.coeffs_y, axis=1)))


def eval_field(field: VelocityField, point) -> tuple[np.ndarray, np.ndarray, float]:
    """(V, DV, div V) at a single point."""
    p = np.asarray(point, dtype=float)
    return field.evaluate(p), field.jacobian(p), float(field.divergence(p))


def monomial_field(b1: int, b2: int, component: int) -> VelocityField:
    c = np.zeros((b1 + 1, b2 + 1))
    c[b1, b2] = 1.0
    zero = np.zeros((1, 1))
    name = f"mono:{b1},{b2},{component}"
    if component == 0:
        return VelocityField(c, zero, name)
    return VelocityField(zero, c, name)


def constant_field(a: float, b: float) -> VelocityField:
    return VelocityField(np.array([[a]]), np.array([[b]]), f"const:{a},{b}")


def identity_field() -> VelocityField:
    return VelocityField(np.array([[0.0], [1.0]]), np.array([[0.0, 1.0]]), "identity")


def rotation_field() -> VelocityField:
    return VelocityField(np.array([[0.0, -1.0]]), np.array([[0.0], [1.0]]), "rot")


@dataclass(frozen=True)
class VelocityBasis:
    gamma: int
    fields: tuple[VelocityField, ...]

    @property
    def size(self) -> int:
        return len(self.fields)


def build_basis(gamma: int) -> VelocityBasis:
    """Monomial basis of both-component polynomial fields up to degree gamma.

    Ordering is fixed: component 0 for all exponents in graded lexicographic
    order, then component 1.
    """
    if not 0 <= gamma <= 6:
        raise ValueError(f"gamma must be in [0, 6], got {gamma}")
    exps = [(d - b2, b2) for d in range(gamma + 1) for b2 in range(d + 1)]
    fields = tuple(monomial_field(b1, b2, comp) for comp in (0, 1) for b1, b2 in exps)
    assert len(fields) == 2 * math.comb(gamma + 2, 2)
    return VelocityBasis(gamma, fields)


@dataclass(frozen=True)
class Gramian:
    matrix: np.ndarray
    cho: tuple
    condition: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def gramian(basis: VelocityBasis, mesh: Mesh) -> Gramian:
    """H1(Omega) Gramian of the basis over the triangulated domain.

    Entries are integrated by a triangle rule exact for degree 2*gamma. The
    all-monomial basis from build_basis goes through a moment table; other
    bases fall back to a chunked quadrature pass over every field pair.
    """
    layout = _monomial_layout(basis)
    if layout is not None:
        K = _gramian_from_moments(layout, mesh)
    else:
        K = _gramian_generic(basis, mesh)
    K = 0.5 * (K + K.T)
    return _factorize(K)


def _monomial_layout(basis: VelocityBasis):
    """(component, b1, b2) per field when all fields are single monomials."""
    layout = []
    for f in basis.fields:
        entries = [(comp, i, j) for comp, c in enumerate((f.coeffs_x, f.coeffs_y))
                   for i, j in np.argwhere(c != 0.0)]
        if len(entries) != 1:
            return None
        comp, i, j = entries[0]
        if (f.coeffs_x if comp == 0 else f.coeffs_y)[i, j] != 1.0:
            return None
        layout.append((comp, int(i), int(j)))
    return layout


def _mesh_moments(mesh: Mesh, degree: int) -> np.ndarray:
    """mom[p, q] = integral of x1^p x2^q over the mesh, p + q <= degree."""
    pts, wts, _ = physical_points(mesh, degree)
    flat = pts.reshape(-1, 2)
    w = wts.reshape(-1)
    mom = np.zeros((degree + 1, degree + 1))
    for lo in range(0, flat.shape[0], _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, flat.shape[0]))
        xp = flat[sl, 0, None] ** np.arange(degree + 1)
        yp = flat[sl, 1, None] ** np.arange(degree + 1)
        mom += np.einsum("n,np,nq->pq", w[sl], xp, yp, optimize=True)
    return mom


def _gramian_from_moments(layout, mesh: Mesh) -> np.ndarray:
    degree = 2 * max(i + j for _, i, j in layout)
    mom = _mesh_moments(mesh, degree)
    q = len(layout)
    K = np.zeros((q, q))
    for a in range(q):
        ca, a1, a2 = layout[a]
        for b in range(a, q):
            cb, b1, b2 = layout[b]
            if ca != cb:
                continue
            val = mom[a1 + b1, a2 + b2]
            if a1 and b1:
                val += a1 * b1 * mom[a1 + b1 - 2, a2 + b2]
            if a2 and b2:
                val += a2 * b2 * mom[a1 + b1, a2 + b2 - 2]
            K[a, b] = K[b, a] = val
    return K


def _gramian_generic(basis: VelocityBasis, mesh: Mesh) -> np.ndarray:
    degree = 2 * max(f.degree for f in basis.fields)
    pts, wts, _ = physical_points(mesh, degree)
    flat = pts.reshape(-1, 2)
    w = wts.reshape(-1)
    q = basis.size
    K = np.zeros((q, q))
    for lo in range(0, flat.shape[0], _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, flat.shape[0]))
        V = np.stack([f.evaluate(flat[sl]) for f in basis.fields])        # (q, m, 2)
        D = np.stack([f.jacobian(flat[sl]) for f in basis.fields])        # (q, m, 2, 2)
        K += np.einsum("imc,jmc,m->ij", V, V, w[sl], optimize=True)
        K += np.einsum("imab,jmab,m->ij", D, D, w[sl], optimize=True)
    return K


def _factorize(K: np.ndarray) -> Gramian:
    condition = float(np.linalg.cond(K))
    log.debug("Gramian size %d, condition %.3e", K.shape[0], condition)
    if not np.isfinite(condition) or condition > 1e14:
        raise FactorizationError(
            f"Gramian condition {condition:.2e} exceeds double precision "
            "(gamma too large for the domain, or dependent fields)")
    try:
        cho = scipy.linalg.cho_factor(K, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationError(f"Gramian is not numerically SPD: {exc}") from exc
    return Gramian(K, cho, condition)


def dual_norm(w: np.ndarray, K: Gramian) -> float:
    """sqrt(w^T K^{-1} w) through the Cholesky factor."""
    w = np.asarray(w, dtype=float)
    if w.shape != (K.size,):
        raise ValueError(f"w has shape {w.shape}, Gramian is {K.size}x{K.size}")
    val = float(w @ scipy.linalg.cho_solve(K.cho, w))
    return math.sqrt(max(val, 0.0))


def _total_degree(c: np.ndarray) -> int:
    nz = np.argwhere(c != 0.0)
    if nz.size == 0:
        return 0
    return int((nz[:, 0] + nz[:, 1]).max())

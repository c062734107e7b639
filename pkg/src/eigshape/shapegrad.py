"""Discrete Eulerian derivatives of Laplace eigenvalues.

Volume form (any bc):
    integral of -2 grad(u_h) . DV grad(u_h) + div(V) (|grad u_h|^2 - lam_h u_h^2).
Boundary forms:
    Dirichlet: -integral over the boundary of (du_h/dn)^2 V.n,
    Neumann:   integral of (|tangential grad u_h|^2 - lam_h u_h^2) V.n,
with the normal derivative and tangential gradient taken from the single
adjacent triangle's constant gradient (the natural P1 trace) and facet
normals of the discrete polygon.

For an eigenvalue cluster the same integrands, bilinear in a pair of basis
functions, fill a small symmetric matrix whose sorted eigenvalues are the
directional derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .eig import EigenCluster, EigenPair
from .fem import BoundaryCondition, FemSpace, element_gradients
from .mesh import boundary_normals
from .quadrature import edge_rule, physical_points
from .velocity import VelocityField

_BASE_DEGREE = 6  # volume rule exact for degree max(6, field degree + 2)


class Formula(Enum):
    VOLUME = "volume"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class GradientSample:
    value: float
    formula: Formula
    bc: BoundaryCondition
    field_index: int


@dataclass(frozen=True)
class DirectionalMatrix:
    matrix: np.ndarray
    eigenvalues: np.ndarray  # sorted ascending


def volume_gradient(space: FemSpace, pair: EigenPair, field: VelocityField) -> float:
    return float(volume_gradients(space, pair, (field,))[0])


def volume_gradients(space: FemSpace, pair: EigenPair, fields) -> np.ndarray:
    """Volume-form derivative for each field, sharing the quadrature pass."""
    ctx = _VolumeData(space, (pair,), max(f.degree for f in fields))
    out = np.zeros(len(fields))
    for sl in ctx.chunks():
        g = ctx.grads[0][sl]
        gg = np.einsum("ta,ta->t", g, g)
        uu = ctx.uvals[0][sl] ** 2
        pts = ctx.points[sl]
        w = ctx.weights[sl]
        for idx, field in enumerate(fields):
            DV = field.jacobian(pts)
            div = field.divergence(pts)
            dvg = np.einsum("tqab,tb->tqa", DV, g)
            term = -2.0 * np.einsum("tqa,ta->tq", dvg, g)
            term += div * (gg[:, None] - pair.lam * uu)
            out[idx] += float(np.sum(w * term))
    return out


def boundary_gradient_dirichlet(space: FemSpace, pair: EigenPair, field: VelocityField) -> float:
    if space.bc is not BoundaryCondition.DIRICHLET:
        raise ValueError("Dirichlet boundary formula called with a Neumann space")
    return float(_boundary_values(space, (pair,), (field,))[0])


def boundary_gradient_neumann(space: FemSpace, pair: EigenPair, field: VelocityField) -> float:
    if space.bc is not BoundaryCondition.NEUMANN:
        raise ValueError("Neumann boundary formula called with a Dirichlet space")
    return float(_boundary_values(space, (pair,), (field,))[0])


def boundary_gradients(space: FemSpace, pair: EigenPair, fields) -> np.ndarray:
    """Boundary-form derivative for each field (dispatches on the space's bc)."""
    return _boundary_values(space, (pair,), fields)


def gradient_samples(space: FemSpace, pair: EigenPair, fields,
                     formula: Formula) -> list[GradientSample]:
    """Tagged per-field derivative values for one eigenpair."""
    if formula is Formula.VOLUME:
        values = volume_gradients(space, pair, fields)
    else:
        values = boundary_gradients(space, pair, fields)
    return [GradientSample(float(v), formula, space.bc, i)
            for i, v in enumerate(values)]


def directional_matrix(space: FemSpace, cl: EigenCluster, field: VelocityField,
                       formula: Formula) -> DirectionalMatrix:
    """Directional-derivative matrix of a multiple eigenvalue, with eigenvalues.

    The continuous formulas use the (single) continuous eigenvalue; here it
    is replaced by the cluster-mean discrete eigenvalue.
    """
    l = cl.multiplicity
    lam = cl.mean
    if formula is Formula.VOLUME:
        ctx = _VolumeData(space, _members(cl), field.degree)
        mat = np.zeros((l, l))
        for sl in ctx.chunks():
            DV = field.jacobian(ctx.points[sl])
            div = field.divergence(ctx.points[sl])
            w = ctx.weights[sl]
            for i in range(l):
                gi = ctx.grads[i][sl]
                dvg = np.einsum("tqab,tb->tqa", DV, gi) + np.einsum("tqba,tb->tqa", DV, gi)
                for j in range(i, l):
                    gj = ctx.grads[j][sl]
                    gij = np.einsum("ta,ta->t", gi, gj)
                    term = -np.einsum("tqa,ta->tq", dvg, gj)
                    term += div * (gij[:, None] - lam * ctx.uvals[i][sl] * ctx.uvals[j][sl])
                    mat[i, j] += float(np.sum(w * term))
        for i in range(l):
            for j in range(i, l):
                mat[j, i] = mat[i, j]
    else:
        mat = _boundary_matrix(space, cl, field)
    mat = 0.5 * (mat + mat.T)
    return DirectionalMatrix(mat, np.linalg.eigvalsh(mat))


def weyl_bound(l: int, A: np.ndarray, Ah: np.ndarray) -> tuple[float, float]:
    """Max eigenvalue deviation of two symmetric l x l matrices and its bound
    sqrt(l) * max-row-sum of |A - Ah|."""
    A = np.asarray(A, dtype=float)
    Ah = np.asarray(Ah, dtype=float)
    if A.shape != (l, l) or Ah.shape != (l, l):
        raise ValueError("matrices must both be l x l")
    dev = float(np.max(np.abs(np.linalg.eigvalsh(A) - np.linalg.eigvalsh(Ah))))
    bound = float(np.sqrt(l) * np.max(np.sum(np.abs(A - Ah), axis=1)))
    return dev, bound


class _VolumeData:
    """Per-(space, cluster) quadrature context shared across fields."""

    _CHUNK_TRIANGLES = 65536

    def __init__(self, space: FemSpace, pairs, field_degree: int):
        degree = max(_BASE_DEGREE, field_degree + 2)
        self.points, self.weights, bary = physical_points(space.mesh, degree)
        tris = space.mesh.triangles
        self.grads = [element_gradients(space, p.coeffs) for p in pairs]
        self.uvals = [space.nodal_values(p.coeffs)[tris] @ bary.T for p in pairs]

    def chunks(self):
        nt = self.points.shape[0]
        for lo in range(0, nt, self._CHUNK_TRIANGLES):
            yield slice(lo, min(lo + self._CHUNK_TRIANGLES, nt))


def _members(cl: EigenCluster) -> list[EigenPair]:
    return [EigenPair(float(cl.lambdas[i]), cl.basis[:, i], 0.0)
            for i in range(cl.multiplicity)]


class _BoundaryData:
    """Edge quadrature context: normals, trace values and gradients."""

    def __init__(self, space: FemSpace, pairs, field_degree: int):
        mesh = space.mesh
        edges = mesh.boundary_edges
        self.normals, self.lengths = boundary_normals(mesh)
        degree = field_degree + (0 if space.bc is BoundaryCondition.DIRICHLET else 2)
        t, w = edge_rule(degree)
        p0 = mesh.vertices[edges[:, 0]]
        p1 = mesh.vertices[edges[:, 1]]
        self.points = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
        self.weights = self.lengths[:, None] * w[None, :]
        self.dudn = []
        self.tangential = []
        self.trace = []
        for p in pairs:
            g = element_gradients(space, p.coeffs)[edges[:, 2]]  # (ne, 2)
            gn = np.einsum("ea,ea->e", g, self.normals)
            self.dudn.append(gn)
            self.tangential.append(g - gn[:, None] * self.normals)
            nodal = space.nodal_values(p.coeffs)
            self.trace.append(nodal[edges[:, 0]][:, None] * (1.0 - t)[None, :]
                              + nodal[edges[:, 1]][:, None] * t[None, :])


def _boundary_values(space: FemSpace, pairs, fields) -> np.ndarray:
    ctx = _BoundaryData(space, pairs, max(f.degree for f in fields))
    out = np.empty(len(fields))
    for idx, field in enumerate(fields):
        vn = np.einsum("eqa,ea->eq", field.evaluate(ctx.points), ctx.normals)
        out[idx] = _boundary_entry(space, ctx, vn, 0, 0, pairs[0].lam)
    return out


def _boundary_matrix(space: FemSpace, cl: EigenCluster, field: VelocityField) -> np.ndarray:
    members = _members(cl)
    ctx = _BoundaryData(space, members, field.degree)
    vn = np.einsum("eqa,ea->eq", field.evaluate(ctx.points), ctx.normals)
    l = cl.multiplicity
    mat = np.empty((l, l))
    for i in range(l):
        for j in range(i, l):
            mat[i, j] = mat[j, i] = _boundary_entry(space, ctx, vn, i, j, cl.mean)
    return mat


def _boundary_entry(space: FemSpace, ctx: _BoundaryData, vn: np.ndarray,
                    i: int, j: int, lam: float) -> float:
    if space.bc is BoundaryCondition.DIRICHLET:
        coef = ctx.dudn[i] * ctx.dudn[j]
        return -float(np.sum(ctx.weights * vn * coef[:, None]))
    tt = np.einsum("ea,ea->e", ctx.tangential[i], ctx.tangential[j])
    integrand = tt[:, None] - lam * ctx.trace[i] * ctx.trace[j]
    return float(np.sum(ctx.weights * vn * integrand))

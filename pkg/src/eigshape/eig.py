"""Lowest eigenpairs of the generalized pencil A u = lambda M u.

The sparse path is shift-invert Lanczos (ARPACK) with a deterministic
start vector; the dense path (LAPACK) doubles as the test oracle. Returned
eigenvectors are M-orthonormal. The Neumann zero mode is kept in the
ordering but flagged so downstream target selection can skip it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import BoundaryCondition

_START_SEED = 20240817
_NEUMANN_SIGMA = 0.1
_ZERO_MODE_REL = 1e-8


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass(frozen=True)
class EigenPair:
    lam: float
    coeffs: np.ndarray
    residual: float
    zero_mode: bool = False


@dataclass(frozen=True)
class EigenCluster:
    lambdas: np.ndarray
    basis: np.ndarray  # (dof, l), M-orthonormal

    @property
    def multiplicity(self) -> int:
        return self.basis.shape[1]

    @property
    def mean(self) -> float:
        return float(self.lambdas.mean())


class TargetKind(Enum):
    FIRST = "first"
    MATCH_EXACT = "match_exact"
    INDEX_WITHIN_CLUSTER = "index_within_cluster"


@dataclass(frozen=True)
class Target:
    """Which eigenpair a study tracks across refinement levels."""

    kind: TargetKind = TargetKind.FIRST
    cluster_index: int = 0
    member: int = 0

    @staticmethod
    def first() -> "Target":
        return Target(TargetKind.FIRST)

    @staticmethod
    def match_exact() -> "Target":
        return Target(TargetKind.MATCH_EXACT)

    @staticmethod
    def index_within_cluster(cluster_index: int, member: int = 0) -> "Target":
        return Target(TargetKind.INDEX_WITHIN_CLUSTER, cluster_index, member)


def solve_lowest(A, M, k: int, bc: BoundaryCondition, tol: float = 1e-10) -> list[EigenPair]:
    """The k smallest eigenpairs, nondecreasing, M-orthonormal."""
    n = _check_pencil(A, M, k, tol)
    if k >= n - 1:
        return solve_lowest_dense(A, M, k, bc, tol=tol)

    sigma = 0.0 if bc is BoundaryCondition.DIRICHLET else _NEUMANN_SIGMA
    v0 = np.random.default_rng(_START_SEED).standard_normal(n)
    try:
        vals, vecs = spla.eigsh(A.tocsc(), k=k, M=M.tocsc(), sigma=sigma,
                                which="LM", v0=v0, tol=1e-12, maxiter=2000)
    except spla.ArpackNoConvergence as exc:
        best = np.inf
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            best = float(np.min(np.abs(exc.eigenvalues)))
        raise NonConvergenceError("eigensolver iteration budget exhausted", best) from exc
    return _package(A, M, vals, vecs, bc, tol)


def solve_lowest_dense(A, M, k: int, bc: BoundaryCondition, tol: float = 1e-10) -> list[EigenPair]:
    """Dense LAPACK route; independent oracle for the sparse path."""
    n = _check_pencil(A, M, k, tol)
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    vals, vecs = scipy.linalg.eigh(Ad, Md, subset_by_index=(0, k - 1))
    return _package(A, M, vals, vecs, bc, tol)


def cluster(pairs: list[EigenPair], M, rel_gap: float = 1e-6) -> list[EigenCluster]:
    """Greedy grouping of consecutive near-equal eigenvalues.

    Bases are re-orthonormalized in the M inner product within each cluster.
    """
    lams = [p.lam for p in pairs]
    if sorted(lams) != lams:
        raise ValueError("pairs must be sorted by eigenvalue")
    clusters: list[EigenCluster] = []
    start = 0
    for j in range(1, len(pairs) + 1):
        if j < len(pairs) and abs(pairs[j].lam - pairs[j - 1].lam) <= rel_gap * abs(pairs[j - 1].lam):
            continue
        block = pairs[start:j]
        basis = np.stack([p.coeffs for p in block], axis=1)
        gram = basis.T @ (M @ basis)
        chol = np.linalg.cholesky(gram)
        basis = scipy.linalg.solve_triangular(chol, basis.T, lower=True).T
        clusters.append(EigenCluster(np.array([p.lam for p in block]), basis))
        start = j
    return clusters


def align_sign(pair: EigenPair, reference_nodal_values: np.ndarray, M) -> EigenPair:
    """Flip the eigenvector sign so its M-inner product with the reference is >= 0."""
    ref = np.asarray(reference_nodal_values, dtype=float)
    if not np.any(ref):
        raise ValueError("reference vector must be nonzero")
    if float(pair.coeffs @ (M @ ref)) < 0.0:
        return replace(pair, coeffs=-pair.coeffs)
    return pair


def pick_target(pairs: list[EigenPair], M, target: Target,
                exact_nodal: np.ndarray | None = None,
                rel_gap: float = 1e-6) -> EigenPair:
    """Select the study eigenpair, skipping flagged zero modes."""
    live = [p for p in pairs if not p.zero_mode]
    if not live:
        raise ValueError("no nonzero eigenpairs available")
    if target.kind is TargetKind.FIRST:
        return live[0]
    if target.kind is TargetKind.MATCH_EXACT:
        if exact_nodal is None:
            raise ValueError("match_exact target needs the exact nodal interpolant")
        scores = [abs(float(p.coeffs @ (M @ exact_nodal))) for p in live]
        return live[int(np.argmax(scores))]
    clusters = cluster(live, M, rel_gap)
    cl = clusters[target.cluster_index]
    return EigenPair(float(cl.lambdas[target.member]), cl.basis[:, target.member],
                     residual=0.0)


def _check_pencil(A, M, k: int, tol: float) -> int:
    if A.shape != M.shape or A.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: A {A.shape}, M {M.shape}")
    if k < 1 or k > A.shape[0]:
        raise ValueError(f"k={k} out of range for dimension {A.shape[0]}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return A.shape[0]


def _package(A, M, vals, vecs, bc, tol) -> list[EigenPair]:
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    lam_ref = float(np.max(np.abs(vals))) or 1.0
    pairs = []
    for lam, u in zip(vals, vecs.T):
        u = u / np.sqrt(float(u @ (M @ u)))
        r = A @ u - lam * (M @ u)
        # near-zero modes are measured against the spectrum scale
        scale = abs(lam) if abs(lam) > _ZERO_MODE_REL * lam_ref else lam_ref
        residual = float(np.linalg.norm(r)) / scale
        pairs.append(EigenPair(float(lam), u, residual))
    worst = max(p.residual for p in pairs)
    if worst > tol:
        raise NonConvergenceError("residual tolerance not met", worst)
    if bc is BoundaryCondition.NEUMANN and len(pairs) >= 2:
        cutoff = _ZERO_MODE_REL * abs(pairs[1].lam)
        pairs = [replace(p, zero_mode=bool(abs(p.lam) < cutoff)) for p in pairs]
    return pairs

"""Refinement studies: dual-norm errors of both derivative formulas per level
and least-squares convergence rates.

Each level refines the previous mesh, solves the target eigenpair, evaluates
the volume and boundary derivatives for every basis field, and measures the
error vector against the (analytic or fine-mesh) reference in the dual norm
E = sqrt(w^T K^{-1} w). The reference is the same for both formulas: the two
continuous Eulerian derivatives coincide.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import reference as refmod
from . import shapegrad
from .eig import Target, TargetKind, pick_target, solve_lowest
from .fem import BoundaryCondition, FemSpace, assemble_mass, assemble_stiffness
from .mesh import Domain, generate, mesh_size, refine
from .velocity import build_basis, dual_norm, gramian


class DegenerateFitError(RuntimeError):
    """An E value in the fit window is zero up to roundoff (exact-identity field set)."""


_DEGENERATE_FLOOR = 1e-12  # dual-norm values below this are roundoff of an exact zero


@dataclass(frozen=True)
class StudyConfig:
    domain: Domain
    bc: BoundaryCondition
    min_level: int
    max_level: int
    gamma: int = 3
    target: Target = field(default_factory=Target.first)
    reference: refmod.Provenance = refmod.Provenance.ANALYTIC
    reference_level: int | None = None
    cluster_rel_gap: float = 1e-6
    num_pairs: int | None = None
    fit_window: int = 4
    output_dir: str | None = None

    def __post_init__(self):
        if self.min_level > self.max_level:
            raise ValueError("min_level must not exceed max_level")
        if self.reference is refmod.Provenance.ANALYTIC and self.domain is Domain.L_SHAPE:
            raise ValueError("analytic reference exists only for square and disk")
        if self.reference is refmod.Provenance.FINE_MESH:
            if self.reference_level is None:
                raise ValueError("fine-mesh reference needs reference_level")
            if self.reference_level < self.max_level + 2:
                raise ValueError("reference_level must be at least max_level + 2")


@dataclass(frozen=True)
class StudyRecord:
    level: int
    h: float
    dof: int
    lambda_h: float
    E_volume: float
    E_boundary: float


@dataclass(frozen=True)
class RateFit:
    formula: shapegrad.Formula
    slope: float
    intercept: float
    residual: float
    window: int


@dataclass(frozen=True)
class StudyResult:
    config: StudyConfig
    records: list[StudyRecord]
    volume_fit: RateFit
    boundary_fit: RateFit
    reference: refmod.ReferenceDerivatives


def _num_pairs(cfg: StudyConfig) -> int:
    if cfg.num_pairs is not None:
        return cfg.num_pairs
    if cfg.target.kind is TargetKind.MATCH_EXACT:
        return 10
    if cfg.target.kind is TargetKind.INDEX_WITHIN_CLUSTER:
        return max(6, cfg.target.cluster_index + 4)
    return 1 if cfg.bc is BoundaryCondition.DIRICHLET else 6


def reference_derivatives_for(cfg: StudyConfig, basis) -> refmod.ReferenceDerivatives:
    if cfg.reference is refmod.Provenance.ANALYTIC:
        return refmod.continuous_derivatives(cfg.domain, cfg.bc, basis)
    return refmod.finemesh_reference(cfg.domain, cfg.bc, basis, cfg.reference_level,
                                     target=cfg.target, max_study_level=cfg.max_level)


def run_levels(cfg: StudyConfig) -> tuple[list[StudyRecord], refmod.ReferenceDerivatives]:
    basis = build_basis(cfg.gamma)
    ref = reference_derivatives_for(cfg, basis)
    records = []
    mesh = generate(cfg.domain, cfg.min_level)
    for level in range(cfg.min_level, cfg.max_level + 1):
        if level > cfg.min_level:
            mesh = refine(mesh)
        space = FemSpace(mesh, cfg.bc)
        A = assemble_stiffness(space)
        M = assemble_mass(space)
        pairs = solve_lowest(A, M, _num_pairs(cfg), cfg.bc)
        exact_nodal = None
        if cfg.target.kind is TargetKind.MATCH_EXACT:
            exact_nodal = space.interpolate(refmod.exact_eigenpair(cfg.domain, cfg.bc).value)
        pair = pick_target(pairs, M, cfg.target, exact_nodal=exact_nodal,
                           rel_gap=cfg.cluster_rel_gap)
        K = gramian(basis, mesh)
        vol = shapegrad.volume_gradients(space, pair, basis.fields)
        bnd = shapegrad.boundary_gradients(space, pair, basis.fields)
        records.append(StudyRecord(
            level=level, h=mesh_size(mesh), dof=space.dof_count, lambda_h=pair.lam,
            E_volume=dual_norm(ref.values - vol, K),
            E_boundary=dual_norm(ref.values - bnd, K)))
    return records, ref


def run_study(cfg: StudyConfig) -> StudyResult:
    records, ref = run_levels(cfg)
    return StudyResult(
        cfg, records,
        volume_fit=fit_rate(records, shapegrad.Formula.VOLUME, cfg.fit_window),
        boundary_fit=fit_rate(records, shapegrad.Formula.BOUNDARY, cfg.fit_window),
        reference=ref)


def fit_rate(records: list[StudyRecord], formula: shapegrad.Formula,
             window: int = 4) -> RateFit:
    """Ordinary least squares of log E against log h over the finest levels."""
    tail = records[-window:]
    if len(tail) < 3:
        raise ValueError("rate fit needs at least 3 records in the window")
    E = np.array([r.E_volume if formula is shapegrad.Formula.VOLUME else r.E_boundary
                  for r in tail])
    if np.any(E <= _DEGENERATE_FLOOR):
        raise DegenerateFitError(f"{formula.value} error vanishes in the fit window")
    x = np.log(np.array([r.h for r in tail]))
    y = np.log(E)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(formula, float(slope), float(intercept), resid, len(tail))


@dataclass(frozen=True)
class GammaRow:
    gamma: int
    volume_slope: float
    boundary_slope: float


def gamma_sensitivity(cfg: StudyConfig, gammas) -> list[GammaRow]:
    """Rerun the study for each gamma and report the slopes side by side."""
    rows = []
    for g in gammas:
        result = run_study(replace(cfg, gamma=g))
        rows.append(GammaRow(g, result.volume_fit.slope, result.boundary_fit.slope))
    return rows


def write_csv(result: StudyResult) -> str:
    """Deterministic CSV: one row per record, then a rates footer."""
    buf = io.StringIO()
    buf.write("level,h,dof,lambda_h,E_volume,E_boundary\n")
    for r in result.records:
        buf.write(f"{r.level},{r.h!r},{r.dof},{r.lambda_h!r},{r.E_volume!r},{r.E_boundary!r}\n")
    buf.write("rates\n")
    buf.write("formula,slope,intercept,residual\n")
    for fit in (result.volume_fit, result.boundary_fit):
        buf.write(f"{fit.formula.value},{fit.slope!r},{fit.intercept!r},{fit.residual!r}\n")
    return buf.getvalue()


def loglog_svg(result: StudyResult, title: str = "") -> str:
    """Dependency-light SVG log-log plot of both error series with slopes."""
    width, height = 640, 480
    ml, mr, mt, mb = 70, 20, 40, 55
    hs = [r.h for r in result.records]
    series = [("E_volume", "#1f77b4", [r.E_volume for r in result.records],
               result.volume_fit.slope),
              ("E_boundary", "#d62728", [r.E_boundary for r in result.records],
               result.boundary_fit.slope)]
    finite = [v for _, _, vs, _ in series for v in vs if v > 0.0]
    if not finite:
        finite = [1.0]
    lx0, lx1 = math.log10(min(hs)), math.log10(max(hs))
    ly0, ly1 = math.log10(min(finite)), math.log10(max(finite))
    lx0, lx1 = lx0 - 0.05 * (lx1 - lx0 + 1e-9) - 1e-9, lx1 + 0.05 * (lx1 - lx0 + 1e-9) + 1e-9
    ly0, ly1 = ly0 - 0.05 * (ly1 - ly0 + 1e-9) - 1e-9, ly1 + 0.05 * (ly1 - ly0 + 1e-9) + 1e-9

    def sx(logx):
        return ml + (logx - lx0) / (lx1 - lx0) * (width - ml - mr)

    def sy(logy):
        return height - mb - (logy - ly0) / (ly1 - ly0) * (height - mt - mb)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
             'fill="none" stroke="black"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
                     f'font-size="15">{title}</text>')
    for p in range(math.floor(lx0), math.ceil(lx1) + 1):
        if lx0 <= p <= lx1:
            x = sx(p)
            parts.append(f'<line x1="{x:.1f}" y1="{height - mb}" x2="{x:.1f}" '
                         f'y2="{height - mb + 6}" stroke="black"/>')
            parts.append(f'<text x="{x:.1f}" y="{height - mb + 20}" text-anchor="middle" '
                         f'font-size="12">1e{p}</text>')
    for p in range(math.floor(ly0), math.ceil(ly1) + 1):
        if ly0 <= p <= ly1:
            y = sy(p)
            parts.append(f'<line x1="{ml - 6}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" '
                         'stroke="black"/>')
            parts.append(f'<text x="{ml - 10}" y="{y + 4:.1f}" text-anchor="end" '
                         f'font-size="12">1e{p}</text>')
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
                 'font-size="13">h</text>')
    parts.append(f'<text x="18" y="{height / 2:.1f}" text-anchor="middle" font-size="13" '
                 f'transform="rotate(-90 18 {height / 2:.1f})">dual-norm error</text>')
    for idx, (name, color, values, slope) in enumerate(series):
        coords = [(sx(math.log10(h)), sy(math.log10(v)))
                  for h, v in zip(hs, values) if v > 0.0]
        if coords:
            path = "M " + " L ".join(f"{x:.2f} {y:.2f}" for x, y in coords)
            parts.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            for x, y in coords:
                parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{width - mr - 10}" y="{mt + 20 + 18 * idx}" text-anchor="end" '
                     f'font-size="13" fill="{color}">{name}, slope {slope:.2f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

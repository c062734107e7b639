import os

# single-core box: stop BLAS from spinning worker threads before numpy loads
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np
import pytest

from eigshape.convergence import StudyConfig, run_study
from eigshape.eig import Target, solve_lowest
from eigshape.fem import BoundaryCondition, FemSpace, assemble_mass, assemble_stiffness
from eigshape.mesh import Domain, generate
from eigshape.reference import Provenance

DOMAINS = (Domain.UNIT_SQUARE, Domain.UNIT_DISK, Domain.L_SHAPE)
BCS = (BoundaryCondition.DIRICHLET, BoundaryCondition.NEUMANN)


def assembled(domain, bc, level):
    mesh = generate(domain, level)
    space = FemSpace(mesh, bc)
    return mesh, space, assemble_stiffness(space), assemble_mass(space)


def first_nonzero_pair(space, A, M, k=None):
    if k is None:
        k = 1 if space.bc is BoundaryCondition.DIRICHLET else 3
    pairs = solve_lowest(A, M, k, space.bc)
    return next(p for p in pairs if not p.zero_mode)


@pytest.fixture(scope="session")
def square_dirichlet_space():
    mesh, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 3)
    return space, A, M


@pytest.fixture(scope="session")
def lshape_dirichlet_study():
    """Shared heavy run: L-shape study with its fine-mesh reference."""
    cfg = StudyConfig(Domain.L_SHAPE, BoundaryCondition.DIRICHLET,
                      min_level=2, max_level=5,
                      reference=Provenance.FINE_MESH, reference_level=7)
    return run_study(cfg)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import roots_legendre

from eigshape.eig import EigenCluster, cluster, solve_lowest
from eigshape.fem import BoundaryCondition
from eigshape.mesh import Domain, generate, refine
from eigshape.shapegrad import (Formula, boundary_gradient_dirichlet,
                                boundary_gradient_neumann, boundary_gradients,
                                directional_matrix, volume_gradient,
                                volume_gradients, weyl_bound)
from eigshape.velocity import (build_basis, constant_field, identity_field,
                               monomial_field, rotation_field)
from eigshape import reference as refmod
from eigshape.fem import FemSpace, assemble_mass, assemble_stiffness

from conftest import BCS, DOMAINS, assembled, first_nonzero_pair


@pytest.mark.parametrize("domain", DOMAINS)
@pytest.mark.parametrize("bc", BCS)
def test_volume_exact_identities(domain, bc):
    _, space, A, M = assembled(domain, bc, 2)
    pair = first_nonzero_pair(space, A, M)
    assert volume_gradient(space, pair, constant_field(1.0, 0.0)) == 0.0
    assert volume_gradient(space, pair, constant_field(-2.0, 3.0)) == 0.0
    assert volume_gradient(space, pair, rotation_field()) == 0.0
    vi = volume_gradient(space, pair, identity_field())
    assert abs(vi + 2.0 * pair.lam) <= 1e-12 * pair.lam


def test_volume_matches_continuous_reference_at_h_squared_rate():
    field = monomial_field(1, 0, 0)
    probe = build_basis(1)
    ref = refmod.continuous_derivatives(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET,
                                        probe)
    exact = ref.values[1]  # the (x1, 0) entry
    errs = []
    mesh = generate(Domain.UNIT_SQUARE, 4)
    for level in (4, 5):
        space = FemSpace(mesh, BoundaryCondition.DIRICHLET)
        pair = solve_lowest(assemble_stiffness(space), assemble_mass(space), 1,
                            BoundaryCondition.DIRICHLET)[0]
        errs.append(abs(volume_gradient(space, pair, field) - exact))
        if level == 4:
            mesh = refine(mesh)
    h = np.sqrt(2) / 32
    assert errs[0] <= 30.0 * h ** 2
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)


def test_boundary_dirichlet_rellich_identity():
    _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 5)
    pair = solve_lowest(A, M, 1, BoundaryCondition.DIRICHLET)[0]
    value = boundary_gradient_dirichlet(space, pair, identity_field())
    assert abs(value + 2.0 * pair.lam) <= 0.02 * 2.0 * pair.lam


def test_boundary_dirichlet_constant_field_square_cancels():
    # the uniform square mesh is half-turn symmetric, so the constant-field
    # boundary value cancels to roundoff at every level
    _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 3)
    pair = solve_lowest(A, M, 1, BoundaryCondition.DIRICHLET)[0]
    assert abs(boundary_gradient_dirichlet(space, pair, constant_field(1.0, 0.0))) <= 1e-9


def test_boundary_dirichlet_constant_field_lshape_decays():
    values = []
    mesh = generate(Domain.L_SHAPE, 2)
    for level in (2, 3, 4):
        space = FemSpace(mesh, BoundaryCondition.DIRICHLET)
        pair = solve_lowest(assemble_stiffness(space), assemble_mass(space), 1,
                            BoundaryCondition.DIRICHLET)[0]
        values.append(abs(boundary_gradient_dirichlet(space, pair, constant_field(1.0, 0.0))))
        if level < 4:
            mesh = refine(mesh)
    assert values[0] > values[1] > values[2] > 0.0


def test_boundary_dirichlet_zero_vector():
    _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 2)
    pair = solve_lowest(A, M, 1, BoundaryCondition.DIRICHLET)[0]
    from dataclasses import replace
    degenerate = replace(pair, coeffs=np.zeros_like(pair.coeffs))
    assert boundary_gradient_dirichlet(space, degenerate, identity_field()) == 0.0


def test_boundary_bc_dispatch_errors():
    _, spd, Ad, Md = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 1)
    _, spn, An, Mn = assembled(Domain.UNIT_SQUARE, BoundaryCondition.NEUMANN, 1)
    pd = solve_lowest(Ad, Md, 1, BoundaryCondition.DIRICHLET)[0]
    pn = first_nonzero_pair(spn, An, Mn)
    with pytest.raises(ValueError):
        boundary_gradient_neumann(spd, pd, identity_field())
    with pytest.raises(ValueError):
        boundary_gradient_dirichlet(spn, pn, identity_field())


def test_boundary_neumann_identity_scaling_law():
    _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.NEUMANN, 4)
    exact = refmod.exact_eigenpair(Domain.UNIT_SQUARE, BoundaryCondition.NEUMANN)
    from eigshape.eig import Target, pick_target
    pairs = solve_lowest(A, M, 10, BoundaryCondition.NEUMANN)
    pair = pick_target(pairs, M, Target.match_exact(),
                       exact_nodal=space.interpolate(exact.value))
    value = boundary_gradient_neumann(space, pair, identity_field())
    assert abs(value + 2.0 * pair.lam) <= 0.02 * 2.0 * pair.lam


def test_boundary_neumann_rotation_on_disk_vanishes():
    # per-edge rotation-field flux over an inscribed polygon is exactly zero
    _, space, A, M = assembled(Domain.UNIT_DISK, BoundaryCondition.NEUMANN, 3)
    pair = first_nonzero_pair(space, A, M, k=8)
    assert abs(boundary_gradient_neumann(space, pair, rotation_field())) <= 1e-12


def test_volume_boundary_consistency_order():
    basis = build_basis(2)
    diffs = []
    mesh = generate(Domain.UNIT_SQUARE, 3)
    for level in (3, 4, 5):
        space = FemSpace(mesh, BoundaryCondition.DIRICHLET)
        pair = solve_lowest(assemble_stiffness(space), assemble_mass(space), 1,
                            BoundaryCondition.DIRICHLET)[0]
        vol = volume_gradients(space, pair, basis.fields)
        bnd = boundary_gradients(space, pair, basis.fields)
        diffs.append(np.abs(vol - bnd))
        if level < 5:
            mesh = refine(mesh)
    diffs = np.array(diffs)
    hs = np.array([np.sqrt(2) / 16, np.sqrt(2) / 32, np.sqrt(2) / 64])
    for i in range(basis.size):
        if diffs[0, i] < 1e-8:  # symmetry-cancelled fields carry no signal
            continue
        slope = np.polyfit(np.log(hs), np.log(diffs[:, i]), 1)[0]
        assert slope >= 0.9


def _exact_pair_cluster_matrix():
    """Continuous directional matrix for the square 5 pi^2 pair, field (x1, 0),
    assembled by tensor Gauss quadrature from the exact eigenfunctions."""
    x, w = roots_legendre(40)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * w
    X, Y = np.meshgrid(t, t, indexing="ij")
    W = np.outer(wt, wt)
    lam = 5 * np.pi ** 2

    def u(k, l):
        return 2.0 * np.sin(k * np.pi * X) * np.sin(l * np.pi * Y)

    def grad(k, l):
        gx = 2.0 * k * np.pi * np.cos(k * np.pi * X) * np.sin(l * np.pi * Y)
        gy = 2.0 * l * np.pi * np.sin(k * np.pi * X) * np.cos(l * np.pi * Y)
        return gx, gy

    funcs = [(u(1, 2), grad(1, 2)), (u(2, 1), grad(2, 1))]
    mat = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ui, (gxi, gyi) = funcs[i]
            uj, (gxj, gyj) = funcs[j]
            # V = (x1, 0): DV + DV^T = diag(2, 0), div V = 1
            integrand = -2.0 * gxi * gxj + (gxi * gxj + gyi * gyj - lam * ui * uj)
            mat[i, j] = float(np.sum(W * integrand))
    return mat


def test_exact_cluster_matrix_oracle_matches_hand_values():
    mat = _exact_pair_cluster_matrix()
    assert mat[0, 0] == pytest.approx(-2 * np.pi ** 2, rel=1e-12)
    assert mat[1, 1] == pytest.approx(-8 * np.pi ** 2, rel=1e-12)
    assert abs(mat[0, 1]) <= 1e-10
    assert abs(mat[1, 0]) <= 1e-10


def test_directional_matrix_converges_to_exact_spectrum():
    sigma_exact = np.sort(np.linalg.eigvalsh(_exact_pair_cluster_matrix()))
    errs = []
    for level in (3, 4):
        _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, level)
        pairs = solve_lowest(A, M, 4, BoundaryCondition.DIRICHLET)
        cl = cluster(pairs, M, rel_gap=0.05)[1]
        dm = directional_matrix(space, cl, monomial_field(1, 0, 0), Formula.VOLUME)
        errs.append(np.abs(dm.eigenvalues - sigma_exact).max() / np.abs(sigma_exact).max())
    assert errs[1] <= 0.02
    assert errs[1] < errs[0]


def test_directional_matrix_singleton_reduces_to_simple_ops():
    _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 3)
    pairs = solve_lowest(A, M, 1, BoundaryCondition.DIRICHLET)
    cl = cluster(pairs, M)[0]
    field = monomial_field(1, 1, 0)
    dv = directional_matrix(space, cl, field, Formula.VOLUME)
    db = directional_matrix(space, cl, field, Formula.BOUNDARY)
    assert dv.eigenvalues[0] == pytest.approx(volume_gradient(space, pairs[0], field),
                                              rel=1e-12)
    assert db.eigenvalues[0] == pytest.approx(
        boundary_gradient_dirichlet(space, pairs[0], field), rel=1e-12)


def test_directional_matrix_identity_field_is_minus_two_lambda():
    _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 4)
    pairs = solve_lowest(A, M, 4, BoundaryCondition.DIRICHLET)
    cl = cluster(pairs, M, rel_gap=0.05)[1]
    dm = directional_matrix(space, cl, identity_field(), Formula.VOLUME)
    target = -2.0 * cl.mean
    assert np.abs(dm.matrix - target * np.eye(2)).max() <= 1e-10 * abs(target)
    assert np.abs(dm.eigenvalues - target).max() <= 1e-10 * abs(target)


def test_directional_matrix_invariant_under_orthogonal_recombination():
    _, space, A, M = assembled(Domain.UNIT_SQUARE, BoundaryCondition.DIRICHLET, 3)
    pairs = solve_lowest(A, M, 4, BoundaryCondition.DIRICHLET)
    cl = cluster(pairs, M, rel_gap=0.05)[1]
    rng = np.random.default_rng(17)
    field = monomial_field(1, 0, 0)
    for formula in Formula:
        base = directional_matrix(space, cl, field, formula).eigenvalues
        for _ in range(3):
            Q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
            rotated = EigenCluster(cl.lambdas, cl.basis @ Q)
            sig = directional_matrix(space, rotated, field, formula).eigenvalues
            assert np.abs(sig - base).max() <= 1e-10 * np.abs(base).max()


def test_weyl_bound_trivial_cases():
    A = np.diag([1.0, 2.0])
    assert weyl_bound(2, A, A) == (0.0, 0.0)
    dev, bound = weyl_bound(2, A, np.diag([1.1, 2.2]))
    assert dev == pytest.approx(0.2, abs=1e-12)
    assert bound == pytest.approx(np.sqrt(2) * 0.2, abs=1e-12)
    assert dev <= bound


def test_weyl_bound_random_symmetric_samples():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        B = rng.standard_normal((4, 4))
        C = rng.standard_normal((4, 4))
        A = B + B.T
        Ah = A + 0.1 * (C + C.T)
        dev, bound = weyl_bound(4, A, Ah)
        assert dev <= bound + 1e-12


@given(st.integers(1, 4))
@settings(max_examples=20, deadline=None)
def test_weyl_bound_shape_validation(l):
    A = np.eye(l)
    with pytest.raises(ValueError):
        weyl_bound(l, A, np.eye(l + 1))

import numpy as np
import pytest
from scipy import sparse

from alefem.assembly import (
    assemble,
    assemble_load,
    pressure_mean_vector,
    PhaseParams,
)
from alefem.fespace import build_taylor_hood, interpolate
from alefem.linalg import SaddleSystem, SolverError, lu_solve, solve_saddle
from alefem.mesh import generate_rect_mesh
from alefem.stepper import flow_solve


def test_lu_identity():
    A = sparse.identity(5, format="csr")
    b = np.arange(5.0)
    assert np.array_equal(lu_solve(A, b), b)


def test_lu_diagonal():
    A = sparse.diags([2.0, 4.0]).tocsr()
    x = lu_solve(A, np.array([2.0, 8.0]))
    assert np.allclose(x, [1.0, 2.0], atol=1e-14)


def test_lu_random_spd_residual():
    rng = np.random.default_rng(0)
    B = rng.normal(size=(200, 200))
    A = sparse.csr_matrix(B @ B.T + 200 * np.eye(200))
    b = rng.normal(size=200)
    x = lu_solve(A, b)
    resid = np.abs(A @ x - b).max()
    scale = np.abs(A.toarray()).sum(axis=1).max() * np.abs(x).max() \
        + np.abs(b).max()
    assert resid <= 1e-10 * scale


def test_lu_singular_raises():
    A = sparse.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SolverError):
        lu_solve(A, np.array([1.0, 1.0]))


def test_lu_shape_mismatch():
    with pytest.raises(SolverError):
        lu_solve(sparse.identity(3, format="csr"), np.zeros(4))


def test_saddle_zero_rhs_gives_zero():
    mesh = generate_rect_mesh((0, 0, 1, 1), 0.25, 2)
    spaces = build_taylor_hood(mesh, 2)
    params = PhaseParams(1.0, 1.0, 1.0, 1.0, 1.0)
    A_mu = assemble("A_mu", mesh, spaces, params)
    M_rho = assemble("M_rho", mesh, spaces, params)
    C = assemble("C", mesh, spaces)
    m = pressure_mean_vector(mesh, spaces)
    bnd = spaces.vector_dofs(spaces.boundary_dofs)
    free = np.ones(2 * spaces.velocity.n_dofs, dtype=bool)
    free[bnd] = False
    Kff = (M_rho + A_mu).tocsr()[free][:, free]
    Cf = C[:, free]
    u, p, lam = solve_saddle(SaddleSystem(
        Kuu=Kff, B=(-Cf).tocsr(), rhs_u=np.zeros(Kff.shape[0]),
        rhs_p=np.zeros(C.shape[0]), mean_vector=m))
    assert np.abs(u).max() < 1e-14
    assert np.abs(p).max() < 1e-14
    assert lam == pytest.approx(0.0, abs=1e-14)


def manufactured_stokes(h):
    """Steady Stokes with u = curl of a scalar cubic, p = x - 1/2."""
    mesh = generate_rect_mesh((0, 0, 1, 1), h, 2)
    spaces = build_taylor_hood(mesh, 2)
    params = PhaseParams(1.0, 1.0, 1.0, 1.0, 1.0)

    # psi = x^2 y  ->  u = (x^2, -2xy), div u = 0
    def exact_u(x, y):
        return (x * x, -2.0 * x * y)

    # f = -laplace(u) + grad p = (-2, 0) + (1, 0)
    def force(x, y):
        return (-1.0, 0.0)

    u_bc = interpolate(spaces.velocity, exact_u, vector=True)
    f_nodal = interpolate(spaces.velocity, force, vector=True)
    M = assemble("M", mesh, spaces)
    load = M @ f_nodal
    # steady Stokes: take one huge implicit step with zero transport
    u, p, lam = flow_solve(mesh, spaces, params, 1e12, np.zeros_like(u_bc),
                           transport=np.zeros_like(u_bc), load=load,
                           boundary_values=u_bc)
    return mesh, spaces, u, p, lam, u_bc


def test_saddle_manufactured_stokes():
    mesh, spaces, u, p, lam, u_exact = manufactured_stokes(0.25)
    # quadratic velocity and linear pressure are reproduced exactly
    assert np.abs(u - u_exact).max() < 1e-9
    pe = interpolate(spaces.pressure, lambda x, y: x - 0.5)
    m = pressure_mean_vector(mesh, spaces)
    assert np.abs(m @ p) < 1e-10
    shift = (m @ (p - pe)) / (m @ np.ones_like(m))
    assert np.abs(p - pe - shift).max() < 1e-9
    assert abs(lam) < 1e-6


def test_saddle_divergence_residual():
    mesh, spaces, u, p, lam, _ = manufactured_stokes(0.25)
    C = assemble("C", mesh, spaces)
    assert np.abs(C @ u).max() < 1e-9


def test_saddle_deterministic():
    r1 = manufactured_stokes(0.25)
    r2 = manufactured_stokes(0.25)
    assert np.array_equal(r1[2], r2[2])
    assert np.array_equal(r1[3], r2[3])


def test_infsup_constant_stable_under_refinement():
    """Square root of the smallest nonzero eigenvalue of the
    pressure-mass-scaled Schur operator; must not collapse under one
    refinement (qualitative inf-sup check on tiny meshes)."""
    from scipy.linalg import eigh

    from alefem.assembly import scalar_mass

    vals = []
    for h in (0.5, 0.25):
        mesh = generate_rect_mesh((0, 0, 1, 1), h, 2)
        spaces = build_taylor_hood(mesh, 2)
        A = assemble("A", mesh, spaces) + assemble("M", mesh, spaces)
        C = assemble("C", mesh, spaces)
        bnd = spaces.vector_dofs(spaces.boundary_dofs)
        free = np.ones(2 * spaces.velocity.n_dofs, dtype=bool)
        free[bnd] = False
        Af = A.tocsr()[free][:, free].toarray()
        Cf = C[:, free].toarray()
        Mp = scalar_mass(mesh, spaces.pressure).toarray()
        S = Cf @ np.linalg.solve(Af, Cf.T)
        lam = eigh(S, Mp, eigvals_only=True)
        nonzero = lam[lam > 1e-10 * lam.max()]
        vals.append(np.sqrt(nonzero.min()))
        assert 2 * spaces.velocity.n_dofs <= 600  # stays a tiny problem
    assert vals[1] > 0.5 * vals[0]
    assert vals[1] > 0.05

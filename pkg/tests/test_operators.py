import numpy as np
import pytest

from dualflow.assemble import (
    assemble_baroclinic,
    assemble_buoyancy,
    assemble_curl_rhs,
    assemble_curlcurl,
    assemble_div,
    assemble_mass,
    assemble_particle_convection,
    assemble_rotation,
    assemble_vorticity_convection,
    assemble_vorticity_neumann,
    assemble_wall_mass,
    skew_part,
)
from dualflow.mesh import (
    TAG_BOTTOM,
    TAG_TOP,
    ChannelGeometry,
    build_channel_mesh,
    build_periodic_rect_mesh,
)
from dualflow.quadrature import interval_rule
from dualflow.spaces import (
    Field,
    constant_coefficients,
    discrete_curl,
    interpolate,
    make_space,
    project,
)


@pytest.fixture
def square2():
    geom = ChannelGeometry(length=1.0, height=1.0, lock_length=0.5)
    return build_channel_mesh(geom, 1, 1, "left")


@pytest.fixture
def channel():
    geom = ChannelGeometry(length=2.0, height=1.0, lock_length=0.5)
    return build_channel_mesh(geom, 6, 3, "left")


def spaces_for(mesh, N):
    return (
        make_space(mesh, "CG", N),
        make_space(mesh, "RT", N),
        make_space(mesh, "DG", N - 1),
    )


def test_dg0_mass_is_cell_areas(square2):
    Q = make_space(square2, "DG", 0)
    M = assemble_mass(Q, 2).toarray()
    assert np.allclose(M, np.diag([0.5, 0.5]), atol=1e-14)


def test_cg_mass_entries_sum_to_area(channel):
    W = make_space(channel, "CG", 2)
    M = assemble_mass(W, 6)
    assert abs(M.sum() - channel.total_area()) < 1e-12


@pytest.mark.parametrize("family,deg", [("CG", 2), ("RT", 1), ("DG", 1)])
def test_mass_symmetry(channel, family, deg):
    M = assemble_mass(make_space(channel, family, deg), 6)
    assert abs(M - M.T).max() <= 1e-14 * abs(M).max()


def test_mass_positive_definite(channel):
    for family, deg in [("CG", 1), ("CG", 2), ("RT", 2), ("DG", 1)]:
        M = assemble_mass(make_space(channel, family, deg), 6).toarray()
        np.linalg.cholesky(M)  # raises if not SPD


def test_div_of_curl_vanishes(channel):
    W, U, Q = spaces_for(channel, 1)
    D, _ = assemble_div(U, Q, 4)
    rng = np.random.default_rng(0)
    psi = Field(W, rng.standard_normal(W.dim))
    u = discrete_curl(psi, U)
    assert np.max(np.abs(D @ u.coefficients)) < 1e-12


def test_p_is_transpose_of_d_bitwise(channel):
    _, U, Q = spaces_for(channel, 2)
    D, P = assemble_div(U, Q, 6)
    assert (abs(P - D.T) != 0).nnz == 0


def test_div_pairing_divergence_theorem(square2):
    _, U, Q = spaces_for(square2, 1)
    D, _ = assemble_div(U, Q, 4)
    u = interpolate(U, lambda x, y: (x, y))
    ones = constant_coefficients(Q)
    # <div u, 1> = 2 * area by the divergence theorem
    assert abs(ones @ (D @ u.coefficients) - 2.0 * 1.0) < 1e-12


def test_curlcurl_kernel_and_symmetry(channel):
    W = make_space(channel, "CG", 1)
    L = assemble_curlcurl(W, 4)
    ones = constant_coefficients(W)
    assert np.max(np.abs(L @ ones)) < 1e-13
    assert abs(L - L.T).max() <= 1e-14 * abs(L).max()


def test_curlcurl_linear_energy(square2):
    W = make_space(square2, "CG", 1)
    L = assemble_curlcurl(W, 4)
    om = interpolate(W, lambda x, y: x)
    # curl(x) = (0, -1), so the curl-curl energy equals the area
    assert abs(om.coefficients @ (L @ om.coefficients) - 1.0) < 1e-13


def test_rotation_zero_for_zero_vorticity(channel):
    W, U, _ = spaces_for(channel, 1)
    R, l = assemble_rotation(Field(W, np.zeros(W.dim)), U, 4)
    assert abs(R).max() == 0.0
    assert np.max(np.abs(l)) == 0.0


@pytest.mark.parametrize("N", [1, 2])
def test_rotation_skew(channel, N):
    W, U, _ = spaces_for(channel, N)
    rng = np.random.default_rng(N)
    om = Field(W, rng.standard_normal(W.dim))
    R, _ = assemble_rotation(om, U, 2 * N + 2)
    assert abs(R + R.T).max() <= 1e-13 * max(abs(R).max(), 1e-30)
    for _ in range(5):
        u = rng.standard_normal(U.dim)
        assert abs(u @ (R @ u)) <= 1e-12 * (u @ u) * max(abs(R).max(), 1.0)


def test_rotation_constant_fields(square2):
    """With omega=1: <1 x (1,0), (1,0)> = 0 and <1 x (1,0), (0,1)> = 1."""
    W, U, _ = spaces_for(square2, 1)
    om = project(W, lambda x, y: 1.0)
    R, _ = assemble_rotation(om, U, 4)
    ex = interpolate(U, lambda x, y: (np.ones_like(x), np.zeros_like(x)))
    ey = interpolate(U, lambda x, y: (np.zeros_like(x), np.ones_like(x)))
    assert abs(ex.coefficients @ (R @ ex.coefficients)) < 1e-12
    assert abs(ey.coefficients @ (R @ ex.coefficients) - 1.0) < 1e-12


def test_viscous_vector_rigid_rotation(channel):
    """l(omega) = <curl omega, v>; for omega = x, curl omega = (0, -1)."""
    W, U, _ = spaces_for(channel, 1)
    om = interpolate(W, lambda x, y: x)
    _, l = assemble_rotation(om, U, 4)
    ey = interpolate(U, lambda x, y: (np.zeros_like(x), np.ones_like(x)))
    assert abs(ey.coefficients @ l + channel.total_area()) < 1e-12


def test_vorticity_convection_zero_velocity(channel):
    W, U, _ = spaces_for(channel, 1)
    G = assemble_vorticity_convection(Field(U, np.zeros(U.dim)), W, 4)
    assert abs(G).max() == 0.0


@pytest.mark.parametrize("N", [1, 2])
def test_vorticity_convection_skew_part(channel, N):
    W, U, _ = spaces_for(channel, N)
    rng = np.random.default_rng(N + 10)
    u = Field(U, rng.standard_normal(U.dim))
    C = skew_part(assemble_vorticity_convection(u, W, 2 * N + 2))
    assert abs(C + C.T).max() == 0.0  # exact by construction
    for _ in range(5):
        om = rng.standard_normal(W.dim)
        assert abs(om @ (C @ om)) <= 1e-12 * (om @ om) * max(abs(C).max(), 1.0)


def solenoidal_velocity(mesh, N, rng):
    """Divergence-free RT field with u.n = 0, as produced by the scheme."""
    from dualflow.spaces import wall_trace_dofs

    W = make_space(mesh, "CG", N)
    U = make_space(mesh, "RT", N)
    coef = rng.standard_normal(W.dim)
    coef[wall_trace_dofs(W, (1, 2, 3, 4))] = 0.0  # psi = 0 on the boundary
    return discrete_curl(Field(W, coef), U)


def test_vorticity_convection_conserves_constants(channel):
    """With u.n = 0 and div u = 0, constants are transported exactly."""
    W, U, _ = spaces_for(channel, 2)
    rng = np.random.default_rng(8)
    u = solenoidal_velocity(channel, 2, rng)
    C = skew_part(assemble_vorticity_convection(u, W, 6))
    ones = constant_coefficients(W)
    om = rng.standard_normal(W.dim)
    # pairing the transport with the constant test function: pure boundary flux
    assert abs(ones @ (C @ om)) < 1e-12 * np.max(np.abs(om))


def test_particle_convection_zero_inputs(channel):
    W, U, _ = spaces_for(channel, 1)
    A = assemble_particle_convection(Field(U, np.zeros(U.dim)), 0.0, W, 4, 3)
    assert abs(A).max() == 0.0
    with pytest.raises(ValueError):
        assemble_particle_convection(Field(U, np.zeros(U.dim)), -0.1, W, 4, 3)


@pytest.mark.parametrize("N", [1, 2])
def test_particle_mass_identity(channel, N):
    """Pairing the full transport operator with the constant test function
    reduces to the bottom-wall settling outflux (independent quadrature)."""
    W, U, _ = spaces_for(channel, N)
    rng = np.random.default_rng(N + 3)
    u = solenoidal_velocity(channel, N, rng)
    u_s = 0.02
    A = assemble_particle_convection(u, u_s, W, 2 * N + 2, N + 2)
    phi = Field(W, rng.standard_normal(W.dim))
    ones = constant_coefficients(W)
    got = ones @ (A @ phi.coefficients)

    # independent oracle: bottom-wall quadrature with a different rule
    t, wq = interval_rule(2 * N + 5)
    total = 0.0
    from dualflow.elements import LOCAL_EDGES, REF_VERTICES

    for e in channel.wall_edges(TAG_BOTTOM):
        c, loc = channel.edge_cells[e, 0], channel.edge_local[e, 0]
        a, b = LOCAL_EDGES[loc]
        pa, pb = channel.cell_coords[c, a], channel.cell_coords[c, b]
        length = np.hypot(*(pb - pa))
        ra, rb = REF_VERTICES[a], REF_VERTICES[b]
        rpts = ra[None, :] + t[:, None] * (rb - ra)[None, :]
        vals, _ = W.element.tabulate(rpts)
        phi_e = vals @ phi.coefficients[W.cell_dofs[c]]
        total += length * np.sum(wq * phi_e)
    assert abs(got - u_s * total) < 1e-12 * max(1.0, abs(got))


def test_particle_convection_paper_literal_flag(channel):
    W, U, _ = spaces_for(channel, 1)
    rng = np.random.default_rng(4)
    u = Field(U, rng.standard_normal(U.dim))
    u_s = 0.05
    A_ours = assemble_particle_convection(u, u_s, W, 4, 3)
    A_paper = assemble_particle_convection(u, u_s, W, 4, 3, paper_literal_signs=True)
    B1 = assemble_wall_mass(W, TAG_TOP, 3)
    diff = (A_paper - A_ours) + u_s * B1
    assert abs(diff).max() < 1e-14


def test_buoyancy_examples(square2):
    W, U, _ = spaces_for(square2, 1)
    b0 = assemble_buoyancy(Field(W, np.zeros(W.dim)), U, 4)
    assert np.max(np.abs(b0)) == 0.0
    phi1 = project(W, lambda x, y: 1.0)
    b = assemble_buoyancy(phi1, U, 4)
    vdown = interpolate(U, lambda x, y: (np.zeros_like(x), -np.ones_like(x)))
    assert abs(vdown.coefficients @ b - 1.0) < 1e-12


def test_buoyancy_baroclinic_compatibility():
    """<phi e_g, curl psi> = <grad phi x e_g, psi> on a torus (no boundary).

    Both sides equal -int(psi d(phi)/dx) after integration by parts; this
    ties the momentum buoyancy vector to the vorticity baroclinic source.
    """
    mesh = build_periodic_rect_mesh(1.0, 1.0, 4, 3, "left")
    W = make_space(mesh, "CG", 2)
    U = make_space(mesh, "RT", 2)
    rng = np.random.default_rng(11)
    phi = Field(W, rng.standard_normal(W.dim))
    psi = Field(W, rng.standard_normal(W.dim))
    u = discrete_curl(psi, U)
    lhs = u.coefficients @ assemble_buoyancy(phi, U, 6)
    rhs = psi.coefficients @ assemble_baroclinic(phi, W, 6)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_baroclinic_examples(channel):
    W = make_space(channel, "CG", 1)
    ones = constant_coefficients(W)
    c = assemble_baroclinic(project(W, lambda x, y: x + 0 * y), W, 4)
    assert abs(ones @ c + channel.total_area()) < 1e-12  # -int d(phi)/dx = -area
    cy = assemble_baroclinic(project(W, lambda x, y: y), W, 4)
    assert np.max(np.abs(cy)) < 1e-13
    cc = assemble_baroclinic(project(W, lambda x, y: 3.7), W, 4)
    assert np.max(np.abs(cc)) < 1e-13


def test_curl_rhs_examples(channel):
    W, U, _ = spaces_for(channel, 1)
    r0 = assemble_curl_rhs(Field(U, np.zeros(U.dim)), W, 4)
    assert np.max(np.abs(r0)) == 0.0
    # rigid rotation has curl 2: pairing with interior test functions = 2 int(xi)
    u = interpolate(U, lambda x, y: (-y, x))
    r = assemble_curl_rhs(u, W, 4)
    M = assemble_mass(W, 4)
    integrals = M @ constant_coefficients(W)
    from dualflow.spaces import wall_trace_dofs

    boundary = set(wall_trace_dofs(W, (1, 2, 3, 4)))
    interior = [i for i in range(W.dim) if i not in boundary]
    assert len(interior) > 0
    for i in interior:
        assert abs(r[i] - 2.0 * integrals[i]) < 1e-12


def test_curl_rhs_mean_on_torus():
    """omega_tilde = curl_h u has zero mean on a torus (no circulation)."""
    from dualflow.linsolve import LinearSystem, lu_solve

    mesh = build_periodic_rect_mesh(1.0, 1.0, 4, 4, "left")
    W = make_space(mesh, "CG", 1)
    U = make_space(mesh, "RT", 1)
    rng = np.random.default_rng(2)
    psi = Field(W, rng.standard_normal(W.dim))
    u = discrete_curl(psi, U)
    r = assemble_curl_rhs(u, W, 4)
    M = assemble_mass(W, 4)
    om, _ = lu_solve(LinearSystem(M, r))
    ones = constant_coefficients(W)
    assert abs(ones @ (M @ om)) < 1e-12


def test_vorticity_neumann_examples(channel):
    W = make_space(channel, "CG", 2)
    const = project(W, lambda x, y: 4.2)
    g = assemble_vorticity_neumann(const, W, 4)
    assert np.max(np.abs(g)) < 1e-12
    gx = assemble_vorticity_neumann(interpolate(W, lambda x, y: x), W, 4)
    assert np.max(np.abs(gx)) < 1e-13
    omy = interpolate(W, lambda x, y: y)
    ones = constant_coefficients(W)
    g_top = assemble_vorticity_neumann(omy, W, 4, walls=(TAG_TOP,))
    g_bot = assemble_vorticity_neumann(omy, W, 4, walls=(TAG_BOTTOM,))
    wall_len = channel.bbox[1] - channel.bbox[0]
    assert abs(ones @ g_top - wall_len) < 1e-12
    assert abs(ones @ g_bot + wall_len) < 1e-12

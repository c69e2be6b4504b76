"""Assembly of the discrete operators of the dual-field scheme.

Matrix sparsity patterns are computed once per (test space, trial space)
pair and cached; repeated assembly only refills the CSR value array, in
a fixed cell order, so all operators are bitwise reproducible.

Index convention: for every matrix A produced here, A[i, j] pairs test
function i against trial function j.

The skew operators are skew *by construction*: the rotation matrix and
the skew part of the convection matrices are formed as exact
transpose-differences, so quadratic invariants are conserved to
round-off regardless of quadrature.
"""

import numpy as np
import scipy.sparse as sp

from . import kernels

GRAVITY = (0.0, -1.0)


class _Pattern:
    """Fixed CSR pattern with per-cell scatter positions."""

    def __init__(self, row_dofs, col_dofs, shape):
        C, na = row_dofs.shape
        nb = col_dofs.shape[1]
        rows = np.repeat(row_dofs, nb, axis=1).ravel()
        cols = np.tile(col_dofs, (1, na)).ravel()
        keys = rows.astype(np.int64) * shape[1] + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.pos = inverse.reshape(C, na, nb)
        self.indices = (uniq % shape[1]).astype(np.int32)
        urows = (uniq // shape[1]).astype(np.int64)
        self.indptr = np.zeros(shape[0] + 1, dtype=np.int32)
        np.add.at(self.indptr, urows + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.nnz = len(uniq)
        self.shape = shape

    def build(self, local):
        data = np.zeros(self.nnz)
        kernels.scatter_matrix(data, self.pos, local)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


def _pattern(row_space, col_space):
    key = ("pat", id(col_space))
    cache = row_space._cache.setdefault("patterns", {})
    if key not in cache:
        pat = _Pattern(
            row_space.cell_dofs, col_space.cell_dofs, (row_space.dim, col_space.dim)
        )
        cache[key] = (col_space, pat)  # keep col_space alive so its id stays unique
    return cache[key][1]


def assemble_mass(space, qdegree):
    """Mass matrix <trial, test>; SPD for CG/DG/RT alike."""
    tab = space.volume_data(qdegree)
    if space.family == "RT":
        local = kernels.mass_vec(tab.weights, tab.val)
    else:
        local = kernels.mass_ref(tab.weights, tab.val)
    return _pattern(space, space).build(local)


def assemble_curlcurl(space, qdegree):
    """<curl trial, curl test> on a scalar space; equals the stiffness form."""
    tab = space.volume_data(qdegree)
    local = kernels.gradgrad(tab.weights, tab.grad)
    return _pattern(space, space).build(local)


def assemble_div(U, Q, qdegree):
    """Divergence pairing D[q, u] = <div u, q> and its exact transpose P."""
    if U.mesh is not Q.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    if Q.degree != U.degree - 1:
        raise ValueError(f"incompatible pair RT_{U.degree} / DG_{Q.degree}")
    utab = U.volume_data(qdegree)
    qtab = Q.volume_data(qdegree)
    local = kernels.div_pairing(utab.weights, utab.div, qtab.val)
    D = _pattern(Q, U).build(local)
    P = D.T.tocsr()
    return D, P


def assemble_rotation(omega, U, qdegree):
    """Rotation operator R[i,j] = <omega x u_j, u_i> (exactly skew) and
    the vector l[i] = <curl omega, u_i>."""
    W, mesh = omega.space, U.mesh
    utab = U.volume_data(qdegree)
    wtab = W.volume_data(qdegree)
    wq = kernels.field_scalar(W.cell_dofs, omega.coefficients, wtab.val)
    local = kernels.rotation(utab.weights, wq, utab.val)
    R = _pattern(U, U).build(local)
    gw = kernels.field_scalar_grad(W.cell_dofs, omega.coefficients, wtab.grad)
    curl_w = np.stack([gw[..., 1], -gw[..., 0]], axis=-1)
    lv = np.zeros(U.dim)
    kernels.scatter_vector(lv, U.cell_dofs, kernels.vec_dot(utab.weights, curl_w, utab.val))
    return R, lv


def _convection_matrix(u, u_extra, W, qdegree):
    """G[a,b] = <w_b, div(u_adv w_a)> with u_adv = u + u_extra (constant)."""
    U = u.space
    utab = U.volume_data(qdegree)
    wtab = W.volume_data(qdegree)
    uq = kernels.field_vec(U.cell_dofs, u.coefficients, utab.val)
    if u_extra is not None:
        uq = uq + np.asarray(u_extra, dtype=float)[None, None, :]
    duq = kernels.field_div(U.cell_dofs, u.coefficients, utab.div)
    local = kernels.convection(wtab.weights, wtab.val, wtab.grad, uq, duq)
    return _pattern(W, W).build(local)


def skew_part(G):
    """Exact skew-symmetrization 0.5*(G^T - G) used by the transport steps."""
    return 0.5 * (G.T.tocsr() - G)


def assemble_vorticity_convection(u, W, qdegree):
    """The matrix G with G[a,b] = <w_b, div(u w_a)>; the scheme applies
    its exact skew part."""
    return _convection_matrix(u, None, W, qdegree)


def assemble_wall_mass(space, tag, qdegree):
    """Boundary mass matrix <trial, test> over one tagged wall."""
    tab = space.boundary_data(tag, qdegree)
    if len(tab.edges) == 0:
        return sp.csr_matrix((space.dim, space.dim))
    local = np.einsum("eq,eqa,eqb->eab", tab.weights, tab.val, tab.val)
    rows = np.repeat(tab.dofs, tab.dofs.shape[1], axis=1).ravel()
    cols = np.tile(tab.dofs, (1, tab.dofs.shape[1])).ravel()
    B = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(space.dim, space.dim))
    B.sum_duplicates()
    return B


def assemble_particle_convection(u, u_s, W, qdegree, bdegree, paper_literal_signs=False):
    """Skew transport operator for the particle field, including the
    settling boundary terms on the top and bottom walls.

    The volume part is the exact skew part of <w_b, div(u_p w_a)> with
    u_p = u + u_s * e_g.  Both wall terms enter with +u_s/2 so that
    pairing against the constant test function reduces the operator to
    the bottom-wall settling outflux; `paper_literal_signs` flips the
    top-wall term for comparison, which breaks global mass conservation.
    """
    if u_s < 0:
        raise ValueError(f"settling speed must be nonnegative, got {u_s}")
    from .mesh import TAG_BOTTOM, TAG_TOP

    extra = (GRAVITY[0] * u_s, GRAVITY[1] * u_s)
    G = _convection_matrix(u, extra, W, qdegree)
    A = skew_part(G)
    if u_s != 0.0:
        B1 = assemble_wall_mass(W, TAG_TOP, bdegree)
        B3 = assemble_wall_mass(W, TAG_BOTTOM, bdegree)
        s1 = -0.5 if paper_literal_signs else 0.5
        A = A + u_s * (s1 * B1 + 0.5 * B3)
    return A


def assemble_buoyancy(phi, U, qdegree, gravity=GRAVITY):
    """b[i] = <phi e_g, u_i>."""
    W = phi.space
    utab = U.volume_data(qdegree)
    wtab = W.volume_data(qdegree)
    pq = kernels.field_scalar(W.cell_dofs, phi.coefficients, wtab.val)
    F = np.empty(pq.shape + (2,))
    F[..., 0] = pq * gravity[0]
    F[..., 1] = pq * gravity[1]
    out = np.zeros(U.dim)
    kernels.scatter_vector(out, U.cell_dofs, kernels.vec_dot(utab.weights, F, utab.val))
    return out


def assemble_baroclinic(phi, W, qdegree, gravity=GRAVITY):
    """c[i] = <grad phi x e_g, w_i>; with e_g=(0,-1) this is -d(phi)/dx."""
    P = phi.space
    ptab = P.volume_data(qdegree)
    wtab = W.volume_data(qdegree)
    gp = kernels.field_scalar_grad(P.cell_dofs, phi.coefficients, ptab.grad)
    fq = gp[..., 0] * gravity[1] - gp[..., 1] * gravity[0]
    out = np.zeros(W.dim)
    kernels.scatter_vector(out, W.cell_dofs, kernels.vec_scalar(wtab.weights, fq, wtab.val))
    return out


def assemble_curl_rhs(u, W, qdegree):
    """r[i] = <u, curl w_i>, the right-hand side of the weak curl recovery."""
    U = u.space
    utab = U.volume_data(qdegree)
    wtab = W.volume_data(qdegree)
    uq = kernels.field_vec(U.cell_dofs, u.coefficients, utab.val)
    out = np.zeros(W.dim)
    kernels.scatter_vector(out, W.cell_dofs, kernels.vec_rotgrad(wtab.weights, uq, wtab.grad))
    return out


def assemble_vorticity_neumann(omega_tilde, W, bdegree, walls=None):
    """g[i] = <w_i, grad(omega_tilde).n> over the no-slip walls.

    Uses the identity (curl w) x n = grad(w).n, evaluated one-sidedly
    from the boundary cells.
    """
    from .mesh import TAG_BOTTOM, TAG_TOP

    walls = walls if walls is not None else (TAG_TOP, TAG_BOTTOM)
    Wt = omega_tilde.space
    out = np.zeros(W.dim)
    for tag in walls:
        tab = W.boundary_data(tag, bdegree)
        if len(tab.edges) == 0:
            continue
        ttab = Wt.boundary_data(tag, bdegree)
        g = np.einsum("eqnd,en->eqd", ttab.grad, omega_tilde.coefficients[ttab.dofs])
        gn = np.einsum("eqd,ed->eq", g, tab.normals)
        local = np.einsum("eq,eqa->ea", tab.weights * gn, tab.val)
        np.add.at(out, tab.dofs.ravel(), local.ravel())
    return out


def assemble_gradient_dot(space, qdegree, direction=GRAVITY):
    """Static vector gvec[i] = <grad w_i, direction>; phi^T gvec = <grad phi, e>."""
    tab = space.volume_data(qdegree)
    d = np.asarray(direction, dtype=float)
    fq = tab.grad[..., 0] * d[0] + tab.grad[..., 1] * d[1]
    local = np.einsum("cq,cqa->ca", tab.weights, fq)
    out = np.zeros(space.dim)
    kernels.scatter_vector(out, space.cell_dofs, local)
    return out


def assemble_weighted_flux(space, weight_fn, qdegree):
    """Static vector v[i] = integral over the whole boundary of
    weight(x) grad(w_i).n; used by the cross-literature dissipation
    variant."""
    from .mesh import WALL_TAGS

    out = np.zeros(space.dim)
    for tag in WALL_TAGS:
        tab = space.boundary_data(tag, qdegree)
        if len(tab.edges) == 0:
            continue
        wq = weight_fn(tab.points[..., 0], tab.points[..., 1])
        gn = np.einsum("eqnd,ed->eqn", tab.grad, tab.normals)
        local = np.einsum("eq,eqn->en", tab.weights * wq, gn)
        np.add.at(out, tab.dofs.ravel(), local.ravel())
    return out

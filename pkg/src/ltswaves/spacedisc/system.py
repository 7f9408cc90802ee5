"""Approximation spaces, assembled operators and the first-order reduction."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..mesh import DofPartition, cg_layout, dg_layout, fine_dof_mask
from .quadrature import gauss_rule, gll_rule, lagrange_derivatives, lagrange_values


def as_function(f):
    """Coefficients may be given as constants or callables of x."""
    if callable(f):
        return f
    val = float(f)
    return lambda x: np.full_like(np.asarray(x, dtype=float), val)


class Space:
    """Scalar polynomial space of degree l on a mesh, continuous or broken.

    The basis is nodal on the Gauss-Lobatto points of each element, which
    makes traces trivial and Gauss-Lobatto quadrature diagonalize the mass.
    """

    def __init__(self, mesh, l, continuous, bc="dirichlet"):
        self.mesh = mesh
        self.l = l
        self.continuous = continuous
        self.bc = bc
        if continuous:
            self.n_dofs, self.element_dofs, self.node_coords = cg_layout(mesh, l, bc)
        else:
            self.n_dofs, self.element_dofs, self.node_coords = dg_layout(mesh, l)
        self.ref_nodes, self.ref_weights = gll_rule(l + 1)
        self.qx, self.qw = gauss_rule(l + 2)
        self.basis_q = lagrange_values(self.ref_nodes, self.qx)
        self.dbasis_q = lagrange_derivatives(self.ref_nodes, self.qx)
        v = mesh.vertices
        self.jac = 0.5 * (v[1:] - v[:-1])                      # per element
        self.quad_x = v[:-1, None] + (self.qx[None, :] + 1.0) * self.jac[:, None]
        self.node_x = v[:-1, None] + (self.ref_nodes[None, :] + 1.0) * self.jac[:, None]

    def gather(self, values):
        """Per-element coefficient matrix; eliminated dofs read as zero."""
        ed = self.element_dofs
        safe = np.maximum(ed, 0)
        return np.where(ed >= 0, np.asarray(values)[safe], 0.0)

    def values_at_quad(self, values):
        return self.gather(values) @ self.basis_q.T

    def l2_error(self, values, f):
        """Elementwise Gauss quadrature of (u_h - f)^2, then the square root."""
        diff = self.values_at_quad(values) - f(self.quad_x)
        return float(np.sqrt(np.dot(self.jac, (diff**2) @ self.qw)))

    def l2_norm(self, values):
        return self.l2_error(values, lambda x: np.zeros_like(x))

    @cached_property
    def _ref_mass_inv(self):
        m = (self.basis_q * self.qw[:, None]).T @ self.basis_q
        return np.linalg.inv(m)

    @cached_property
    def _consistent_mass(self):
        rows, cols, vals = [], [], []
        m_ref = (self.basis_q * self.qw[:, None]).T @ self.basis_q
        for e in range(self.mesh.n_elements):
            dofs = self.element_dofs[e]
            for i, gi in enumerate(dofs):
                if gi < 0:
                    continue
                for j, gj in enumerate(dofs):
                    if gj < 0:
                        continue
                    rows.append(gi)
                    cols.append(gj)
                    vals.append(self.jac[e] * m_ref[i, j])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_dofs, self.n_dofs))

    def project(self, f):
        """L2 projection of f onto the space.

        Broken spaces project element by element; the continuous space
        solves with the consistent mass so projecting a member of the
        space reproduces its coefficients.
        """
        fq = as_function(f)(self.quad_x)
        rhs_loc = (fq * self.qw[None, :]) @ self.basis_q * self.jac[:, None]
        if not self.continuous:
            coefs = rhs_loc @ self._ref_mass_inv.T / self.jac[:, None]
            return coefs.reshape(-1)
        rhs = np.zeros(self.n_dofs)
        ed = self.element_dofs
        for e in range(self.mesh.n_elements):
            for i, gi in enumerate(ed[e]):
                if gi >= 0:
                    rhs[gi] += rhs_loc[e, i]
        return spla.spsolve(self._consistent_mass.tocsc(), rhs)


@dataclass(frozen=True)
class GridFunction:
    """Coefficient vector with respect to a space's nodal basis."""

    values: np.ndarray
    space: Space
    name: str = "u"
    t: float = 0.0


def l2_error(g, exact, t=None):
    """L2 distance between a grid function and a callable x -> value."""
    return g.space.l2_error(g.values, exact)


@dataclass(frozen=True)
class AssembledSystem:
    """Spatial operators of one discretization.

    ``order_form`` is "second" for the displacement formulations (mass,
    damping mass and stiffness act on u) and "first" for the two-field
    velocity/gradient formulation (stiff then holds the flux matrix).
    """

    family: str
    l: int
    mesh: object
    space: Space
    M: sp.csr_matrix
    M_sigma: sp.csr_matrix
    stiff: sp.csr_matrix
    order_form: str
    bc: str
    c: object = field(repr=False, default=None)
    sigma: object = field(repr=False, default=None)
    alpha: float = None
    block_size: int = 0      # 0 means diagonal mass

    @property
    def n_scalar(self):
        return self.space.n_dofs


def _diag_of(m):
    return np.asarray(m.diagonal())


def _block_scale_matrices(asm):
    """M^(1/2) and M^(-1/2) as sparse matrices (diagonal or blockwise)."""
    if asm.block_size == 0:
        d = _diag_of(asm.M)
        if np.any(d <= 0):
            raise ValueError("mass matrix must be positive definite")
        return sp.diags(np.sqrt(d)).tocsr(), sp.diags(1.0 / np.sqrt(d)).tocsr()
    bs = asm.block_size
    blocks = _extract_blocks(asm.M, bs)
    w, v = np.linalg.eigh(blocks)
    if np.any(w <= 0):
        raise ValueError("mass matrix must be positive definite")
    half = np.einsum("bij,bj,bkj->bik", v, np.sqrt(w), v)
    inv_half = np.einsum("bij,bj,bkj->bik", v, 1.0 / np.sqrt(w), v)
    return _blocks_to_sparse(half), _blocks_to_sparse(inv_half)


def _extract_blocks(m, bs):
    """Aligned diagonal blocks of a block-diagonal sparse matrix,
    stacked into shape (n/bs, bs, bs)."""
    n = m.shape[0]
    if n % bs:
        raise ValueError("mass block size does not divide the dimension")
    coo = m.tocoo()
    if np.any(coo.row // bs != coo.col // bs):
        raise ValueError("matrix is not block-diagonal with the given block size")
    blocks = np.zeros((n // bs, bs, bs))
    blocks[coo.row // bs, coo.row % bs, coo.col % bs] = coo.data
    return blocks


def _blocks_to_sparse(blocks):
    nb, bs, _ = blocks.shape
    base = np.arange(nb)[:, None, None] * bs
    rows = base + np.arange(bs)[None, :, None]
    cols = base + np.arange(bs)[None, None, :]
    rows = np.broadcast_to(rows, blocks.shape).ravel()
    cols = np.broadcast_to(cols, blocks.shape).ravel()
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(nb * bs, nb * bs))


def _block_inverse(m, bs):
    if bs <= 1:
        d = np.asarray(m.diagonal())
        if np.any(d == 0):
            raise ValueError("mass matrix must be invertible")
        return sp.diags(1.0 / d).tocsr()
    return _blocks_to_sparse(np.linalg.inv(_extract_blocks(m, bs)))


class SemiDiscreteSystem:
    """First-order form dy/dt = B y together with the fine/coarse split."""

    def __init__(self, B, partition, blocks, source, m_half=None, m_inv_half=None):
        self.B = B.tocsr()
        self.partition = partition
        self.dim = B.shape[0]
        self.blocks = blocks          # "z,zdot" or "v,w"
        self.source = source
        self._m_half = m_half
        self._m_inv_half = m_inv_half

    @cached_property
    def split(self):
        """(B(I-P), B P) as CSR matrices; columns outside/inside the mask."""
        mask = self.partition.fine_mask.astype(float)
        b_fine = (self.B @ sp.diags(mask)).tocsr()
        b_coarse = (self.B @ sp.diags(1.0 - mask)).tocsr()
        b_fine.eliminate_zeros()
        b_coarse.eliminate_zeros()
        return b_coarse, b_fine

    # ----- state <-> fields ----------------------------------------------

    def state_from_fields(self, u=None, v=None, w=None):
        """Assemble the state vector from field callables.

        Second-order systems take (u, v=du/dt); the two-field system takes
        (v, w).  Fields are projected onto the space.
        """
        space = self.source.space
        if self.blocks == "z,zdot":
            if u is None or v is None:
                raise ValueError("second-order systems need u and v")
            uu = space.project(u)
            vv = space.project(v)
            return np.concatenate([self._m_half @ uu, self._m_half @ vv])
        if v is None or w is None:
            raise ValueError("two-field systems need v and w")
        return np.concatenate([space.project(v), space.project(w)])

    def fields_from_state(self, y, t=0.0):
        """Split a state vector into named grid functions."""
        space = self.source.space
        n = space.n_dofs
        if self.blocks == "z,zdot":
            u = self._m_inv_half @ y[:n]
            du = self._m_inv_half @ y[n:]
            return {
                "u": GridFunction(u, space, "u", t),
                "v": GridFunction(du, space, "v", t),
            }
        return {
            "v": GridFunction(y[:n], space, "v", t),
            "w": GridFunction(y[n:], space, "w", t),
        }


def to_first_order(asm, partition=None, interface="fine"):
    """Reduce an assembled system to dy/dt = B y.

    Second-order systems are symmetrized with the inverse square root of
    the mass, giving the block form [[0, I], [-A, -D]]; the two-field
    system is multiplied by the block inverse of its mass.
    The spatial fine-dof mask is duplicated across both state blocks.
    """
    if partition is None:
        partition = fine_dof_mask(asm.mesh, asm.family, asm.l, asm.bc, interface)
    if partition.n_dofs != asm.n_scalar:
        raise ValueError("partition does not match the scalar dof count")
    n = asm.n_scalar
    if asm.order_form == "second":
        m_half, m_inv_half = _block_scale_matrices(asm)
        a = (m_inv_half @ asm.stiff @ m_inv_half).tocsr()
        d = (m_inv_half @ asm.M_sigma @ m_inv_half).tocsr()
        eye = sp.identity(n, format="csr")
        B = sp.bmat([[None, eye], [-a, -d]], format="csr")
        return SemiDiscreteSystem(
            B, partition.expanded(2), "z,zdot", asm, m_half, m_inv_half
        )
    if asm.order_form != "first":
        raise ValueError(f"unknown order form {asm.order_form!r}")
    m_inv = _block_inverse(asm.M, asm.block_size or 1)
    B = (m_inv @ (-asm.M_sigma - asm.stiff)).tocsr()
    return SemiDiscreteSystem(B, partition.expanded(2), "v,w", asm)


def project_initial(asm, u0, v0, w0=None):
    """Project initial data onto the discrete spaces.

    Returns (u, v) grid functions for second-order systems and (v, w) for
    the two-field system, where w = -grad(u0); if w0 is not supplied it is
    obtained from u0 by central differencing.
    """
    space = asm.space
    if asm.order_form == "second":
        return (
            GridFunction(space.project(u0), space, "u", 0.0),
            GridFunction(space.project(v0), space, "v", 0.0),
        )
    if w0 is None:
        u0f = as_function(u0)
        eps = 1e-6
        w0 = lambda x: -(u0f(x + eps) - u0f(x - eps)) / (2 * eps)
    return (
        GridFunction(space.project(v0), space, "v", 0.0),
        GridFunction(space.project(w0), space, "w", 0.0),
    )


def export_matrix_market(asm, basename):
    """Dump the assembled operators in Matrix Market coordinate format."""
    from scipy.io import mmwrite

    mmwrite(f"{basename}_mass.mtx", asm.M)
    mmwrite(f"{basename}_damping.mtx", asm.M_sigma)
    mmwrite(f"{basename}_stiff.mtx", asm.stiff)

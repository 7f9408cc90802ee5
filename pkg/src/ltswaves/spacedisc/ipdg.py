"""Symmetric interior-penalty discontinuous Galerkin discretization."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_rule, gll_rule, lagrange_derivatives, lagrange_values
from .system import AssembledSystem, Space, as_function

DEFAULT_PENALTY = {1: 5.0, 2: 12.0, 3: 20.0}


def assemble_ipdg(mesh, l, c=1.0, sigma=0.0, alpha=None, bc="dirichlet"):
    """Assemble the broken stiffness with interior-penalty coupling.

    In 1D the "edges" are the element endpoints: interior points carry
    jump/average terms from both neighbours, boundary points one-sided
    terms that impose the Dirichlet condition weakly (omitted entirely for
    Neumann).  The penalty on an edge is alpha * cmax^2 / hmin over the
    adjacent elements.
    """
    if l not in (1, 2, 3):
        raise ValueError("polynomial degree must be 1, 2 or 3")
    if alpha is None:
        alpha = DEFAULT_PENALTY[l]
    if alpha <= 0:
        raise ValueError("penalty parameter must be positive")
    c_f = as_function(c)
    sig_f = as_function(sigma)
    space = Space(mesh, l, continuous=False, bc=bc)
    n = space.n_dofs
    n_el = mesh.n_elements
    ed = space.element_dofs

    cq = c_f(space.quad_x)
    if np.any(cq <= 0):
        raise ValueError("wave speed must be strictly positive")

    qx, qw = gauss_rule(l + 2)
    gll_x, _ = gll_rule(l + 1)
    basis = lagrange_values(gll_x, qx)
    dref = lagrange_derivatives(gll_x, qx)
    m_ref = (basis * qw[:, None]).T @ basis

    rows, cols, vals = [], [], []
    m_rows, m_cols, m_vals = [], [], []
    s_rows, s_cols, s_vals = [], [], []

    def add(coo, gi, gj, v):
        coo[0].append(gi)
        coo[1].append(gj)
        coo[2].append(v)

    for e in range(n_el):
        jac = space.jac[e]
        scale = qw * c_f(space.quad_x[e]) ** 2 / jac
        k_loc = (dref * scale[:, None]).T @ dref
        m_loc = jac * m_ref
        ms_loc = jac * (basis * (qw * sig_f(space.quad_x[e]))[:, None]).T @ basis
        for i in range(l + 1):
            for j in range(l + 1):
                add((rows, cols, vals), ed[e, i], ed[e, j], k_loc[i, j])
                add((m_rows, m_cols, m_vals), ed[e, i], ed[e, j], m_loc[i, j])
                add((s_rows, s_cols, s_vals), ed[e, i], ed[e, j], ms_loc[i, j])

    # traces of the nodal basis at the reference endpoints
    val_ends = lagrange_values(gll_x, np.array([-1.0, 1.0]))
    der_ends = lagrange_derivatives(gll_x, np.array([-1.0, 1.0]))

    def face_terms(x_face, sides):
        """sides: list of (element, local end 0/1, jump sign).

        Builds the stacked jump and average-of-c^2-gradient trace vectors
        over the participating dofs, then scatters the three symmetric
        face contributions of the bilinear form.
        """
        dofs, jump, avg = [], [], []
        h_adj, c_adj = [], []
        nsides = len(sides)
        eps = 1e-8
        for e, end, sign in sides:
            h_e = 2.0 * space.jac[e]
            # one-sided trace value of the coefficient
            x_in = x_face - sign * eps * h_e
            c_side = float(np.asarray(c_f(np.array([x_in])))[0])
            dofs.extend(ed[e])
            jump.extend(sign * val_ends[end])
            avg.extend(c_side**2 * der_ends[end] / space.jac[e] / nsides)
            h_adj.append(h_e)
            c_adj.append(c_side)
        dofs = np.array(dofs)
        jump = np.array(jump)
        avg = np.array(avg)
        pen = alpha * max(c_adj) ** 2 / min(h_adj)
        block = -np.outer(avg, jump) - np.outer(jump, avg) + pen * np.outer(jump, jump)
        for i, gi in enumerate(dofs):
            for j, gj in enumerate(dofs):
                add((rows, cols, vals), gi, gj, block[i, j])

    for v_idx in range(1, n_el):
        # interior point between elements v_idx-1 (left, +) and v_idx (right, -)
        face_terms(
            mesh.vertices[v_idx],
            [(v_idx - 1, 1, +1.0), (v_idx, 0, -1.0)],
        )
    if bc == "dirichlet":
        face_terms(mesh.vertices[0], [(0, 0, -1.0)])
        face_terms(mesh.vertices[-1], [(n_el - 1, 1, +1.0)])
    elif bc != "neumann":
        raise ValueError(f"unknown boundary condition {bc!r}")

    shape = (n, n)
    return AssembledSystem(
        family="ipdg",
        l=l,
        mesh=mesh,
        space=space,
        M=sp.csr_matrix((m_vals, (m_rows, m_cols)), shape=shape),
        M_sigma=sp.csr_matrix((s_vals, (s_rows, s_cols)), shape=shape),
        stiff=sp.csr_matrix((vals, (rows, cols)), shape=shape),
        order_form="second",
        bc=bc,
        c=c_f,
        sigma=sig_f,
        alpha=float(alpha),
        block_size=l + 1,
    )

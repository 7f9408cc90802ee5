"""Continuous elements with nodal (Gauss-Lobatto) mass lumping."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_rule, gll_rule, lagrange_derivatives
from .system import AssembledSystem, Space, as_function


def assemble_continuous(mesh, l, c=1.0, sigma=0.0, bc="dirichlet"):
    """Mass-lumped continuous discretization of the damped wave operator.

    The mass and damping mass use the Gauss-Lobatto rule collocated with
    the basis nodes, which lumps them exactly onto the diagonal; the
    stiffness uses a Gauss rule exact for the polynomial integrands.
    """
    if l not in (1, 2, 3):
        raise ValueError("polynomial degree must be 1, 2 or 3")
    c_f = as_function(c)
    sig_f = as_function(sigma)
    space = Space(mesh, l, continuous=True, bc=bc)
    n = space.n_dofs

    cq = c_f(space.quad_x)
    if np.any(cq <= 0):
        raise ValueError("wave speed must be strictly positive")
    if np.any(sig_f(space.quad_x) < 0):
        raise ValueError("damping coefficient must be non-negative")

    gll_x, gll_w = gll_rule(l + 1)
    mass = np.zeros(n)
    damp = np.zeros(n)
    ed = space.element_dofs
    sig_nodes = sig_f(space.node_x)
    for e in range(mesh.n_elements):
        for i, g in enumerate(ed[e]):
            if g < 0:
                continue
            w = space.jac[e] * gll_w[i]
            mass[g] += w
            damp[g] += w * sig_nodes[e, i]

    # stiffness: (2/h) sum_q w_q c^2 phi_i' phi_j' on the reference element
    qx, qw = gauss_rule(l + 2)
    dref = lagrange_derivatives(gll_x, qx)
    rows, cols, vals = [], [], []
    for e in range(mesh.n_elements):
        scale = qw * c_f(space.quad_x[e]) ** 2 / space.jac[e]
        k_loc = (dref * scale[:, None]).T @ dref
        for i, gi in enumerate(ed[e]):
            if gi < 0:
                continue
            for j, gj in enumerate(ed[e]):
                if gj < 0:
                    continue
                rows.append(gi)
                cols.append(gj)
                vals.append(k_loc[i, j])
    stiff = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    return AssembledSystem(
        family="cg",
        l=l,
        mesh=mesh,
        space=space,
        M=sp.diags(mass).tocsr(),
        M_sigma=sp.diags(damp).tocsr(),
        stiff=stiff,
        order_form="second",
        bc=bc,
        c=c_f,
        sigma=sig_f,
        block_size=0,
    )

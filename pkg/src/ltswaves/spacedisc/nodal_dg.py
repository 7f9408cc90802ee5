"""Nodal discontinuous Galerkin discretization of the two-field system.

The damped wave equation is rewritten for (v, w) = (u_t, -u_x) as

    v_t + sigma v + (c^2 w)_x = 0,      w_t + v_x = 0,

and discretized in strong form with an interface flux.  The default flux
is the characteristic upwind flux of the linear system (central flux
available behind a flag).  The wave speed is sampled once per element, so
variable coefficients are treated as elementwise constant here.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_rule, gll_rule, lagrange_derivatives, lagrange_values
from .system import AssembledSystem, Space, as_function


def assemble_nodal_dg(mesh, l, c=1.0, sigma=0.0, bc="dirichlet", flux="upwind"):
    if l not in (1, 2, 3):
        raise ValueError("polynomial degree must be 1, 2 or 3")
    if flux not in ("upwind", "central"):
        raise ValueError("flux must be 'upwind' or 'central'")
    c_f = as_function(c)
    sig_f = as_function(sigma)
    space = Space(mesh, l, continuous=False, bc=bc)
    n_s = space.n_dofs
    n_el = mesh.n_elements
    ed = space.element_dofs
    nd = l + 1

    c_el = np.asarray(c_f(0.5 * (mesh.vertices[1:] + mesh.vertices[:-1])), dtype=float)
    if np.any(c_el <= 0):
        raise ValueError("wave speed must be strictly positive")

    qx, qw = gauss_rule(l + 2)
    gll_x, _ = gll_rule(l + 1)
    basis = lagrange_values(gll_x, qx)
    dref = lagrange_derivatives(gll_x, qx)
    m_ref = (basis * qw[:, None]).T @ basis
    # int phi_i phi_j' on the reference element (h-independent)
    s_ref = (basis * qw[:, None]).T @ dref

    # mass and damping mass, block-diagonal per element and field
    m_rows, m_cols, m_vals = [], [], []
    s_rows, s_cols, s_vals = [], [], []
    for e in range(n_el):
        jac = space.jac[e]
        m_loc = jac * m_ref
        ms_loc = jac * (basis * (qw * sig_f(space.quad_x[e]))[:, None]).T @ basis
        for i in range(nd):
            for j in range(nd):
                gi, gj = ed[e, i], ed[e, j]
                m_rows += [gi, n_s + gi]
                m_cols += [gj, n_s + gj]
                m_vals += [m_loc[i, j], m_loc[i, j]]
                # damping acts on the v field only
                s_rows.append(gi)
                s_cols.append(gj)
                s_vals.append(ms_loc[i, j])

    rows, cols, vals = [], [], []

    def add(gi, gj, v):
        if v != 0.0:
            rows.append(gi)
            cols.append(gj)
            vals.append(v)

    # volume terms: rows v get (c^2 w)_x, rows w get v_x
    for e in range(n_el):
        for i in range(nd):
            for j in range(nd):
                add(ed[e, i], n_s + ed[e, j], c_el[e] ** 2 * s_ref[i, j])
                add(n_s + ed[e, i], ed[e, j], s_ref[i, j])

    # interface corrections: subtract (n.F(q-) - (n.F)*) at each element end
    def end_node(e, end):
        return ed[e, 0] if end == 0 else ed[e, nd - 1]

    def face(e, end, normal, neighbor):
        """Scatter the flux correction for the `end` of element e.

        neighbor is (element, end) or a BC tag; the exterior (ghost) state
        for the boundary reflects v for Dirichlet and w for Neumann.
        """
        i_row = end_node(e, end)
        ci = c_el[e]
        vm, wm = i_row, n_s + i_row           # interior trace dofs
        if isinstance(neighbor, tuple):
            en, endn = neighbor
            j_col = end_node(en, endn)
            ce = c_el[en]
            ext = [(j_col, 1.0, False), (n_s + j_col, 1.0, True)]
        else:
            ce = ci
            if neighbor == "dirichlet":
                ext = [(vm, -1.0, False), (wm, 1.0, True)]
            else:  # neumann
                ext = [(vm, 1.0, False), (wm, -1.0, True)]
        cf = max(ci, ce) if flux == "upwind" else 0.0

        # n.F(q-) - (n.F)* = nA(q- - q+)/2 - cf (q- - q+)/2 componentwise:
        #   delta_v = n (ci^2 w- - ce^2 w+)/2 - cf (v- - v+)/2
        #   delta_w = n (v- - v+)/2          - cf (w- - w+)/2
        # the form subtracts the deltas, i.e. C -= delta coefficients.
        d_v = {wm: normal * ci**2 / 2.0, vm: -cf / 2.0}
        d_w = {vm: normal / 2.0, wm: -cf / 2.0}
        for col, weight, is_w in ext:
            if is_w:
                d_v[col] = d_v.get(col, 0.0) - normal * ce**2 * weight / 2.0
                d_w[col] = d_w.get(col, 0.0) + cf * weight / 2.0
            else:
                d_v[col] = d_v.get(col, 0.0) + cf * weight / 2.0
                d_w[col] = d_w.get(col, 0.0) - normal * weight / 2.0
        for col, v in d_v.items():
            add(vm, col, -v)
        for col, v in d_w.items():
            add(wm, col, -v)

    for e in range(n_el):
        if e > 0:
            face(e, 0, -1.0, (e - 1, 1))
        else:
            face(e, 0, -1.0, bc)
        if e < n_el - 1:
            face(e, 1, +1.0, (e + 1, 0))
        else:
            face(e, 1, +1.0, bc)

    n = 2 * n_s
    return AssembledSystem(
        family="ndg",
        l=l,
        mesh=mesh,
        space=space,
        M=sp.csr_matrix((m_vals, (m_rows, m_cols)), shape=(n, n)),
        M_sigma=sp.csr_matrix((s_vals, (s_rows, s_cols)), shape=(n, n)),
        stiff=sp.csr_matrix((vals, (rows, cols)), shape=(n, n)),
        order_form="first",
        bc=bc,
        c=c_f,
        sigma=sig_f,
        block_size=nd,
    )

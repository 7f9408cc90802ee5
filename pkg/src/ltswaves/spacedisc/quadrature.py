"""Reference-element quadrature and Lagrange basis helpers.

All rules live on [-1, 1].  The Gauss-Lobatto rules are hardcoded for the
orders used by the lumped elements (they must hit the basis nodes exactly);
general Gauss-Legendre rules come from scipy.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre

# nodes/weights of the (l+1)-point Gauss-Lobatto rules, exact to degree 2l-1
_GLL = {
    2: (np.array([-1.0, 1.0]), np.array([1.0, 1.0])),
    3: (np.array([-1.0, 0.0, 1.0]), np.array([1.0, 4.0, 1.0]) / 3.0),
    4: (
        np.array([-1.0, -1.0 / np.sqrt(5.0), 1.0 / np.sqrt(5.0), 1.0]),
        np.array([1.0, 5.0, 5.0, 1.0]) / 6.0,
    ),
}


def gll_rule(n_points):
    if n_points not in _GLL:
        raise ValueError(f"no Gauss-Lobatto rule with {n_points} points")
    return _GLL[n_points]


def gauss_rule(n_points):
    x, w = roots_legendre(n_points)
    return np.asarray(x), np.asarray(w)


def lagrange_values(nodes, x):
    """Values of the Lagrange cardinal functions on `nodes` at points `x`.

    Returns an array of shape (len(x), len(nodes)).
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    out = np.ones((len(x), n))
    for j in range(n):
        for m in range(n):
            if m != j:
                out[:, j] *= (x - nodes[m]) / (nodes[j] - nodes[m])
    return out


def lagrange_derivatives(nodes, x):
    """First derivatives of the Lagrange cardinals at points `x`,
    shape (len(x), len(nodes))."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    out = np.zeros((len(x), n))
    for j in range(n):
        denom = np.prod([nodes[j] - nodes[m] for m in range(n) if m != j])
        for i in range(n):
            if i == j:
                continue
            term = np.ones(len(x))
            for m in range(n):
                if m != j and m != i:
                    term *= x - nodes[m]
            out[:, j] += term / denom
    return out

"""Pure-numpy/scipy implementations of the stepping kernels.

Mirrors the compiled extension; selected when the extension is missing or
when LTSWAVES_BACKEND=python.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def csr_matvec(a, x, out=None):
    if out is None:
        return a @ x
    out[:] = a @ x
    return out


def axpy(y, a, x):
    y += a * x
    return y


def lts_sweep(a, ring, u_pre, alpha, dtau, p, start=0):
    """Run the p inner substeps in place on the state ring buffer.

    ring[(start + i) % k] holds the substep state with index i; on entry
    indices -(k-1)..0 are filled, on exit index p sits at
    ring[(start + p) % k].  Returns the number of masked-operator products
    performed (always p).
    """
    k = ring.shape[0]
    for m in range(p):
        rows = [(start + m - l) % k for l in range(k)]
        s = alpha @ ring[rows]
        v = a @ s
        ring[(start + m + 1) % k] = ring[(start + m) % k] + dtau * (u_pre[m] + v)
    return p

"""Stepping kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when importable; set LTSWAVES_BACKEND to
"python" or "native" to force a choice.  `BACKEND` records what was picked.
"""

from __future__ import annotations

import os

import numpy as np

from . import py_backend

try:
    from . import _native
except ImportError:
    _native = None

_choice = os.environ.get("LTSWAVES_BACKEND", "auto").lower()
if _choice == "native" and _native is None:
    raise ImportError("LTSWAVES_BACKEND=native but the compiled extension is not built")
if _choice not in ("auto", "native", "python"):
    raise ValueError(f"LTSWAVES_BACKEND must be auto, native or python, not {_choice!r}")

BACKEND = "python" if (_choice == "python" or _native is None) else "native"


def prepare_csr(a):
    """Normalize a CSR matrix for the kernels: int32 indices, float64 data."""
    import scipy.sparse as sp

    a = a.tocsr()
    a.sort_indices()
    if (
        a.indptr.dtype != np.int32
        or a.indices.dtype != np.int32
        or a.data.dtype != np.float64
    ):
        a = sp.csr_matrix(
            (
                a.data.astype(np.float64),
                a.indices.astype(np.int32),
                a.indptr.astype(np.int32),
            ),
            shape=a.shape,
        )
    return a


def _native_csr_matvec(a, x, out=None):
    if out is None:
        out = np.empty(a.shape[0])
    _native.csr_matvec(a.indptr, a.indices, a.data, x, out)
    return out


def _native_axpy(y, a, x):
    _native.axpy(y, float(a), x)
    return y


def _native_lts_sweep(a, ring, u_pre, alpha, dtau, p, start=0):
    return _native.lts_sweep(
        a.indptr, a.indices, a.data, ring, u_pre, alpha, float(dtau),
        int(p), int(start),
    )


def get_backend(name):
    """(csr_matvec, axpy, lts_sweep) triple for an explicit backend name."""
    if name == "python":
        return py_backend.csr_matvec, py_backend.axpy, py_backend.lts_sweep
    if name == "native":
        if _native is None:
            raise ImportError("compiled extension not available")
        return _native_csr_matvec, _native_axpy, _native_lts_sweep
    raise ValueError(f"unknown backend {name!r}")


csr_matvec, axpy, lts_sweep = get_backend(BACKEND)

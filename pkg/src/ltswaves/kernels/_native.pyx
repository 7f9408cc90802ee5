# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CSR and substep-sweep kernels for the stepping hot path."""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()


def csr_matvec(const int[::1] indptr, const int[::1] indices,
               const double[::1] data, const double[::1] x,
               double[::1] out):
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(indptr[i], indptr[i + 1]):
                acc += data[j] * x[indices[j]]
            out[i] = acc


def axpy(double[::1] y, double a, const double[::1] x):
    cdef Py_ssize_t i, n = y.shape[0]
    with nogil:
        for i in range(n):
            y[i] += a * x[i]


def lts_sweep(const int[::1] indptr, const int[::1] indices,
              const double[::1] data, double[:, ::1] ring,
              const double[:, ::1] u_pre, const double[::1] alpha,
              double dtau, Py_ssize_t p, Py_ssize_t start):
    """Run the p inner substeps in place on the state ring buffer.

    ring[(start + i) % k] holds the substep state with index i; on entry
    indices -(k-1)..0 are filled, on exit index p sits at
    ring[(start + p) % k].  Returns the number of masked-operator products
    performed (always p).
    """
    cdef Py_ssize_t k = ring.shape[0]
    cdef Py_ssize_t n = ring.shape[1]
    cdef cnp.ndarray[double, ndim=1] s_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] v_arr = np.empty(n)
    cdef double[::1] s = s_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t m, l, i, j, src, base, dst
    cdef double acc, a0
    with nogil:
        for m in range(p):
            src = (start + m) % k
            a0 = alpha[0]
            for i in range(n):
                s[i] = a0 * ring[src, i]
            for l in range(1, k):
                src = (start + m - l) % k   # C remainder: shift negatives
                if src < 0:
                    src += k
                a0 = alpha[l]
                for i in range(n):
                    s[i] += a0 * ring[src, i]
            for i in range(n):
                acc = 0.0
                for j in range(indptr[i], indptr[i + 1]):
                    acc += data[j] * s[indices[j]]
                v[i] = acc
            base = (start + m) % k
            dst = (start + m + 1) % k
            for i in range(n):
                ring[dst, i] = ring[base, i] + dtau * (u_pre[m, i] + v[i])
    return p

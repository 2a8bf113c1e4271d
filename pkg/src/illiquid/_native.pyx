# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementation of the solver's hot kernel.

Same contract as ``_kernels_py.correlate_batch``; see that module for the
derivation of the correlation form.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "native"


def correlate_batch(object signal, object kernels, object starts, object lengths, Py_ssize_t n_out):
    cdef double[::1] sig = np.ascontiguousarray(signal, dtype=np.float64)
    cdef double[:, ::1] ker = np.ascontiguousarray(kernels, dtype=np.float64)
    cdef long long[::1] st = np.ascontiguousarray(starts, dtype=np.int64)
    cdef long long[::1] ln = np.ascontiguousarray(lengths, dtype=np.int64)
    cdef Py_ssize_t D = st.shape[0]
    out_arr = np.empty((D, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t d, i, l, L, s
    cdef double acc
    for d in range(D):
        L = <Py_ssize_t> ln[d]
        s = <Py_ssize_t> st[d]
        for i in range(n_out):
            acc = 0.0
            for l in range(L):
                acc += sig[s + i + l] * ker[d, l]
            out[d, i] = acc
    return out_arr

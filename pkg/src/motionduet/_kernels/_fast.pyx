# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: depthwise temporal cross-correlation, "same" padding.

Same contract as _ref: x (B, T, D) float64 C-contiguous, k (K, D) float64
with K odd, zero padding of (K - 1) // 2 frames on each side.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def conv1d_same_fwd(double[:, :, ::1] x, double[:, ::1] k):
    cdef Py_ssize_t nb = x.shape[0], nt = x.shape[1], nd = x.shape[2]
    cdef Py_ssize_t nk = k.shape[0]
    cdef Py_ssize_t pad = (nk - 1) // 2
    y_arr = np.zeros((nb, nt, nd), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t b, t, d, j, s
    for b in range(nb):
        for t in range(nt):
            for j in range(nk):
                s = t + j - pad
                if s < 0 or s >= nt:
                    continue
                for d in range(nd):
                    y[b, t, d] += k[j, d] * x[b, s, d]
    return y_arr


def conv1d_same_bwd(double[:, :, ::1] x, double[:, ::1] k,
                    double[:, :, ::1] gy):
    cdef Py_ssize_t nb = x.shape[0], nt = x.shape[1], nd = x.shape[2]
    cdef Py_ssize_t nk = k.shape[0]
    cdef Py_ssize_t pad = (nk - 1) // 2
    gx_arr = np.zeros((nb, nt, nd), dtype=np.float64)
    gk_arr = np.zeros((nk, nd), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, ::1] gk = gk_arr
    cdef Py_ssize_t b, t, d, j, s
    for b in range(nb):
        for t in range(nt):
            for j in range(nk):
                s = t + j - pad
                if s < 0 or s >= nt:
                    continue
                for d in range(nd):
                    # y[b,t,d] += k[j,d] * x[b,s,d], so both grads fall
                    # out of the same index walk
                    gx[b, s, d] += k[j, d] * gy[b, t, d]
                    gk[j, d] += x[b, s, d] * gy[b, t, d]
    return gx_arr, gk_arr

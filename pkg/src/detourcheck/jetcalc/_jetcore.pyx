# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled jet product kernel.

Same contract as ``_jetpure.jsum_mul``: a (P, C, M) x (Q, C, M) -> (P, Q, M)
contraction where the trailing axis multiplies as truncated Taylor
coefficients via the precomputed triple table.
"""

import numpy as np

ctypedef fused scalar:
    double
    double complex


def jsum_mul(scalar[:, :, ::1] A, scalar[:, :, ::1] B,
             int[::1] tI, int[::1] tJ, int[::1] tK, tstarts):
    cdef Py_ssize_t P = A.shape[0]
    cdef Py_ssize_t C = A.shape[1]
    cdef Py_ssize_t M = A.shape[2]
    cdef Py_ssize_t Q = B.shape[0]
    cdef Py_ssize_t T = tI.shape[0]
    cdef Py_ssize_t p, q, t, c
    cdef scalar acc

    if scalar is double:
        out_arr = np.zeros((P, Q, M), dtype=np.float64)
    else:
        out_arr = np.zeros((P, Q, M), dtype=np.complex128)
    cdef scalar[:, :, ::1] out = out_arr

    for p in range(P):
        for q in range(Q):
            for t in range(T):
                acc = 0
                for c in range(C):
                    acc = acc + A[p, c, tI[t]] * B[q, c, tJ[t]]
                out[p, q, tK[t]] += acc
    return out_arr

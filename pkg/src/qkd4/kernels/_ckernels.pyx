# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled round-sampling kernel; mirrors ``_pykernels.sample_rounds``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline int _draw(const double[:] cdf, double u) noexcept nogil:
    cdef int k = 0
    cdef int last = cdf.shape[0] - 1
    while k < last and u >= cdf[k]:
        k += 1
    return k


def sample_rounds(set_a, set_b, set_e, touched, u_src, u_bob, joint_cdf, resent_cdf):
    cdef const cnp.int64_t[:] sa = np.ascontiguousarray(set_a, dtype=np.int64)
    cdef const cnp.int64_t[:] sb = np.ascontiguousarray(set_b, dtype=np.int64)
    cdef const cnp.int64_t[:] se = np.ascontiguousarray(set_e, dtype=np.int64)
    cdef const cnp.uint8_t[:] tt = np.ascontiguousarray(touched, dtype=np.uint8)
    cdef const double[:] us = np.ascontiguousarray(u_src, dtype=np.float64)
    cdef const double[:] ub = np.ascontiguousarray(u_bob, dtype=np.float64)
    cdef const double[:, :, :] jc = np.ascontiguousarray(joint_cdf, dtype=np.float64)
    cdef const double[:, :, :, :] rc = np.ascontiguousarray(resent_cdf, dtype=np.float64)

    cdef Py_ssize_t n = sa.shape[0]
    out_a_arr = np.zeros(n, dtype=np.int8)
    out_b_arr = np.zeros(n, dtype=np.int8)
    out_e_arr = np.full(n, -1, dtype=np.int8)
    cdef cnp.int8_t[:] out_a = out_a_arr
    cdef cnp.int8_t[:] out_b = out_b_arr
    cdef cnp.int8_t[:] out_e = out_e_arr
    cdef Py_ssize_t i
    cdef int a, e, k, eo

    with nogil:
        for i in range(n):
            a = <int>sa[i]
            if tt[i]:
                e = <int>se[i]
                k = _draw(jc[a, e], us[i])
                eo = k & 3
                out_a[i] = k >> 2
                out_e[i] = eo
                out_b[i] = _draw(rc[e, eo, sb[i]], ub[i])
            else:
                k = _draw(jc[a, sb[i]], us[i])
                out_a[i] = k >> 2
                out_b[i] = k & 3
    return out_a_arr, out_b_arr, out_e_arr

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled block-recurrence iteration. Hot loop of the staged solvers:
the step X_{n+1} = sum_i B_i X_{n+1-i} + F applied a few thousand times on
small complex blocks, which is inherently sequential."""

import numpy as np


def iterate_recurrence_c(const double complex[:, :, ::1] Bs,
                         const double complex[:, :, ::1] seeds,
                         const double complex[:, ::1] forcing,
                         Py_ssize_t steps):
    cdef Py_ssize_t m = seeds.shape[0]
    cdef Py_ssize_t d = seeds.shape[1]
    cdef Py_ssize_t w = seeds.shape[2]
    out_arr = np.empty((steps, d, w), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    hist_arr = np.array(seeds, dtype=np.complex128, copy=True)
    cdef double complex[:, :, ::1] hist = hist_arr
    cdef Py_ssize_t head = 0  # hist[(head + k) % m] = k-th oldest state
    cdef Py_ssize_t n, i, r, cc, k, idx
    cdef double complex acc
    for n in range(steps):
        for r in range(d):
            for cc in range(w):
                acc = forcing[r, cc]
                for i in range(m):
                    # B_{i+1} pairs with the (i+1)-th newest state
                    idx = (head + m - 1 - i) % m
                    for k in range(d):
                        acc = acc + Bs[i, r, k] * hist[idx, k, cc]
                out[n, r, cc] = acc
        for r in range(d):
            for cc in range(w):
                hist[head, r, cc] = out[n, r, cc]
        head = (head + 1) % m
    return out_arr

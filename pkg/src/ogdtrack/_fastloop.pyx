# cython: language_level=3
"""Compiled rollout kernel for quadratic tracking costs.

Same step semantics as the pure-Python backend, written as explicit loops
over the small dense matrices so a full closed-loop run costs no Python
overhead per step. The block shift W^i and the last-block extractor e are
realized by index arithmetic on the stacked correction vectors.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def rollout_quadratic(
    double[:, ::1] A,
    double[:, ::1] B,
    double[:, ::1] A_mu,
    double[:, ::1] S_c,
    double[:, ::1] P,
    int mu,
    double gamma_v,
    double gamma_x,
    double q,
    double r,
    double[::1] x0,
    double[::1] v0,
    double[:, ::1] theta,
    double[:, ::1] eta,
):
    cdef Py_ssize_t T = theta.shape[0]
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t m = B.shape[1]
    cdef Py_ssize_t M = mu * m

    x_arr = np.empty((T, n))
    u_arr = np.empty((T, m))
    v_arr = np.empty((T, m))
    g_arr = np.zeros((T, M))
    xh_arr = np.empty((T, n))
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] vout = v_arr
    cdef double[:, ::1] g = g_arr
    cdef double[:, ::1] xh = xh_arr

    cdef double[::1] v = np.array(v0, dtype=np.float64, copy=True)
    cdef double[::1] xp = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] z = np.empty(M)
    cdef double[::1] xhat = np.empty(n)
    cdef double[::1] xn = np.empty(n)

    cdef Py_ssize_t s, i, j, k, l, b, c, si
    cdef double acc

    for s in range(T):
        # input OGD on the previous cost (no-op at the first step)
        if s > 0:
            for j in range(m):
                v[j] = v[j] - gamma_v * r * (v[j] - eta[s - 1, j])

        # stacked input guess: v repeated mu times plus pending corrections,
        # where W^i shifts g_{t-i} down by i blocks (g is zero before t = 1)
        for b in range(mu):
            for j in range(m):
                z[b * m + j] = v[j]
        for i in range(1, mu):
            si = s - i
            if si >= 0:
                for b in range(mu - i):
                    for j in range(m):
                        z[(b + i) * m + j] += g[si, b * m + j]

        # prediction: A^mu x_prev + S_c z
        for k in range(n):
            acc = 0.0
            for l in range(n):
                acc += A_mu[k, l] * xp[l]
            for c in range(M):
                acc += S_c[k, c] * z[c]
            xhat[k] = acc
            xh[s, k] = acc

        # state OGD: g_t = -gamma_x * P @ grad f^x_{t-1}(xhat)
        if s > 0:
            for c in range(M):
                acc = 0.0
                for k in range(n):
                    acc += P[c, k] * (q * (xhat[k] - theta[s - 1, k]))
                g[s, c] = -gamma_x * acc

        # output: u_t = v_t + sum_i (last block of W^i g_{t-i})
        for j in range(m):
            acc = v[j]
            for i in range(mu):
                si = s - i
                if si >= 0:
                    acc += g[si, (mu - 1 - i) * m + j]
            u[s, j] = acc
            vout[s, j] = v[j]

        # plant transition
        for k in range(n):
            acc = 0.0
            for l in range(n):
                acc += A[k, l] * xp[l]
            for j in range(m):
                acc += B[k, j] * u[s, j]
            xn[k] = acc
        for k in range(n):
            xp[k] = xn[k]
            x[s, k] = xn[k]

    return x_arr, u_arr, v_arr, g_arr, xh_arr

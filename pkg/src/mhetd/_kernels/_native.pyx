# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled filter inner loops; mirrors ``pure`` function-for-function."""

from libc.math cimport fabs, log1p, exp, isfinite, NAN

import numpy as np

BACKEND = "native"

cdef double _OVERFLOW_GUARD = 1e150


cdef inline double _transform(double r, int gaussian, double K,
                              double s2n) nogil:
    if gaussian:
        return r
    if fabs(r) > _OVERFLOW_GUARD:
        return 0.0
    return K * r / (s2n + r * r)


def moving_horizon_run(const double[::1] u, const double[::1] y,
                       const double[:, ::1] phi,
                       const double[::1] gam, const double[::1] om,
                       const double[:, ::1] warm_gain, const double[::1] L,
                       const double[::1] Lt, const double[::1] hrow,
                       int gaussian,
                       double K, double s2n, int anchor,
                       double[:, ::1] xhat, double[::1] yhat):
    cdef Py_ssize_t T = y.shape[0]
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t N = warm_gain.shape[1]
    cdef Py_ssize_t i, j, k, t
    cdef double acc, ulast, ylast, w_new, removal, eps
    cdef int since = 0

    buf = np.zeros((4, n))
    cdef double[::1] s = buf[0]
    cdef double[::1] xh = buf[1]
    cdef double[::1] pred = buf[2]
    cdef double[::1] tmp = buf[3]
    wb = np.zeros(N)
    cdef double[::1] wbuf = wb

    with nogil:
        for t in range(N - 1):
            for j in range(n):
                xhat[t, j] = NAN
            yhat[t] = NAN

        for k in range(N):
            wbuf[k] = _transform(y[k] - s[0], gaussian, K, s2n)
            if k < N - 1:
                for i in range(n):
                    acc = gam[i] * u[k] + om[i] * y[k]
                    for j in range(n):
                        acc += phi[i, j] * s[j]
                    tmp[i] = acc
                for i in range(n):
                    s[i] = tmp[i]
        for i in range(n):
            acc = s[i]
            for j in range(N):
                acc += warm_gain[i, j] * wbuf[j]
            xh[i] = acc
            xhat[N - 1, i] = acc
        yhat[N - 1] = xh[0]
        ulast = u[N - 1]
        ylast = y[N - 1]

        for t in range(N, T):
            # delta = xh - s enters the removal term; compute before s moves
            removal = wbuf[0]
            for j in range(n):
                removal -= hrow[j] * (xh[j] - s[j])
            for i in range(n):
                acc = gam[i] * ulast + om[i] * ylast
                for j in range(n):
                    acc += phi[i, j] * xh[j]
                pred[i] = acc
                acc = gam[i] * ulast + om[i] * ylast
                for j in range(n):
                    acc += phi[i, j] * s[j]
                tmp[i] = acc
            for i in range(n):
                s[i] = tmp[i]
            w_new = _transform(y[t] - s[0], gaussian, K, s2n)
            eps = w_new + s[0] - pred[0]
            for i in range(n):
                xh[i] = pred[i] + L[i] * eps - Lt[i] * removal
            for j in range(N - 1):
                wbuf[j] = wbuf[j + 1]
            wbuf[N - 1] = w_new
            since += 1
            if anchor > 0 and since >= anchor:
                for i in range(n):
                    acc = s[i]
                    for j in range(N):
                        acc += warm_gain[i, j] * wbuf[j]
                    xh[i] = acc
                since = 0
            ulast = u[t]
            ylast = y[t]
            for i in range(n):
                xhat[t, i] = xh[i]
            yhat[t] = xh[0]
    return 0


def growing_run(const double[::1] u, const double[::1] y,
                const double[:, ::1] phi,
                const double[::1] gam, const double[::1] om,
                const double[:, ::1] warm_gain,
                const double[:, ::1] L_sched, int gaussian, double K, double s2n,
                double[:, ::1] xhat, double[::1] yhat):
    cdef Py_ssize_t T = y.shape[0]
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t i, j, k, t
    cdef double acc, ulast, ylast, w_new, eps

    buf = np.zeros((4, n))
    cdef double[::1] s = buf[0]
    cdef double[::1] xh = buf[1]
    cdef double[::1] pred = buf[2]
    cdef double[::1] tmp = buf[3]
    w0 = np.zeros(n)
    cdef double[::1] wbuf = w0

    with nogil:
        for t in range(n - 1):
            for j in range(n):
                xhat[t, j] = NAN
            yhat[t] = NAN

        for k in range(n):
            wbuf[k] = _transform(y[k] - s[0], gaussian, K, s2n)
            if k < n - 1:
                for i in range(n):
                    acc = gam[i] * u[k] + om[i] * y[k]
                    for j in range(n):
                        acc += phi[i, j] * s[j]
                    tmp[i] = acc
                for i in range(n):
                    s[i] = tmp[i]
        for i in range(n):
            acc = s[i]
            for j in range(n):
                acc += warm_gain[i, j] * wbuf[j]
            xh[i] = acc
            xhat[n - 1, i] = acc
        yhat[n - 1] = xh[0]
        ulast = u[n - 1]
        ylast = y[n - 1]

        for t in range(n, T):
            for i in range(n):
                acc = gam[i] * ulast + om[i] * ylast
                for j in range(n):
                    acc += phi[i, j] * xh[j]
                pred[i] = acc
                acc = gam[i] * ulast + om[i] * ylast
                for j in range(n):
                    acc += phi[i, j] * s[j]
                tmp[i] = acc
            for i in range(n):
                s[i] = tmp[i]
            w_new = _transform(y[t] - s[0], gaussian, K, s2n)
            eps = w_new + s[0] - pred[0]
            for i in range(n):
                xh[i] = pred[i] + L_sched[t, i] * eps
            ulast = u[t]
            ylast = y[t]
            for i in range(n):
                xhat[t, i] = xh[i]
            yhat[t] = xh[0]
    return 0


def kalman_run(const double[::1] u, const double[::1] y,
               const double[:, ::1] phi_a,
               const double[::1] gam, const double[:, ::1] Kp_sched,
               const double[:, ::1] Kf_sched, double[:, ::1] xhat,
               double[::1] yhat):
    cdef Py_ssize_t T = y.shape[0]
    cdef Py_ssize_t n = phi_a.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc, eps

    buf = np.zeros((2, n))
    cdef double[::1] x = buf[0]
    cdef double[::1] tmp = buf[1]

    with nogil:
        for k in range(T):
            eps = y[k] - x[0]
            for i in range(n):
                acc = x[i] + Kf_sched[k, i] * eps
                xhat[k, i] = acc
            yhat[k] = xhat[k, 0]
            for i in range(n):
                acc = gam[i] * u[k] + Kp_sched[k, i] * eps
                for j in range(n):
                    acc += phi_a[i, j] * x[j]
                tmp[i] = acc
            for i in range(n):
                x[i] = tmp[i]
    return 0


def particle_run(const double[::1] u, const double[::1] y,
                 const double[:, ::1] phi,
                 const double[::1] gam, const double[::1] om,
                 double[:, ::1] parts,
                 double[::1] logw, int gaussian, double nu, double s2n,
                 const double[::1] resample_u, double ess_frac,
                 double[:, ::1] est_out):
    cdef Py_ssize_t W = y.shape[0]
    cdef Py_ssize_t P = parts.shape[0]
    cdef Py_ssize_t n = parts.shape[1]
    cdef Py_ssize_t i, j, k, p, src
    cdef double e, m, tot, acc, ess, step, pos, cum
    cdef int resets = 0

    scratch = np.zeros(P)
    cdef double[::1] wgt = scratch
    idxbuf = np.zeros((P, n))
    cdef double[:, ::1] tmp = idxbuf

    with nogil:
        for k in range(W):
            m = -1e308
            for p in range(P):
                e = y[k] - parts[p, 0]
                if gaussian:
                    logw[p] += -0.5 * e * e / s2n
                else:
                    logw[p] += -0.5 * (nu + 1.0) * log1p(e * e / s2n)
                if logw[p] > m:
                    m = logw[p]
            tot = 0.0
            for p in range(P):
                wgt[p] = exp(logw[p] - m)
                tot += wgt[p]
            if not isfinite(tot) or tot <= 0.0:
                resets += 1
                for p in range(P):
                    logw[p] = 0.0
                    wgt[p] = 1.0
                tot = <double> P
            for p in range(P):
                wgt[p] /= tot
            for j in range(n):
                acc = 0.0
                for p in range(P):
                    acc += wgt[p] * parts[p, j]
                est_out[k, j] = acc
            ess = 0.0
            for p in range(P):
                ess += wgt[p] * wgt[p]
            ess = 1.0 / ess
            if ess < ess_frac * P:
                # systematic resampling with one uniform draw
                step = 1.0 / P
                cum = wgt[0]
                src = 0
                for p in range(P):
                    pos = (resample_u[k] + p) * step
                    while cum < pos and src < P - 1:
                        src += 1
                        cum += wgt[src]
                    for j in range(n):
                        tmp[p, j] = parts[src, j]
                for p in range(P):
                    logw[p] = 0.0
                    for j in range(n):
                        parts[p, j] = tmp[p, j]
            for p in range(P):
                for j in range(n):
                    acc = gam[j] * u[k] + om[j] * y[k]
                    for i in range(n):
                        acc += phi[j, i] * parts[p, i]
                    tmp[p, j] = acc
                for j in range(n):
                    parts[p, j] = tmp[p, j]
    return resets

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels for the QP solver: banded LDL' factorization of the
quasi-definite KKT matrix and the full ADMM iteration loop.

Mirrors shrinkmpc/qp/_core_py.py update-for-update; only the execution
strategy differs (C loops + banded solves instead of numpy + sparse LU).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

STATUS_MAX_ITER = 0
STATUS_SOLVED = 1
STATUS_PRIMAL_INFEASIBLE = 2
STATUS_DUAL_INFEASIBLE = 3

DEF BIG_BOUND = 1e18


def band_ldl_factor(double[:, ::1] band, int bw):
    """In-place LDL' of a symmetric band matrix stored lower-banded:
    band[i - j, j] = K[i, j] for j <= i <= j + bw. After return, row 0 holds
    D and rows 1..bw hold the unit-lower factor L. Returns 0 on success,
    -1 on a zero pivot (cannot happen for quasi-definite input)."""
    cdef Py_ssize_t n = band.shape[1]
    cdef Py_ssize_t j, i, k, k0, kmin
    cdef double d, s
    for j in range(n):
        k0 = j - bw
        if k0 < 0:
            k0 = 0
        d = band[0, j]
        for k in range(k0, j):
            d -= band[j - k, k] * band[j - k, k] * band[0, k]
        if d == 0.0:
            return -1
        band[0, j] = d
        for i in range(j + 1, min(j + bw + 1, n)):
            s = band[i - j, j]
            kmin = i - bw
            if kmin < k0:
                kmin = k0
            for k in range(kmin, j):
                s -= band[i - k, k] * band[j - k, k] * band[0, k]
            band[i - j, j] = s / d
    return 0


cdef void _band_solve(double[:, ::1] band, int bw, double[::1] b) noexcept nogil:
    cdef Py_ssize_t n = band.shape[1]
    cdef Py_ssize_t j, i, top
    cdef double bj, s
    for j in range(n):
        bj = b[j]
        top = j + bw + 1
        if top > n:
            top = n
        for i in range(j + 1, top):
            b[i] -= band[i - j, j] * bj
    for j in range(n):
        b[j] /= band[0, j]
    for j in range(n - 1, -1, -1):
        s = b[j]
        top = j + bw + 1
        if top > n:
            top = n
        for i in range(j + 1, top):
            s -= band[i - j, j] * b[i]
        b[j] = s


cdef void _csc_matvec(double[::1] data, long long[::1] indices, long long[::1] indptr,
                      double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t ncol = indptr.shape[0] - 1
    cdef Py_ssize_t j, p
    cdef double xj
    for j in range(out.shape[0]):
        out[j] = 0.0
    for j in range(ncol):
        xj = x[j]
        if xj != 0.0:
            for p in range(indptr[j], indptr[j + 1]):
                out[indices[p]] += data[p] * xj


cdef double _scaled_inf_norm(double[::1] v, double[::1] scale) noexcept nogil:
    cdef double m = 0.0, a
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        a = v[i] * scale[i]
        if a < 0.0:
            a = -a
        if a > m:
            m = a
    return m


def admm_loop(double[::1] Pdata, long long[::1] Pind, long long[::1] Pptr,
              double[::1] q,
              double[::1] Adata, long long[::1] Aind, long long[::1] Aptr,
              double[::1] Atdata, long long[::1] Atind, long long[::1] Atptr,
              double[::1] l, double[::1] u,
              double[::1] rho, double sigma, double alpha,
              double[:, ::1] band, int bw,
              long long[::1] perm, long long[::1] iperm,
              double[::1] x, double[::1] y, double[::1] z,
              double[::1] d_inv, double[::1] e_inv, double c_inv,
              double eps_abs, double eps_rel, double eps_pinf, double eps_dinf,
              long max_iter, long check_every):
    """Run the splitting iterations in place on (x, y, z); same contract as
    the pure twin's admm_loop."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t nm = n + m
    cdef cnp.ndarray rhs_arr = np.zeros(nm)
    cdef cnp.ndarray prm_arr = np.zeros(nm)
    cdef cnp.ndarray xprev_arr = np.zeros(n)
    cdef cnp.ndarray yprev_arr = np.zeros(m)
    cdef cnp.ndarray work_n = np.zeros(n)
    cdef cnp.ndarray work_n2 = np.zeros(n)
    cdef cnp.ndarray work_m = np.zeros(m)
    cdef cnp.ndarray work_m2 = np.zeros(m)
    cdef double[::1] rhs = rhs_arr
    cdef double[::1] prm = prm_arr
    cdef double[::1] x_prev = xprev_arr
    cdef double[::1] y_prev = yprev_arr
    cdef double[::1] Px = work_n
    cdef double[::1] Aty = work_n2
    cdef double[::1] Ax = work_m
    cdef double[::1] vm = work_m2

    cdef long it
    cdef Py_ssize_t i
    cdef double ztil, zrel, znew, pri_res = np.inf, dua_res = np.inf
    cdef double t_pri = 1.0, t_dua = 1.0
    cdef double t1, t2, t3, nrm, lhs, vi, av
    cdef int status = STATUS_MAX_ITER
    cdef long iters = 0
    cdef bint ok

    for it in range(1, max_iter + 1):
        iters = it
        with nogil:
            for i in range(n):
                x_prev[i] = x[i]
                rhs[i] = sigma * x[i] - q[i]
            for i in range(m):
                y_prev[i] = y[i]
                rhs[n + i] = z[i] - y[i] / rho[i]
            for i in range(nm):
                prm[i] = rhs[perm[i]]
            _band_solve(band, bw, prm)
            for i in range(nm):
                rhs[i] = prm[iperm[i]]
            # rhs[:n] = x_tilde, rhs[n:] = nu
            for i in range(n):
                x[i] = alpha * rhs[i] + (1.0 - alpha) * x[i]
            for i in range(m):
                ztil = z[i] + (rhs[n + i] - y[i]) / rho[i]
                zrel = alpha * ztil + (1.0 - alpha) * z[i]
                znew = zrel + y[i] / rho[i]
                if znew < l[i]:
                    znew = l[i]
                elif znew > u[i]:
                    znew = u[i]
                y[i] = y[i] + rho[i] * (zrel - znew)
                z[i] = znew

        if it % check_every == 0 or it == max_iter:
            _csc_matvec(Adata, Aind, Aptr, x, Ax)
            _csc_matvec(Pdata, Pind, Pptr, x, Px)
            _csc_matvec(Atdata, Atind, Atptr, y, Aty)
            with nogil:
                pri_res = 0.0
                t1 = 0.0
                t2 = 0.0
                for i in range(m):
                    av = (Ax[i] - z[i]) * e_inv[i]
                    if av < 0.0:
                        av = -av
                    if av > pri_res:
                        pri_res = av
                    av = Ax[i] * e_inv[i]
                    if av < 0.0:
                        av = -av
                    if av > t1:
                        t1 = av
                    av = z[i] * e_inv[i]
                    if av < 0.0:
                        av = -av
                    if av > t2:
                        t2 = av
                t_pri = t1 if t1 > t2 else t2
                dua_res = 0.0
                t1 = 0.0
                t2 = 0.0
                t3 = 0.0
                for i in range(n):
                    av = (Px[i] + q[i] + Aty[i]) * d_inv[i]
                    if av < 0.0:
                        av = -av
                    if av > dua_res:
                        dua_res = av
                    av = Px[i] * d_inv[i]
                    if av < 0.0:
                        av = -av
                    if av > t1:
                        t1 = av
                    av = Aty[i] * d_inv[i]
                    if av < 0.0:
                        av = -av
                    if av > t2:
                        t2 = av
                    av = q[i] * d_inv[i]
                    if av < 0.0:
                        av = -av
                    if av > t3:
                        t3 = av
                dua_res *= c_inv
                if t2 > t1:
                    t1 = t2
                if t3 > t1:
                    t1 = t3
                t_dua = c_inv * t1
            if pri_res <= eps_abs + eps_rel * t_pri and dua_res <= eps_abs + eps_rel * t_dua:
                status = STATUS_SOLVED
                break
            # primal infeasibility certificate on delta_y
            nrm = 0.0
            for i in range(m):
                av = y[i] - y_prev[i]
                vm[i] = av
                if av < 0.0:
                    av = -av
                if av > nrm:
                    nrm = av
            if nrm > eps_pinf:
                ok = True
                lhs = 0.0
                for i in range(m):
                    vi = vm[i] / nrm
                    vm[i] = vi
                    if u[i] < BIG_BOUND:
                        if vi > 0.0:
                            lhs += u[i] * vi
                    elif vi > eps_pinf:
                        ok = False
                        break
                    if l[i] > -BIG_BOUND:
                        if vi < 0.0:
                            lhs += l[i] * vi
                    elif vi < -eps_pinf:
                        ok = False
                        break
                if ok and lhs < -eps_pinf:
                    _csc_matvec(Atdata, Atind, Atptr, vm, Aty)
                    if _scaled_inf_norm(Aty, d_inv) < eps_pinf:
                        status = STATUS_PRIMAL_INFEASIBLE
                        break
            # dual infeasibility certificate on delta_x
            nrm = 0.0
            for i in range(n):
                av = x[i] - x_prev[i]
                Px[i] = av
                if av < 0.0:
                    av = -av
                if av > nrm:
                    nrm = av
            if nrm > eps_dinf:
                lhs = 0.0
                for i in range(n):
                    Px[i] /= nrm
                    lhs += q[i] * Px[i]
                if lhs < -eps_dinf:
                    _csc_matvec(Pdata, Pind, Pptr, Px, Aty)
                    if c_inv * _scaled_inf_norm(Aty, d_inv) < eps_dinf:
                        _csc_matvec(Adata, Aind, Aptr, Px, Ax)
                        ok = True
                        for i in range(m):
                            av = Ax[i] * e_inv[i]
                            if u[i] < BIG_BOUND and av > eps_dinf:
                                ok = False
                                break
                            if l[i] > -BIG_BOUND and av < -eps_dinf:
                                ok = False
                                break
                        if ok:
                            status = STATUS_DUAL_INFEASIBLE
                            break
    return status, iters, pri_res, dua_res, t_pri, t_dua

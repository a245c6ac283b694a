# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense matrix kernels (hot lane).

Statement-for-statement mirror of ``_kernel_py``; compiled with
-ffp-contract=off so both lanes produce bit-identical floats.  Keep any
edit synchronized with the pure lane.
"""

from cpython cimport array
import array

from libc.math cimport fabs, sqrt, INFINITY

DEF EPS = 2.220446049250313e-16

cdef array.array _dtemplate = array.array('d', [])
cdef array.array _itemplate = array.array('i', [])


def zeros(Py_ssize_t count):
    return array.clone(_dtemplate, count, zero=True)


def mat_mul(object a_obj, object b_obj, Py_ssize_t n, Py_ssize_t k, Py_ssize_t m):
    """(n x k) @ (k x m), row-major."""
    cdef double[::1] a = a_obj
    cdef double[::1] b = b_obj
    out_arr = array.clone(_dtemplate, n * m, zero=True)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, p, j, ik, im, pm
    cdef double aip
    for i in range(n):
        ik = i * k
        im = i * m
        for p in range(k):
            aip = a[ik + p]
            if aip != 0.0:
                pm = p * m
                for j in range(m):
                    out[im + j] += aip * b[pm + j]
    return out_arr


def lu_factor(object a_obj, Py_ssize_t n):
    """Doolittle LU with partial pivoting (see pure lane for contract)."""
    lu_arr = array.array('d', a_obj)
    piv_arr = array.clone(_itemplate, n, zero=True)
    cdef double[::1] lu = lu_arr
    cdef int[::1] piv = piv_arr
    cdef int ok = 1
    cdef double min_p = INFINITY
    cdef double max_p = 0.0
    cdef Py_ssize_t col, r, p, j, c, pn, cn, rn
    cdef double best, v, pivval, ap, inv, f, tmp
    for col in range(n):
        p = col
        best = fabs(lu[col * n + col])
        for r in range(col + 1, n):
            v = fabs(lu[r * n + col])
            if v > best:
                best = v
                p = r
        piv[col] = <int> p
        if p != col:
            pn = p * n
            cn = col * n
            for j in range(n):
                tmp = lu[pn + j]
                lu[pn + j] = lu[cn + j]
                lu[cn + j] = tmp
        pivval = lu[col * n + col]
        ap = fabs(pivval)
        if ap > max_p:
            max_p = ap
        if ap < min_p:
            min_p = ap
        if pivval == 0.0:
            ok = 0
            continue
        inv = 1.0 / pivval
        cn = col * n
        for r in range(col + 1, n):
            rn = r * n
            f = lu[rn + col] * inv
            lu[rn + col] = f
            if f != 0.0:
                for c in range(col + 1, n):
                    lu[rn + c] -= f * lu[cn + c]
    return lu_arr, piv_arr, ok, min_p, max_p


def lu_solve_factored(object lu_obj, object piv_obj, Py_ssize_t n,
                      object b_obj, Py_ssize_t nrhs):
    """Solve A X = B from a prior lu_factor; B is n x nrhs row-major."""
    cdef double[::1] lu = lu_obj
    cdef int[::1] piv = piv_obj
    x_arr = array.array('d', b_obj)
    cdef double[::1] x = x_arr
    cdef Py_ssize_t col, p, j, r, c, cr, pr, rn, rr
    cdef double f, inv, tmp
    for col in range(n):
        p = piv[col]
        if p != col:
            cr = col * nrhs
            pr = p * nrhs
            for j in range(nrhs):
                tmp = x[pr + j]
                x[pr + j] = x[cr + j]
                x[cr + j] = tmp
    for r in range(1, n):
        rn = r * n
        rr = r * nrhs
        for c in range(r):
            f = lu[rn + c]
            if f != 0.0:
                cr = c * nrhs
                for j in range(nrhs):
                    x[rr + j] -= f * x[cr + j]
    for r in range(n - 1, -1, -1):
        rn = r * n
        rr = r * nrhs
        for c in range(r + 1, n):
            f = lu[rn + c]
            if f != 0.0:
                cr = c * nrhs
                for j in range(nrhs):
                    x[rr + j] -= f * x[cr + j]
        inv = 1.0 / lu[rn + r]
        for j in range(nrhs):
            x[rr + j] *= inv
    return x_arr


def sym_eig(object a_obj, Py_ssize_t n):
    """Eigenvalues of a symmetric matrix, ascending (cyclic Jacobi)."""
    m_arr = array.array('d', a_obj)
    cdef double[::1] m = m_arr
    cdef Py_ssize_t i, j, p, q, sweep
    cdef double v, fro_sq, tol_sq, off_sq, apq, app, aqq, theta, t, c, s, tau
    cdef double aip, aiq, key
    cdef int ok = 0
    for i in range(n):
        for j in range(i + 1, n):
            v = 0.5 * (m[i * n + j] + m[j * n + i])
            m[i * n + j] = v
            m[j * n + i] = v
    fro_sq = 0.0
    for i in range(n * n):
        fro_sq += m[i] * m[i]
    tol_sq = fro_sq * 1e-30
    for sweep in range(60):
        off_sq = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off_sq += m[i * n + j] * m[i * n + j]
        if off_sq <= tol_sq:
            ok = 1
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p * n + q]
                if apq == 0.0:
                    continue
                app = m[p * n + p]
                aqq = m[q * n + q]
                theta = 0.5 * (aqq - app) / apq
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                m[p * n + p] = app - t * apq
                m[q * n + q] = aqq + t * apq
                m[p * n + q] = 0.0
                m[q * n + p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = m[i * n + p]
                        aiq = m[i * n + q]
                        m[i * n + p] = aip - s * (aiq + tau * aip)
                        m[i * n + q] = aiq + s * (aip - tau * aiq)
                        m[p * n + i] = m[i * n + p]
                        m[q * n + i] = m[i * n + q]
    vals_arr = array.clone(_dtemplate, n, zero=True)
    cdef double[::1] vals = vals_arr
    for i in range(n):
        vals[i] = m[i * n + i]
    for i in range(1, n):
        key = vals[i]
        j = i - 1
        while j >= 0 and vals[j] > key:
            vals[j + 1] = vals[j]
            j -= 1
        vals[j + 1] = key
    return vals_arr, ok


cdef void _hessenberg(double[::1] h, Py_ssize_t n):
    v_arr = array.clone(_dtemplate, n, zero=True)
    cdef double[::1] v = v_arr
    cdef Py_ssize_t k, i, c, r, rn
    cdef double sig_sq, sigma, x0, alpha, vsq, beta, s
    for k in range(n - 2):
        sig_sq = 0.0
        for i in range(k + 1, n):
            sig_sq += h[i * n + k] * h[i * n + k]
        if sig_sq == 0.0:
            continue
        sigma = sqrt(sig_sq)
        x0 = h[(k + 1) * n + k]
        alpha = -sigma if x0 >= 0.0 else sigma
        v[k + 1] = x0 - alpha
        for i in range(k + 2, n):
            v[i] = h[i * n + k]
        vsq = 0.0
        for i in range(k + 1, n):
            vsq += v[i] * v[i]
        if vsq == 0.0:
            continue
        beta = 2.0 / vsq
        for c in range(k, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * h[i * n + c]
            s *= beta
            for i in range(k + 1, n):
                h[i * n + c] -= s * v[i]
        for r in range(n):
            rn = r * n
            s = 0.0
            for i in range(k + 1, n):
                s += h[rn + i] * v[i]
            s *= beta
            for i in range(k + 1, n):
                h[rn + i] -= s * v[i]
        h[(k + 1) * n + k] = alpha
        for i in range(k + 2, n):
            h[i * n + k] = 0.0


def eig_real_parts(object a_obj, Py_ssize_t n, long max_iter):
    """Real parts of all eigenvalues (Hessenberg + Francis double-shift QR)."""
    h_arr = array.array('d', a_obj)
    cdef double[::1] h = h_arr
    parts_arr = array.clone(_dtemplate, n, zero=True)
    cdef double[::1] parts = parts_arr
    cdef Py_ssize_t hi, l, i, j, lo, k, c, r2, rn, cstart, rend
    cdef long iters = 0, block_iters = 0
    cdef double anorm, s, a11, a12, a21, a22, mu, disc, rt, s_exc, val, tr, det
    cdef double x, y, p_, q_, r_, sc, p1, q1, r1, nr, v0, v1, v2, vsq, beta
    cdef bint third
    if n == 1:
        parts[0] = h[0]
        return parts_arr, 0, 1
    _hessenberg(h, n)
    anorm = 0.0
    for i in range(n):
        lo = i - 1 if i > 0 else 0
        for j in range(lo, n):
            anorm += fabs(h[i * n + j])
    if anorm == 0.0:
        return parts_arr, 0, 1
    hi = n - 1
    while hi >= 0:
        l = hi
        while l > 0:
            s = fabs(h[(l - 1) * n + l - 1]) + fabs(h[l * n + l])
            if s == 0.0:
                s = anorm
            if fabs(h[l * n + l - 1]) <= EPS * s:
                h[l * n + l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            parts[hi] = h[hi * n + hi]
            hi -= 1
            block_iters = 0
            continue
        if l == hi - 1:
            a11 = h[(hi - 1) * n + hi - 1]
            a12 = h[(hi - 1) * n + hi]
            a21 = h[hi * n + hi - 1]
            a22 = h[hi * n + hi]
            mu = 0.5 * (a11 + a22)
            disc = 0.25 * (a11 - a22) * (a11 - a22) + a12 * a21
            if disc >= 0.0:
                rt = sqrt(disc)
                parts[hi] = mu + rt
                parts[hi - 1] = mu - rt
            else:
                parts[hi] = mu
                parts[hi - 1] = mu
            hi -= 2
            block_iters = 0
            continue
        iters += 1
        block_iters += 1
        if iters > max_iter:
            return parts_arr, iters, 0
        if block_iters % 11 == 0:
            s_exc = fabs(h[hi * n + hi - 1]) + fabs(h[(hi - 1) * n + hi - 2])
            val = h[hi * n + hi] + 0.75 * s_exc
            tr = 2.0 * val
            det = val * val
        else:
            a11 = h[(hi - 1) * n + hi - 1]
            a12 = h[(hi - 1) * n + hi]
            a21 = h[hi * n + hi - 1]
            a22 = h[hi * n + hi]
            tr = a11 + a22
            det = a11 * a22 - a12 * a21
        x = h[l * n + l]
        y = h[(l + 1) * n + l]
        p_ = x * x + h[l * n + l + 1] * y - tr * x + det
        q_ = y * (x + h[(l + 1) * n + l + 1] - tr)
        r_ = y * h[(l + 2) * n + l + 1]
        for k in range(l, hi):
            if k > l:
                p_ = h[k * n + k - 1]
                q_ = h[(k + 1) * n + k - 1]
                r_ = h[(k + 2) * n + k - 1] if k + 2 <= hi else 0.0
            sc = fabs(p_) + fabs(q_) + fabs(r_)
            if sc == 0.0:
                continue
            p1 = p_ / sc
            q1 = q_ / sc
            r1 = r_ / sc
            nr = sqrt(p1 * p1 + q1 * q1 + r1 * r1)
            if p1 >= 0.0:
                nr = -nr
            v0 = p1 - nr
            v1 = q1
            v2 = r1
            vsq = v0 * v0 + v1 * v1 + v2 * v2
            if vsq == 0.0:
                continue
            beta = 2.0 / vsq
            third = k + 2 <= hi
            cstart = k - 1 if k - 1 > l else l
            for c in range(cstart, hi + 1):
                s = v0 * h[k * n + c] + v1 * h[(k + 1) * n + c]
                if third:
                    s += v2 * h[(k + 2) * n + c]
                s *= beta
                h[k * n + c] -= s * v0
                h[(k + 1) * n + c] -= s * v1
                if third:
                    h[(k + 2) * n + c] -= s * v2
            rend = k + 3 if k + 3 < hi else hi
            for r2 in range(l, rend + 1):
                rn = r2 * n
                s = v0 * h[rn + k] + v1 * h[rn + k + 1]
                if third:
                    s += v2 * h[rn + k + 2]
                s *= beta
                h[rn + k] -= s * v0
                h[rn + k + 1] -= s * v1
                if third:
                    h[rn + k + 2] -= s * v2
            if k > l:
                h[(k + 1) * n + k - 1] = 0.0
                if third:
                    h[(k + 2) * n + k - 1] = 0.0
    return parts_arr, iters, 1


def kron_sum(object a_obj, object b_obj, Py_ssize_t n):
    """A (x) I_n + I_n (x) B for the row-major vec convention, (n^2 x n^2)."""
    cdef double[::1] a = a_obj
    cdef double[::1] b = b_obj
    cdef Py_ssize_t nn = n * n
    out_arr = array.clone(_dtemplate, nn * nn, zero=True)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, k, q, row
    for i in range(n):
        for j in range(n):
            row = (i * n + j) * nn
            for k in range(n):
                out[row + k * n + j] += a[i * n + k]
            for q in range(n):
                out[row + i * n + q] += b[j * n + q]
    return out_arr

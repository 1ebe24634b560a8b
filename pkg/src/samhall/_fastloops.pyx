# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: fused GD/SAM trajectory drivers for the builtin
landscapes and the two-layer tanh classifier, plus batch value/gradient
kernels. Semantics mirror the generic per-step driver exactly; the pure
fallback lives in ``_pyloops``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, fabs, log, sin, sqrt, tanh, NAN, pi

cnp.import_array()

BACKEND = "compiled"

cdef int KIND_QUARTIC1D = 0
cdef int KIND_DOUBLE_WELL1D = 1
cdef int KIND_QUADRATIC = 2
cdef int KIND_SYNTHETIC2D = 3

cdef int STATUS_SHIFTED = 0
cdef int STATUS_RAW = 1
cdef int STATUS_BUDGET = 2
cdef int STATUS_FLOOR = 3
cdef int STATUS_DIVERGED = 4

cdef double DIVERGENCE_LIMIT = 1e12


# ---------------------------------------------------------------------------
# builtin landscape evaluation

cdef inline double _wx(double x) noexcept nogil:
    if x <= -1.0:
        return 0.0
    if x >= 0.0:
        return 1.0
    return 0.5 * (1.0 - cos(pi * (x + 1.0)))


cdef inline double _wx_d(double x) noexcept nogil:
    if -1.0 < x < 0.0:
        return 0.5 * pi * sin(pi * (x + 1.0))
    return 0.0


cdef inline double _wy(double y) noexcept nogil:
    cdef double a = fabs(y)
    if a <= 0.6:
        return 1.0
    if a >= 5.6:
        return 0.0
    return 0.5 * (1.0 + cos(pi * (a - 0.6) / 5.0))


cdef inline double _wy_d(double y) noexcept nogil:
    cdef double a = fabs(y)
    cdef double s
    if 0.6 < a < 5.6:
        s = 1.0 if y > 0 else -1.0
        return -0.1 * pi * sin(pi * (a - 0.6) / 5.0) * s
    return 0.0


cdef double _value(int kind, const double* p, const double* x, int d) noexcept nogil:
    cdef double t, a, w, e1, e2, s, acc
    cdef int i, j
    if kind == KIND_QUARTIC1D:
        t = x[0]
        return (t * (t - 2.0)) * (t * (t - 2.0))
    if kind == KIND_DOUBLE_WELL1D:
        a = p[0]
        t = x[0]
        w = t * t - a * a
        return w * w
    if kind == KIND_QUADRATIC:
        acc = 0.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += p[i * d + j] * x[j]
            acc += 0.5 * x[i] * s + p[d * d + i] * x[i]
        return acc
    # synthetic2d
    e1 = exp(-(x[0] * x[0] + x[1] * x[1]) / 6.25)
    s = x[0] + 1.55 * cos(x[1] / 1.5)
    e2 = exp(-s * s)
    return 0.8 * e1 * _wx(x[0]) - e2 * _wy(x[1]) + 1.0


cdef void _grad(int kind, const double* p, const double* x, double* g, int d) noexcept nogil:
    cdef double t, a, e1, e2, s, wx, wxd, wy, wyd, ds_dy
    cdef int i, j
    if kind == KIND_QUARTIC1D:
        t = x[0]
        g[0] = 4.0 * t * (t - 1.0) * (t - 2.0)
        return
    if kind == KIND_DOUBLE_WELL1D:
        a = p[0]
        t = x[0]
        g[0] = 4.0 * t * (t * t - a * a)
        return
    if kind == KIND_QUADRATIC:
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += p[i * d + j] * x[j]
            g[i] = s + p[d * d + i]
        return
    # synthetic2d
    e1 = exp(-(x[0] * x[0] + x[1] * x[1]) / 6.25)
    wx = _wx(x[0])
    wxd = _wx_d(x[0])
    s = x[0] + 1.55 * cos(x[1] / 1.5)
    e2 = exp(-s * s)
    wy = _wy(x[1])
    wyd = _wy_d(x[1])
    ds_dy = -1.55 * sin(x[1] / 1.5) / 1.5
    g[0] = 0.8 * e1 * (wxd - (2.0 * x[0] / 6.25) * wx) + 2.0 * s * e2 * wy
    g[1] = 0.8 * e1 * (-(2.0 * x[1] / 6.25)) * wx + 2.0 * s * e2 * ds_dy * wy - e2 * wyd


def batch_value_grad(int kind, params, pts):
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[:, ::1] xs = np.ascontiguousarray(pts, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef int d = <int> xs.shape[1]
    vals = np.empty(n)
    grads = np.empty((n, d))
    cdef double[::1] v = vals
    cdef double[:, ::1] g = grads
    cdef const double* pp = &p[0] if p.shape[0] > 0 else NULL
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            v[i] = _value(kind, pp, &xs[i, 0], d)
            _grad(kind, pp, &xs[i, 0], &g[i, 0], d)
    return vals, grads


# ---------------------------------------------------------------------------
# fused trajectory loop for builtin landscapes

cdef inline double _nrm2(const double* v, int d) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(d):
        s += v[i] * v[i]
    return sqrt(s)


def run_builtin(int kind, params, x0, long gd_steps, double rho, double eta,
                long max_iters, double grad_floor, double converge_tol,
                long record_every):
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[::1] x = np.array(x0, dtype=np.float64, copy=True)
    cdef int d = <int> x.shape[0]
    cdef const double* pp = &p[0] if p.shape[0] > 0 else NULL

    cdef long cap = max_iters // record_every + 2
    rec_k = np.empty(cap, dtype=np.int64)
    rec_f = np.empty(cap)
    rec_g = np.empty(cap)
    rec_s = np.empty(cap)
    rec_x = np.empty((cap, d))
    cdef long[::1] rk = rec_k
    cdef double[::1] rf = rec_f
    cdef double[::1] rg = rec_g
    cdef double[::1] rs = rec_s
    cdef double[:, ::1] rx = rec_x

    work = np.empty((4, d))
    cdef double[:, ::1] w = work
    cdef double* g = &w[0, 0]
    cdef double* sg = &w[1, 0]
    cdef double* xp = &w[2, 0]
    cdef double* xn = &w[3, 0]

    cdef long n_rec = 0
    cdef int status = STATUS_BUDGET
    cdef long k = 0, k_term = max_iters, n_iters = max_iters
    cdef long i
    cdef double gn, sgn, f
    cdef bint bad
    cdef double* step

    with nogil:
        for k in range(max_iters):
            _grad(kind, pp, &x[0], g, d)
            gn = _nrm2(g, d)
            if k < gd_steps:
                if k % record_every == 0:
                    sgn = _record_sgn(kind, pp, &x[0], g, gn, rho, grad_floor, xp, sg, d)
                    rk[n_rec] = k
                    rf[n_rec] = _value(kind, pp, &x[0], d)
                    rg[n_rec] = gn
                    rs[n_rec] = sgn
                    for i in range(d):
                        rx[n_rec, i] = x[i]
                    n_rec += 1
                if gn < converge_tol:
                    status = STATUS_RAW
                    k_term = k
                    n_iters = k
                    break
                step = g
            else:
                if gn < grad_floor:
                    if k % record_every == 0:
                        rk[n_rec] = k
                        rf[n_rec] = _value(kind, pp, &x[0], d)
                        rg[n_rec] = gn
                        rs[n_rec] = NAN
                        for i in range(d):
                            rx[n_rec, i] = x[i]
                        n_rec += 1
                    status = STATUS_FLOOR
                    k_term = k
                    n_iters = k
                    break
                for i in range(d):
                    xp[i] = x[i] + rho * (g[i] / gn)
                _grad(kind, pp, xp, sg, d)
                sgn = _nrm2(sg, d)
                if k % record_every == 0:
                    rk[n_rec] = k
                    rf[n_rec] = _value(kind, pp, &x[0], d)
                    rg[n_rec] = gn
                    rs[n_rec] = sgn
                    for i in range(d):
                        rx[n_rec, i] = x[i]
                    n_rec += 1
                if sgn < converge_tol:
                    status = STATUS_SHIFTED
                    k_term = k
                    n_iters = k
                    break
                if gn < converge_tol:
                    status = STATUS_RAW
                    k_term = k
                    n_iters = k
                    break
                step = sg
            bad = False
            for i in range(d):
                xn[i] = x[i] - eta * step[i]
                if xn[i] != xn[i] or fabs(xn[i]) > DIVERGENCE_LIMIT:
                    bad = True
            if bad:
                status = STATUS_DIVERGED
                k_term = k
                n_iters = k
                break
            for i in range(d):
                x[i] = xn[i]

        if n_rec == 0 or rk[n_rec - 1] != k_term:
            _grad(kind, pp, &x[0], g, d)
            gn = _nrm2(g, d)
            sgn = _record_sgn(kind, pp, &x[0], g, gn, rho, grad_floor, xp, sg, d)
            rk[n_rec] = k_term
            rf[n_rec] = _value(kind, pp, &x[0], d)
            rg[n_rec] = gn
            rs[n_rec] = sgn
            for i in range(d):
                rx[n_rec, i] = x[i]
            n_rec += 1

    return (
        rec_k[:n_rec].copy(),
        rec_f[:n_rec].copy(),
        rec_g[:n_rec].copy(),
        rec_s[:n_rec].copy(),
        rec_x[:n_rec].copy(),
        np.asarray(x).copy(),
        status,
        n_iters,
    )


cdef double _record_sgn(int kind, const double* pp, const double* x, const double* g,
                        double gn, double rho, double grad_floor,
                        double* xp, double* sg, int d) noexcept nogil:
    cdef int i
    if rho == 0.0:
        return gn
    if gn < grad_floor:
        return NAN
    for i in range(d):
        xp[i] = x[i] + rho * (g[i] / gn)
    _grad(kind, pp, xp, sg, d)
    return _nrm2(sg, d)


# ---------------------------------------------------------------------------
# two-layer tanh classifier: full-batch loss/gradient and fused driver

cdef double _mlp_vg(const double* theta, const double* x, const long* labels,
                    int n, int nin, int nh, int nc,
                    double* grad, bint want_grad,
                    double* a1, double* z) noexcept nogil:
    # theta layout: W1 (nh*nin) | b1 (nh) | W2 (nc*nh) | b2 (nc)
    cdef const double* w1 = theta
    cdef const double* b1 = theta + nh * nin
    cdef const double* w2 = b1 + nh
    cdef const double* b2 = w2 + nc * nh
    cdef double* gw1
    cdef double* gb1
    cdef double* gw2
    cdef double* gb2
    cdef int P = nh * (nin + 1) + nc * (nh + 1)
    cdef int i, j, c, t, lab
    cdef double s, zmax, denom, loss, d2, dh
    if want_grad:
        gw1 = grad
        gb1 = grad + nh * nin
        gw2 = gb1 + nh
        gb2 = gw2 + nc * nh
        for i in range(P):
            grad[i] = 0.0
    loss = 0.0
    for i in range(n):
        lab = <int> labels[i]
        for j in range(nh):
            s = b1[j]
            for t in range(nin):
                s += w1[j * nin + t] * x[i * nin + t]
            a1[j] = tanh(s)
        zmax = -1e308
        for c in range(nc):
            s = b2[c]
            for j in range(nh):
                s += w2[c * nh + j] * a1[j]
            z[c] = s
            if s > zmax:
                zmax = s
        denom = 0.0
        for c in range(nc):
            z[c] = z[c] - zmax
            denom += exp(z[c])
        loss += log(denom) - z[lab]
        for c in range(nc):
            z[c] = exp(z[c])
        if want_grad:
            for c in range(nc):
                d2 = z[c] / denom
                if c == lab:
                    d2 -= 1.0
                d2 /= n
                z[c] = d2
                gb2[c] += d2
                for j in range(nh):
                    gw2[c * nh + j] += d2 * a1[j]
            for j in range(nh):
                dh = 0.0
                for c in range(nc):
                    dh += z[c] * w2[c * nh + j]
                dh *= 1.0 - a1[j] * a1[j]
                gb1[j] += dh
                for t in range(nin):
                    gw1[j * nin + t] += dh * x[i * nin + t]
    return loss / n


def mlp_value_grad(theta, x, labels, int n_in, int n_hidden, int n_classes,
                   bint want_grad=True):
    cdef double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[:, ::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef long[::1] ys = np.ascontiguousarray(labels, dtype=np.int64)
    cdef int n = <int> xs.shape[0]
    grad_arr = np.empty(th.shape[0]) if want_grad else None
    buf = np.empty(n_hidden + n_classes)
    cdef double[::1] b = buf
    cdef double[::1] gv
    cdef double loss
    cdef double* gp = NULL
    if want_grad:
        gv = grad_arr
        gp = &gv[0]
    with nogil:
        loss = _mlp_vg(&th[0], &xs[0, 0], &ys[0], n, n_in, n_hidden, n_classes,
                       gp, want_grad, &b[0], &b[n_hidden])
    return float(loss), grad_arr


def run_mlp(theta0, x, labels, int n_in, int n_hidden, int n_classes,
            long gd_steps, double rho, double eta, long max_iters,
            double grad_floor, double converge_tol, long record_every,
            double momentum=0.0):
    cdef double[::1] th = np.array(theta0, dtype=np.float64, copy=True)
    cdef double[:, ::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef long[::1] ys = np.ascontiguousarray(labels, dtype=np.int64)
    cdef int n = <int> xs.shape[0]
    cdef int P = <int> th.shape[0]

    cdef long cap = max_iters // record_every + 2
    rec_k = np.empty(cap, dtype=np.int64)
    rec_f = np.empty(cap)
    rec_g = np.empty(cap)
    rec_s = np.empty(cap)
    rec_x = np.empty((cap, P))
    cdef long[::1] rk = rec_k
    cdef double[::1] rf = rec_f
    cdef double[::1] rg = rec_g
    cdef double[::1] rs = rec_s
    cdef double[:, ::1] rx = rec_x

    work = np.zeros((5, P))
    cdef double[:, ::1] w = work
    cdef double* g = &w[0, 0]
    cdef double* sg = &w[1, 0]
    cdef double* xp = &w[2, 0]
    cdef double* xn = &w[3, 0]
    cdef double* vel = &w[4, 0]
    buf = np.empty(n_hidden + n_classes)
    cdef double[::1] bb = buf
    cdef double* a1 = &bb[0]
    cdef double* z = &bb[n_hidden]

    cdef long n_rec = 0
    cdef int status = STATUS_BUDGET
    cdef long k = 0, k_term = max_iters, n_iters = max_iters
    cdef long i
    cdef double gn, sgn, f, fx
    cdef bint bad, use_momentum = momentum > 0.0
    cdef double* step

    with nogil:
        for k in range(max_iters):
            fx = _mlp_vg(&th[0], &xs[0, 0], &ys[0], n, n_in, n_hidden, n_classes,
                         g, True, a1, z)
            gn = _nrm2(g, P)
            if k < gd_steps:
                if k % record_every == 0:
                    sgn = _mlp_record_sgn(&th[0], g, gn, rho, grad_floor, xp, sg,
                                          &xs[0, 0], &ys[0], n, n_in, n_hidden,
                                          n_classes, a1, z, P)
                    rk[n_rec] = k
                    rf[n_rec] = fx
                    rg[n_rec] = gn
                    rs[n_rec] = sgn
                    for i in range(P):
                        rx[n_rec, i] = th[i]
                    n_rec += 1
                if gn < converge_tol:
                    status = STATUS_RAW
                    k_term = k
                    n_iters = k
                    break
                step = g
            else:
                if gn < grad_floor:
                    if k % record_every == 0:
                        rk[n_rec] = k
                        rf[n_rec] = fx
                        rg[n_rec] = gn
                        rs[n_rec] = NAN
                        for i in range(P):
                            rx[n_rec, i] = th[i]
                        n_rec += 1
                    status = STATUS_FLOOR
                    k_term = k
                    n_iters = k
                    break
                for i in range(P):
                    xp[i] = th[i] + rho * (g[i] / gn)
                _mlp_vg(xp, &xs[0, 0], &ys[0], n, n_in, n_hidden, n_classes,
                        sg, True, a1, z)
                sgn = _nrm2(sg, P)
                if k % record_every == 0:
                    rk[n_rec] = k
                    rf[n_rec] = fx
                    rg[n_rec] = gn
                    rs[n_rec] = sgn
                    for i in range(P):
                        rx[n_rec, i] = th[i]
                    n_rec += 1
                if sgn < converge_tol:
                    status = STATUS_SHIFTED
                    k_term = k
                    n_iters = k
                    break
                if gn < converge_tol:
                    status = STATUS_RAW
                    k_term = k
                    n_iters = k
                    break
                step = sg
            if use_momentum:
                for i in range(P):
                    vel[i] = momentum * vel[i] + step[i]
                step = vel
            bad = False
            for i in range(P):
                xn[i] = th[i] - eta * step[i]
                if xn[i] != xn[i] or fabs(xn[i]) > DIVERGENCE_LIMIT:
                    bad = True
            if bad:
                status = STATUS_DIVERGED
                k_term = k
                n_iters = k
                break
            for i in range(P):
                th[i] = xn[i]

        if n_rec == 0 or rk[n_rec - 1] != k_term:
            fx = _mlp_vg(&th[0], &xs[0, 0], &ys[0], n, n_in, n_hidden, n_classes,
                         g, True, a1, z)
            gn = _nrm2(g, P)
            sgn = _mlp_record_sgn(&th[0], g, gn, rho, grad_floor, xp, sg,
                                  &xs[0, 0], &ys[0], n, n_in, n_hidden,
                                  n_classes, a1, z, P)
            rk[n_rec] = k_term
            rf[n_rec] = fx
            rg[n_rec] = gn
            rs[n_rec] = sgn
            for i in range(P):
                rx[n_rec, i] = th[i]
            n_rec += 1

    return (
        rec_k[:n_rec].copy(),
        rec_f[:n_rec].copy(),
        rec_g[:n_rec].copy(),
        rec_s[:n_rec].copy(),
        rec_x[:n_rec].copy(),
        np.asarray(th).copy(),
        status,
        n_iters,
    )


cdef double _mlp_record_sgn(const double* th, const double* g, double gn,
                            double rho, double grad_floor, double* xp, double* sg,
                            const double* xs, const long* ys, int n, int nin,
                            int nh, int nc, double* a1, double* z, int P) noexcept nogil:
    cdef int i
    if rho == 0.0:
        return gn
    if gn < grad_floor:
        return NAN
    for i in range(P):
        xp[i] = th[i] + rho * (g[i] / gn)
    _mlp_vg(xp, xs, ys, n, nin, nh, nc, sg, True, a1, z)
    return _nrm2(sg, P)

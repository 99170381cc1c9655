# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops of the radial solver.

Two kernels: a Thomas solve for the implicit diffusion system and the exact
reaction flow u -> G^{-1}(G(u) - dt) node by node.  L is re-coded here by
family code so the inner Newton iteration never calls back into Python.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, pow, sin, cos, fabs, ceil, isfinite, INFINITY

cnp.import_array()


cdef inline double L_eval(int kind, const double* p, double x) noexcept nogil:
    cdef double z, ell
    if kind == 0:
        return 1.0
    elif kind == 1:
        return pow(x + p[1], p[0])
    elif kind == 2:
        return pow(log(x + p[1]), p[0])
    elif kind == 3:
        return exp(p[1] * pow(x + 1.0, p[0]))
    elif kind == 4:
        ell = log(x + 1.0)
        return exp(sin(ell) * ell)
    elif kind == 5:
        z = x + 1.0
        return exp(pow(z, p[0]) * cos(pow(z, p[1])))
    else:
        return 1.0 + p[1] * sin(pow(x + 1.0, p[0]))


cdef struct Tail:
    int kind
    const double* p
    double x_floor
    double step
    int n_nodes
    const double* vals
    const double* lag_x
    const double* lag_w
    int n_lag
    const double* gl_x
    const double* gl_w
    int n_gl


cdef inline double tail_J(Tail* T, double X) noexcept nogil:
    """Scaled resolvent e^X G(X) from the node table."""
    cdef double acc = 0.0, d, tau, half
    cdef int i, k
    cdef double x_top = T.x_floor + T.step * (T.n_nodes - 1)
    if X >= x_top:
        for i in range(T.n_lag):
            acc += T.lag_w[i] / L_eval(T.kind, T.p, X + T.lag_x[i])
        return acc
    k = <int>ceil((X - T.x_floor) / T.step)
    if k < 0:
        k = 0
    d = T.x_floor + T.step * k - X
    half = 0.5 * d
    for i in range(T.n_gl):
        tau = half * (T.gl_x[i] + 1.0)
        acc += T.gl_w[i] * exp(-tau) / L_eval(T.kind, T.p, X + tau)
    return half * acc + exp(-d) * T.vals[k]


cdef inline double f_eval(int kind, const double* p, double u) noexcept nogil:
    return exp(u) * L_eval(kind, p, u)


def L_values(int kind, double[::1] p, double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = L_eval(kind, &p[0], x[i])
    return out


def solve_tridiag(double[::1] lower, double[::1] diag, double[::1] upper, double[::1] rhs):
    """Thomas algorithm; lower[0] and upper[-1] are ignored."""
    cdef Py_ssize_t i, n = diag.shape[0]
    if lower.shape[0] != n or upper.shape[0] != n or rhs.shape[0] != n:
        raise ValueError("lower, diag, upper and rhs must have equal length")
    cp_arr = np.empty(n)
    x_arr = np.empty(n)
    cdef double[::1] cp = cp_arr
    cdef double[::1] x = x_arr
    cdef double m
    with nogil:
        cp[0] = upper[0] / diag[0] if n > 1 else 0.0
        x[0] = rhs[0] / diag[0]
        for i in range(1, n):
            m = diag[i] - lower[i] * cp[i - 1]
            if i < n - 1:
                cp[i] = upper[i] / m
            x[i] = (rhs[i] - lower[i] * x[i - 1]) / m
        for i in range(n - 2, -1, -1):
            x[i] -= cp[i] * x[i + 1]
    return x_arr


def reaction_flow(double[::1] u, double dt, int kind, double[::1] p, double x_floor, double step,
                  double[::1] vals, double[::1] lag_x, double[::1] lag_w, double[::1] gl_x,
                  double[::1] gl_w, double tol, int rk_substeps=4):
    """Advance u' = f(u) exactly by dt at every node; returns a new array.

    Nodes at or above the domain floor use G^{-1}(G(u) - dt) by Newton in log
    space; nodes below it use classical RK4 substeps.  A node whose resolvent
    is exhausted within dt comes back as +inf.
    """
    cdef Py_ssize_t i, n = u.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Tail T
    T.kind = kind
    T.p = &p[0]
    T.x_floor = x_floor
    T.step = step
    T.n_nodes = vals.shape[0]
    T.vals = &vals[0]
    T.lag_x = &lag_x[0]
    T.lag_w = &lag_w[0]
    T.n_lag = lag_x.shape[0]
    T.gl_x = &gl_x[0]
    T.gl_w = &gl_w[0]
    T.n_gl = gl_x.shape[0]
    cdef double X, Xn, J0, Jx, ratio, logY, phi, h, k1, k2, k3, k4, v
    cdef int it, m
    with nogil:
        for i in range(n):
            X = u[i]
            if X >= x_floor:
                J0 = tail_J(&T, X)
                ratio = dt * exp(X) / J0
                if ratio >= 1.0:
                    out[i] = INFINITY
                    continue
                logY = -X + log(J0) + log1p(-ratio)
                Jx = J0
                for it in range(60):
                    phi = -X + log(Jx) - logY
                    Xn = X + phi * L_eval(kind, T.p, X) * Jx
                    if Xn < u[i]:
                        Xn = 0.5 * (X + u[i])
                    if fabs(Xn - X) <= tol * (1.0 + fabs(X)):
                        X = Xn
                        break
                    X = Xn
                    Jx = tail_J(&T, X)
                out[i] = X
            else:
                v = X
                h = dt / rk_substeps
                for m in range(rk_substeps):
                    k1 = f_eval(kind, T.p, v)
                    k2 = f_eval(kind, T.p, v + 0.5 * h * k1)
                    k3 = f_eval(kind, T.p, v + 0.5 * h * k2)
                    k4 = f_eval(kind, T.p, v + h * k3)
                    v += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
                out[i] = v
    return out_arr

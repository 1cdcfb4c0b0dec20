# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend for the hot inner loops.

Fuses the per-iteration arithmetic of the posterior update (and the Langevin
chain) for the linear and logistic potentials.  Semantics mirror the
pure-NumPy backend in ``_loops_py`` operation for operation; the two are
cross-checked in the test suite and compared in ``benchmarks/bench_loops.py``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, isfinite, sqrt

cnp.import_array()


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef int _inverse_T(double[:, ::1] B, double[:, ::1] out, double[:, ::1] lu,
                    int[::1] piv, double[::1] work, int d) noexcept nogil:
    """Writes (B^-1)^T into ``out`` via LU with partial pivoting.

    Row i of ``out`` is the solution of B x = e_i.  Returns -1 on a singular
    factor, 0 otherwise.
    """
    cdef int i, j, k, p
    cdef double amax, tmp
    for i in range(d):
        for j in range(d):
            lu[i, j] = B[i, j]
    for j in range(d):
        p = j
        amax = lu[j, j] if lu[j, j] >= 0 else -lu[j, j]
        for i in range(j + 1, d):
            tmp = lu[i, j] if lu[i, j] >= 0 else -lu[i, j]
            if tmp > amax:
                amax = tmp
                p = i
        if amax == 0.0:
            return -1
        piv[j] = p
        if p != j:
            for k in range(d):
                tmp = lu[j, k]
                lu[j, k] = lu[p, k]
                lu[p, k] = tmp
        for i in range(j + 1, d):
            lu[i, j] /= lu[j, j]
            for k in range(j + 1, d):
                lu[i, k] -= lu[i, j] * lu[j, k]
    for i in range(d):
        for k in range(d):
            work[k] = 0.0
        work[i] = 1.0
        for j in range(d):
            p = piv[j]
            if p != j:
                tmp = work[j]
                work[j] = work[p]
                work[p] = tmp
            for k in range(j + 1, d):
                work[k] -= lu[k, j] * work[j]
        for j in range(d - 1, -1, -1):
            for k in range(j + 1, d):
                work[j] -= lu[j, k] * work[k]
            work[j] /= lu[j, j]
        for j in range(d):
            out[i, j] = work[j]
    return 0


cdef void _linear_grad(double[:, ::1] V, double[::1] b, double eta,
                       double[::1] theta, double[::1] g, int d) noexcept nogil:
    cdef int i, k
    cdef double acc
    for i in range(d):
        acc = 0.0
        for k in range(d):
            acc += V[i, k] * theta[k]
        g[i] = eta * (acc - b[i])


cdef void _logistic_grad(double[:, ::1] F, double[::1] r, double lam, double eta,
                         double[::1] theta, double[::1] g, int n, int d) noexcept nogil:
    cdef int s, i
    cdef double z, sg
    for i in range(d):
        g[i] = lam * theta[i]
    for s in range(n):
        z = 0.0
        for i in range(d):
            z += F[s, i] * theta[i]
        sg = _sigmoid(z) - r[s]
        for i in range(d):
            g[i] += F[s, i] * sg
    for i in range(d):
        g[i] *= eta


cdef void _logistic_hessian(double[:, ::1] F, double lam, double eta,
                            double[::1] theta, double[:, ::1] A, int n, int d) noexcept nogil:
    cdef int s, i, j
    cdef double z, sg, w, wfi
    for i in range(d):
        for j in range(d):
            A[i, j] = 0.0
        A[i, i] = lam
    # accumulate the upper triangle only; mirror afterwards
    for s in range(n):
        z = 0.0
        for i in range(d):
            z += F[s, i] * theta[i]
        sg = _sigmoid(z)
        w = sg * (1.0 - sg)
        for i in range(d):
            wfi = w * F[s, i]
            for j in range(i, d):
                A[i, j] += wfi * F[s, j]
    for i in range(d):
        A[i, i] *= eta
        for j in range(i + 1, d):
            A[i, j] *= eta
            A[j, i] = A[i, j]


cdef inline int _sample(double[::1] mu, double[:, ::1] B, double[:, ::1] eps, int k,
                        double[::1] theta, int d) noexcept nogil:
    cdef int i, j
    cdef double acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += B[i, j] * eps[k, j]
        theta[i] = mu[i] + acc
    return 0


cdef int _hessian_sqrt_update(double[::1] mu, double[:, ::1] B, double[:, ::1] A,
                              double[::1] g, double h,
                              double[:, ::1] invT, double[:, ::1] Bnew, int d) noexcept nogil:
    """mu -= h g;  Bnew = B - h A B + h (B^-1)^T (invT precomputed)."""
    cdef int i, j, k
    cdef double acc
    for i in range(d):
        mu[i] -= h * g[i]
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += A[i, k] * B[k, j]
            Bnew[i, j] = B[i, j] - h * acc + h * invT[i, j]
    return 0


cdef double _gate_gap(double[:, ::1] C, double[:, ::1] B, int d) noexcept nogil:
    """|C B - I|_F."""
    cdef int i, j, k
    cdef double acc, gap = 0.0
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += C[i, k] * B[k, j]
            if i == j:
                acc -= 1.0
            gap += acc * acc
    return sqrt(gap)


cdef int _rank_one_update(double[::1] mu, double[:, ::1] B, double[:, ::1] C,
                          double[::1] theta, double[::1] g, double h,
                          double[::1] w, double[::1] vec, double[:, ::1] G,
                          double[:, ::1] Bnew, double[:, ::1] Cnew, int d) noexcept nogil:
    """Hessian-free step: A = (C^T C)(theta - mu) g^T applied in rank-one form.

    Bnew = B - h w (g^T B) + h C^T;  Cnew = C - h C (C^T C) + h (C w) g^T;
    mu -= h g.  Uses the pre-update mu for theta - mu.
    """
    cdef int i, j, k
    cdef double acc
    # vec <- C (theta - mu), then w <- C^T vec = (C^T C)(theta - mu)
    for i in range(d):
        acc = 0.0
        for k in range(d):
            acc += C[i, k] * (theta[k] - mu[k])
        vec[i] = acc
    for i in range(d):
        acc = 0.0
        for k in range(d):
            acc += C[k, i] * vec[k]
        w[i] = acc
    for i in range(d):
        mu[i] -= h * g[i]
    # G <- C^T C, reused for the C update
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += C[k, i] * C[k, j]
            G[i, j] = acc
    # vec <- g^T B
    for j in range(d):
        acc = 0.0
        for k in range(d):
            acc += g[k] * B[k, j]
        vec[j] = acc
    for i in range(d):
        for j in range(d):
            Bnew[i, j] = B[i, j] - h * w[i] * vec[j] + h * C[j, i]
    # vec <- C w
    for i in range(d):
        acc = 0.0
        for k in range(d):
            acc += C[i, k] * w[k]
        vec[i] = acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += C[i, k] * G[k, j]
            Cnew[i, j] = C[i, j] - h * acc + h * vec[i] * g[j]
    return 0


cdef int _all_finite(double[::1] x, int d) noexcept nogil:
    cdef int i
    for i in range(d):
        if not isfinite(x[i]):
            return 0
    return 1


def vits_hessian_loop(mu0, B0, potential_args, double h, eps):
    """Exact-Hessian inner loop (linear or logistic potential).

    ``potential_args`` is ("linear", V, b, eta) or ("logistic", F, r, lam, eta).
    ``eps`` has one standard-normal row per iteration (zeros for the
    closed-form-expectation mode).  Returns ``(mu, B)``.
    """
    from .errors import DivergenceError, NumericsError

    cdef double[::1] mu = np.array(mu0, dtype=np.float64)
    cdef double[:, ::1] B = np.array(B0, dtype=np.float64, order="C")
    cdef double[:, ::1] e = np.ascontiguousarray(eps, dtype=np.float64)
    cdef int d = mu.shape[0]
    cdef int K = e.shape[0]

    cdef bint linear = potential_args[0] == "linear"
    cdef double[:, ::1] V = None
    cdef double[::1] b = None
    cdef double[:, ::1] F = None
    cdef double[::1] r = None
    cdef double eta, lam = 0.0
    cdef int n = 0
    if linear:
        V = np.ascontiguousarray(potential_args[1], dtype=np.float64)
        b = np.ascontiguousarray(potential_args[2], dtype=np.float64)
        eta = potential_args[3]
    else:
        F = np.ascontiguousarray(potential_args[1], dtype=np.float64)
        r = np.ascontiguousarray(potential_args[2], dtype=np.float64)
        lam = potential_args[3]
        eta = potential_args[4]
        n = F.shape[0]

    cdef double[::1] theta = np.empty(d)
    cdef double[::1] g = np.empty(d)
    cdef double[:, ::1] A = np.empty((d, d))
    cdef double[:, ::1] invT = np.empty((d, d))
    cdef double[:, ::1] Bnew = np.empty((d, d))
    cdef double[:, ::1] lu = np.empty((d, d))
    cdef int[::1] piv = np.empty(d, dtype=np.intc)
    cdef double[::1] work = np.empty(d)
    cdef double[:, ::1] tmp

    cdef int i, j, k, status = 0, bad_step = -1
    if linear:
        for i in range(d):
            for j in range(d):
                A[i, j] = eta * V[i, j]

    with nogil:
        for k in range(K):
            _sample(mu, B, e, k, theta, d)
            if linear:
                _linear_grad(V, b, eta, theta, g, d)
            else:
                _logistic_grad(F, r, lam, eta, theta, g, n, d)
                _logistic_hessian(F, lam, eta, theta, A, n, d)
            if not _all_finite(g, d):
                status = 2
                bad_step = k
                break
            if _inverse_T(B, invT, lu, piv, work, d) != 0:
                status = 1
                bad_step = k
                break
            _hessian_sqrt_update(mu, B, A, g, h, invT, Bnew, d)
            tmp = B
            B = Bnew
            Bnew = tmp

    if status == 1:
        raise NumericsError(f"square-root factor is singular at inner step {bad_step}")
    if status == 2:
        raise DivergenceError(f"non-finite gradient in mean update at inner step {bad_step}")
    return np.asarray(mu), np.asarray(B)


def vits_hessian_free_loop(mu0, B0, C0, potential_args, double h, eps, double fro_gate):
    """Hessian-free inner loop with inverse tracking.  Returns ``(mu, B, C)``."""
    from .errors import DivergenceError

    cdef double[::1] mu = np.array(mu0, dtype=np.float64)
    cdef double[:, ::1] B = np.array(B0, dtype=np.float64, order="C")
    cdef double[:, ::1] C = np.array(C0, dtype=np.float64, order="C")
    cdef double[:, ::1] e = np.ascontiguousarray(eps, dtype=np.float64)
    cdef int d = mu.shape[0]
    cdef int K = e.shape[0]

    cdef bint linear = potential_args[0] == "linear"
    cdef double[:, ::1] V = None
    cdef double[::1] b = None
    cdef double[:, ::1] F = None
    cdef double[::1] r = None
    cdef double eta, lam = 0.0
    cdef int n = 0
    if linear:
        V = np.ascontiguousarray(potential_args[1], dtype=np.float64)
        b = np.ascontiguousarray(potential_args[2], dtype=np.float64)
        eta = potential_args[3]
    else:
        F = np.ascontiguousarray(potential_args[1], dtype=np.float64)
        r = np.ascontiguousarray(potential_args[2], dtype=np.float64)
        lam = potential_args[3]
        eta = potential_args[4]
        n = F.shape[0]

    cdef double[::1] theta = np.empty(d)
    cdef double[::1] g = np.empty(d)
    cdef double[::1] w = np.empty(d)
    cdef double[::1] vec = np.empty(d)
    cdef double[:, ::1] G = np.empty((d, d))
    cdef double[:, ::1] Bnew = np.empty((d, d))
    cdef double[:, ::1] Cnew = np.empty((d, d))
    cdef double[:, ::1] tmp

    cdef int k, status = 0, bad_step = -1
    cdef double gap = 0.0

    with nogil:
        for k in range(K):
            _sample(mu, B, e, k, theta, d)
            if linear:
                _linear_grad(V, b, eta, theta, g, d)
            else:
                _logistic_grad(F, r, lam, eta, theta, g, n, d)
            if not _all_finite(g, d):
                status = 2
                bad_step = k
                break
            _rank_one_update(mu, B, C, theta, g, h, w, vec, G, Bnew, Cnew, d)
            tmp = B
            B = Bnew
            Bnew = tmp
            tmp = C
            C = Cnew
            Cnew = tmp
            gap = _gate_gap(C, B, d)
            if gap > fro_gate:
                status = 3
                bad_step = k
                break

    if status == 2:
        raise DivergenceError(f"non-finite gradient in mean update at inner step {bad_step}")
    if status == 3:
        raise DivergenceError(
            f"inverse approximation diverged: |CB - I|_F = {gap:.3g} at inner step {bad_step}"
        )
    return np.asarray(mu), np.asarray(B), np.asarray(C)


def ula_loop(theta0, potential_args, double h, noise):
    """Unadjusted-Langevin chain; one noise row per step.  Returns theta."""
    from .errors import DivergenceError

    cdef double[::1] theta = np.array(theta0, dtype=np.float64)
    cdef double[:, ::1] xi = np.ascontiguousarray(noise, dtype=np.float64)
    cdef int d = theta.shape[0]
    cdef int K = xi.shape[0]

    cdef bint linear = potential_args[0] == "linear"
    cdef double[:, ::1] V = None
    cdef double[::1] b = None
    cdef double[:, ::1] F = None
    cdef double[::1] r = None
    cdef double eta, lam = 0.0
    cdef int n = 0
    if linear:
        V = np.ascontiguousarray(potential_args[1], dtype=np.float64)
        b = np.ascontiguousarray(potential_args[2], dtype=np.float64)
        eta = potential_args[3]
    else:
        F = np.ascontiguousarray(potential_args[1], dtype=np.float64)
        r = np.ascontiguousarray(potential_args[2], dtype=np.float64)
        lam = potential_args[3]
        eta = potential_args[4]
        n = F.shape[0]

    cdef double[::1] g = np.empty(d)
    cdef double scale = sqrt(2.0 * h)
    cdef int k, i, status = 0, bad_step = -1

    with nogil:
        for k in range(K):
            if linear:
                _linear_grad(V, b, eta, theta, g, d)
            else:
                _logistic_grad(F, r, lam, eta, theta, g, n, d)
            for i in range(d):
                theta[i] = theta[i] - h * g[i] + scale * xi[k, i]
            if not _all_finite(theta, d):
                status = 1
                bad_step = k
                break

    if status == 1:
        raise DivergenceError(f"Langevin iterate became non-finite at step {bad_step}")
    return np.asarray(theta)

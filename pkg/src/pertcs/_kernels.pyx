# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled enumeration of extremal eigenvalues over principal Gram submatrices.

Eigenvalues of ``G[S, S]`` for every ``|S| = K`` are the squared singular
values of the K-column submatrices ``M[:, S]`` when ``G = M.T @ M``.
"""
from libc.math cimport sqrt, fabs, hypot, acos, cos, INFINITY, M_PI
from libc.stdlib cimport malloc, free


cdef enum:
    KMAX = 64


cdef void _jacobi_eigs(double* a, int k, double* w) noexcept nogil:
    # cyclic Jacobi on a k x k symmetric row-major block; a is destroyed
    cdef int sweep, p, q, r
    cdef double off, diag, apq, theta, t, c, s, arp, arq
    for sweep in range(100):
        off = 0.0
        diag = 0.0
        for p in range(k):
            diag += a[p * k + p] * a[p * k + p]
            for q in range(p + 1, k):
                off += a[p * k + q] * a[p * k + q]
        if off <= 1e-32 * diag or off == 0.0:
            break
        for p in range(k):
            for q in range(p + 1, k):
                apq = a[p * k + q]
                if apq == 0.0:
                    continue
                theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                a[p * k + p] -= t * apq
                a[q * k + q] += t * apq
                a[p * k + q] = 0.0
                a[q * k + p] = 0.0
                for r in range(k):
                    if r == p or r == q:
                        continue
                    arp = a[r * k + p]
                    arq = a[r * k + q]
                    a[r * k + p] = c * arp - s * arq
                    a[p * k + r] = a[r * k + p]
                    a[r * k + q] = s * arp + c * arq
                    a[q * k + r] = a[r * k + q]
    for p in range(k):
        w[p] = a[p * k + p]


cdef void _sym3_eigs(double a00, double a01, double a02, double a11, double a12,
                    double a22, double* w) noexcept nogil:
    # trigonometric solution of the characteristic cubic
    cdef double p1 = a01 * a01 + a02 * a02 + a12 * a12
    cdef double q, p2, p, b00, b11, b22, r, phi
    if p1 == 0.0:
        w[0] = a00
        w[1] = a11
        w[2] = a22
        return
    q = (a00 + a11 + a22) / 3.0
    b00 = a00 - q
    b11 = a11 - q
    b22 = a22 - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1
    p = sqrt(p2 / 6.0)
    r = (b00 * (b11 * b22 - a12 * a12) - a01 * (a01 * b22 - a12 * a02)
         + a02 * (a01 * a12 - b11 * a02)) / (2.0 * p * p * p)
    if r <= -1.0:
        phi = M_PI / 3.0
    elif r >= 1.0:
        phi = 0.0
    else:
        phi = acos(r) / 3.0
    w[2] = q + 2.0 * p * cos(phi)
    w[0] = q + 2.0 * p * cos(phi + 2.0 * M_PI / 3.0)
    w[1] = 3.0 * q - w[0] - w[2]


cdef bint _shifted_pd(const double[:, ::1] G, int* idx, int k, double t, double sgn,
                      double* c) noexcept nogil:
    # Cholesky of sgn*(G[S,S] - t I); success proves every eigenvalue lies
    # strictly on the sgn side of t
    cdef int i, j, p
    cdef double v
    for j in range(k):
        for i in range(j, k):
            v = sgn * G[idx[i], idx[j]]
            if i == j:
                v -= sgn * t
            for p in range(j):
                v -= c[i * k + p] * c[j * k + p]
            if i == j:
                if not v > 0.0:
                    return False
                c[j * k + j] = sqrt(v)
            else:
                c[i * k + j] = v / c[j * k + j]
    return True


def gram_extremes(const double[:, ::1] G, int K, double zero_tol, long long limit=-1):
    """Scan every K-subset of ``range(n)`` in lexicographic order.

    Returns ``(lam_max, argmax, lam_min, argmin, lam_min_nz, argmin_nz, count)``
    where ``lam_min_nz`` is the smallest eigenvalue above ``zero_tol`` (``inf``
    if there is none). Ties keep the lexicographically first subset.
    ``limit`` caps the number of subsets examined (negative: no cap).
    """
    cdef int n = G.shape[0]
    if G.shape[1] != n:
        raise ValueError("Gram matrix must be square")
    if K < 1 or K > n:
        raise ValueError(f"K={K} outside [1, {n}]")
    if K > KMAX:
        raise ValueError(f"compiled kernel supports K <= {KMAX}")

    cdef int idx[KMAX]
    cdef int best_max[KMAX]
    cdef int best_min[KMAX]
    cdef int best_nz[KMAX]
    cdef double* block = <double*> malloc(K * K * sizeof(double))
    cdef double* w = <double*> malloc(K * sizeof(double))
    cdef double* chol = <double*> malloc(K * K * sizeof(double))
    if block == NULL or w == NULL or chol == NULL:
        free(block)
        free(w)
        free(chol)
        raise MemoryError()

    cdef double lam_max = -INFINITY
    cdef double lam_min = INFINITY
    cdef double lam_nz = INFINITY
    cdef double hi, lo, lo_nz, mid, rad
    cdef long long count = 0
    cdef int i, j, p
    cdef bint done = False
    cdef bint skip

    for i in range(K):
        idx[i] = i
        best_max[i] = i
        best_min[i] = i
        best_nz[i] = -1

    with nogil:
        while not done:
            skip = False
            if K == 1:
                w[0] = G[idx[0], idx[0]]
            elif K == 2:
                mid = 0.5 * (G[idx[0], idx[0]] + G[idx[1], idx[1]])
                rad = hypot(0.5 * (G[idx[0], idx[0]] - G[idx[1], idx[1]]), G[idx[0], idx[1]])
                w[0] = mid - rad
                w[1] = mid + rad
            elif K == 3:
                _sym3_eigs(G[idx[0], idx[0]], G[idx[0], idx[1]], G[idx[0], idx[2]],
                           G[idx[1], idx[1]], G[idx[1], idx[2]], G[idx[2], idx[2]], w)
            else:
                # no eigensolve when no running extremum can strictly improve
                skip = (lam_max > -INFINITY
                        and _shifted_pd(G, idx, K, lam_max, -1.0, chol)
                        and _shifted_pd(G, idx, K, lam_nz if lam_nz > lam_min else lam_min,
                                        1.0, chol))
                if not skip:
                    for i in range(K):
                        for j in range(K):
                            block[i * K + j] = G[idx[i], idx[j]]
                    _jacobi_eigs(block, K, w)

            if not skip:
                hi = w[0]
                lo = w[0]
                lo_nz = INFINITY
                for i in range(K):
                    if w[i] > hi:
                        hi = w[i]
                    if w[i] < lo:
                        lo = w[i]
                    if w[i] > zero_tol and w[i] < lo_nz:
                        lo_nz = w[i]
                if hi > lam_max:
                    lam_max = hi
                    for i in range(K):
                        best_max[i] = idx[i]
                if lo < lam_min:
                    lam_min = lo
                    for i in range(K):
                        best_min[i] = idx[i]
                if lo_nz < lam_nz:
                    lam_nz = lo_nz
                    for i in range(K):
                        best_nz[i] = idx[i]
            count += 1
            if limit >= 0 and count >= limit:
                break

            # advance to the next combination
            p = K - 1
            while p >= 0 and idx[p] == n - K + p:
                p -= 1
            if p < 0:
                done = True
            else:
                idx[p] += 1
                for i in range(p + 1, K):
                    idx[i] = idx[i - 1] + 1

    free(block)
    free(w)
    free(chol)
    argmax = tuple(best_max[i] for i in range(K))
    argmin = tuple(best_min[i] for i in range(K))
    argnz = tuple(best_nz[i] for i in range(K)) if best_nz[0] >= 0 else None
    return lam_max, argmax, lam_min, argmin, lam_nz, argnz, count

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled MLP kernels: forward pass and fused per-row NLL with gradient.

Same contract as ``_pykernels``. Each layer is one BLAS ``dgemm`` over all
rows; bias, ReLU, head and reductions run in C with the GIL released, and
tanh uses numpy's vectorised ufunc in place.
Row-major ``A (m x k) @ B (k x n)`` is issued as the column-major product
``B^T A^T``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, fmax, log, log1p
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef double HALF_LOG_2PI = 0.91893853320467274178


cdef inline double _softplus(double x) noexcept nogil:
    # branch-free on the sign of x, same formula as the numpy backend
    return fmax(x, 0.0) + log1p(exp(-fabs(x)))


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e = exp(-fabs(x))
    cdef double pos = 1.0 / (1.0 + e)
    cdef double neg = e / (1.0 + e)
    return pos if x >= 0.0 else neg


cdef void _matmul(const double* A, const double* B, double* C, int m, int k,
                  int n, double beta) noexcept nogil:
    # C (m x n) = A (m x k) @ B (k x n) + beta * C, all row-major
    cdef char tr = b'N'
    cdef double one = 1.0
    dgemm(&tr, &tr, &n, &m, &k, &one, <double*>B, &n, <double*>A, &k, &beta, C, &n)


cdef int _forward_all(const double* theta, const double* X, int n,
                       const cnp.int64_t* sizes, int nl, const cnp.int64_t* woff,
                       int act, double** H, list bufs) except -1:
    # H[0] = X; H[l+1] = act(H[l] @ W_l + b_l), no activation on the last layer.
    # tanh goes through numpy's vectorised ufunc, which beats scalar libm calls.
    cdef int l, fin, fout
    cdef Py_ssize_t i, j
    cdef const double* W
    cdef const double* b
    cdef double* Z
    cdef double* zi
    H[0] = <double*>X
    for l in range(nl):
        fin = <int>sizes[l]
        fout = <int>sizes[l + 1]
        W = theta + woff[l]
        b = W + fin * fout
        Z = H[l + 1]
        with nogil:
            for i in range(n):
                zi = Z + i * fout
                for j in range(fout):
                    zi[j] = b[j]
            _matmul(H[l], W, Z, n, fin, fout, 1.0)
            if l < nl - 1 and act == 0:
                # select form compiles branch-free; NaN passes through
                for i in range(n * fout):
                    Z[i] = 0.0 if Z[i] < 0.0 else Z[i]
        if l < nl - 1 and act != 0:
            np.tanh(bufs[l], out=bufs[l])
    return 0


def _offsets(sizes):
    woff = np.zeros(len(sizes) - 1, dtype=np.int64)
    for l in range(1, len(sizes) - 1):
        woff[l] = woff[l - 1] + (sizes[l - 1] + 1) * sizes[l]
    return woff


def _buffers(n, sizes):
    return [np.empty(n * int(s), dtype=np.float64) for s in sizes[1:]]


def forward(const double[::1] theta, const double[:, ::1] X, sizes_in, int act):
    sizes_a = np.ascontiguousarray(sizes_in, dtype=np.int64)
    cdef cnp.int64_t[::1] sizes = sizes_a
    cdef cnp.int64_t[::1] woff = _offsets(sizes_a)
    cdef int nl = sizes.shape[0] - 1
    cdef int n = X.shape[0]
    bufs = _buffers(n, sizes_a)
    if n == 0:
        return np.empty((0, sizes[nl]))
    cdef double* H[64]
    cdef double[::1] view
    cdef int l
    if nl >= 63:
        raise ValueError("too many layers")
    for l in range(nl):
        view = bufs[l]
        H[l + 1] = &view[0]
    _forward_all(&theta[0], &X[0, 0], n, &sizes[0], nl, &woff[0], act, H, bufs)
    return bufs[nl - 1].reshape(n, sizes[nl])


def loss_grad(const double[::1] theta, const double[:, ::1] X,
              const double[:, ::1] y_reg, const cnp.int64_t[::1] y_lab,
              sizes_in, int act, int task, double sigma_min, bint want_grad):
    sizes_a = np.ascontiguousarray(sizes_in, dtype=np.int64)
    cdef cnp.int64_t[::1] sizes = sizes_a
    cdef cnp.int64_t[::1] woff = _offsets(sizes_a)
    cdef int nl = sizes.shape[0] - 1
    cdef int n = X.shape[0]
    cdef int w = <int>sizes[nl]
    rows_a = np.empty(n, dtype=np.float64)
    grad_a = np.zeros(theta.shape[0], dtype=np.float64)
    if n == 0:
        return rows_a, (grad_a if want_grad else None)
    if nl >= 63:
        raise ValueError("too many layers")
    cdef double[::1] rows = rows_a
    cdef double[::1] grad = grad_a
    bufs = _buffers(n, sizes_a)
    wmax = int(np.max(sizes_a))
    cdef double[::1] d0 = np.empty(n * wmax, dtype=np.float64)
    cdef double[::1] d1 = np.empty(n * wmax, dtype=np.float64)
    cdef double* H[64]
    cdef double[::1] view
    cdef int l
    for l in range(nl):
        view = bufs[l]
        H[l + 1] = &view[0]

    cdef Py_ssize_t i, j, k
    cdef int t, fin, fout, lab
    cdef double mu, s, sig, r, var, acc, m, lse, nll
    cdef double* o
    cdef double* dl
    cdef double* delta = &d0[0]
    cdef double* nd = &d1[0]
    cdef double* tmp
    cdef double* g
    cdef const double* W
    cdef const double* hrow
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef double one = 1.0
    cdef double zero = 0.0
    _forward_all(&theta[0], &X[0, 0], n, &sizes[0], nl, &woff[0], act, H, bufs)
    with nogil:
        for i in range(n):
            o = H[nl] + i * w
            dl = delta + i * w
            nll = 0.0
            if task == 0:
                t = w // 2
                for j in range(t):
                    mu = o[j]
                    s = o[t + j]
                    sig = _softplus(s) + sigma_min
                    r = y_reg[i, j] - mu
                    var = sig * sig
                    nll += HALF_LOG_2PI + log(sig) + r * r / (2.0 * var)
                    dl[j] = -r / var
                    dl[t + j] = (1.0 / sig - r * r / (var * sig)) * _sigmoid(s)
            else:
                lab = <int>y_lab[i]
                m = o[0]
                for j in range(1, w):
                    if o[j] > m:
                        m = o[j]
                acc = 0.0
                for j in range(w):
                    acc += exp(o[j] - m)
                lse = m + log(acc)
                nll = lse - o[lab]
                for j in range(w):
                    dl[j] = exp(o[j] - lse)
                dl[lab] -= 1.0
            rows[i] = nll
        if want_grad:
            for l in range(nl - 1, -1, -1):
                fin = <int>sizes[l]
                fout = <int>sizes[l + 1]
                W = &theta[0] + woff[l]
                g = &grad[0] + woff[l]
                # bias gradient: column sums of delta
                for i in range(n):
                    dl = delta + i * fout
                    for j in range(fout):
                        g[fin * fout + j] += dl[j]
                # gW (fin x fout) += H_l^T @ delta
                dgemm(&tn, &tt, &fout, &fin, &n, &one, delta, &fout, H[l], &fin,
                      &one, g, &fout)
                if l > 0:
                    # nd (n x fin) = delta @ W^T, then activation derivative
                    dgemm(&tt, &tn, &fin, &n, &fout, &one, <double*>W, &fout,
                          delta, &fout, &zero, nd, &fin)
                    hrow = H[l]
                    if act == 0:
                        for k in range(n * fin):
                            nd[k] = nd[k] * <double>(hrow[k] > 0.0)
                    else:
                        for k in range(n * fin):
                            nd[k] = nd[k] * (1.0 - hrow[k] * hrow[k])
                    tmp = delta
                    delta = nd
                    nd = tmp
    if not want_grad:
        return rows_a, None
    return rows_a, grad_a

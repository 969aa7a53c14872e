# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Monte Carlo hot kernels.

Mirrors the numpy fallback in ``_pykernels``: counter-based Philox4x64-10
streams keyed by (seed, stream_id) with numpy's word order, Box-Muller
normals consuming one word per normal, and per-slot small-matrix receiver
kernels.  The heavy loops run without the GIL so chunk-level threads
scale.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, log, sin, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

BACKEND = "c"

ctypedef unsigned long long u64
ctypedef double complex cplx

cdef extern from *:
    # 64x64 -> 128 bit product; gcc/clang builtin type
    ctypedef unsigned long long u128 "__uint128_t"

cdef double TWO_PI = 6.283185307179586476925287
cdef double TO01 = 1.0 / 9007199254740992.0  # 2^-53

cdef u64 M0 = 0xD2E7470EE14C6C93ULL
cdef u64 M1 = 0xCA5A826395121157ULL
cdef u64 W0 = 0x9E3779B97F4A7C15ULL
cdef u64 W1 = 0xBB67AE8584CAA73BULL


cdef inline void philox_block(u64 ctr, u64 k0, u64 k1, u64 *out) noexcept nogil:
    cdef u64 c0 = ctr, c1 = 0, c2 = 0, c3 = 0
    cdef u64 hi0, lo0, hi1, lo1
    cdef int i
    for i in range(10):
        hi0 = <u64> (((<u128> M0) * c0) >> 64)
        lo0 = M0 * c0
        hi1 = <u64> (((<u128> M1) * c2) >> 64)
        lo1 = M1 * c2
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 += W0
        k1 += W1
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


cdef inline double to_uniform(u64 w) noexcept nogil:
    # (0, 1]
    return (<double> ((w >> 11) + 1)) * TO01


cdef void fill_uniforms(u64 seed, u64 stream, long word_start, long nwords,
                        double *out) noexcept nogil:
    cdef long b0 = word_start >> 2
    cdef long b1 = (word_start + nwords + 3) >> 2
    cdef long b, lane, w
    cdef u64 blk[4]
    cdef long pos = 0
    for b in range(b0, b1):
        philox_block(<u64> (1 + b), seed, stream, blk)
        for lane in range(4):
            w = 4 * b + lane
            if w >= word_start and w < word_start + nwords:
                out[pos] = to_uniform(blk[lane])
                pos += 1


cdef void fill_normals(u64 seed, u64 stream, long word_start, long nnormals,
                       double *out) noexcept nogil:
    # word_start and nnormals must be even (checked by callers)
    cdef long m
    cdef double u1, u2, rad
    fill_uniforms(seed, stream, word_start, nnormals, out)
    for m in range(nnormals // 2):
        u1 = out[2 * m]
        u2 = out[2 * m + 1]
        rad = sqrt(-2.0 * log(u1))
        out[2 * m] = rad * cos(TWO_PI * u2)
        out[2 * m + 1] = rad * sin(TWO_PI * u2)


def raw_words(seed, streams, block_start, nblocks):
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef u64[::1] sv = streams
    cdef long ns = sv.shape[0], nb = nblocks, b0 = block_start
    out = np.empty((ns, 4 * nb), dtype=np.uint64)
    cdef u64[:, ::1] ov = out
    cdef long i, b
    cdef u64 blk[4]
    cdef u64 sd = <u64> seed
    with nogil:
        for i in range(ns):
            for b in range(nb):
                philox_block(<u64> (1 + b0 + b), sd, sv[i], blk)
                ov[i, 4 * b + 0] = blk[0]
                ov[i, 4 * b + 1] = blk[1]
                ov[i, 4 * b + 2] = blk[2]
                ov[i, 4 * b + 3] = blk[3]
    return out


def uniforms(seed, streams, word_start, nwords):
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef u64[::1] sv = streams
    cdef long ns = sv.shape[0]
    out = np.empty((ns, nwords), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef long i, ws = word_start, nw = nwords
    cdef u64 sd = <u64> seed
    with nogil:
        for i in range(ns):
            fill_uniforms(sd, sv[i], ws, nw, &ov[i, 0])
    return out


def normals(seed, streams, word_start, nnormals):
    if word_start % 2 or nnormals % 2:
        raise ValueError("normals require even word alignment")
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef u64[::1] sv = streams
    cdef long ns = sv.shape[0]
    out = np.empty((ns, nnormals), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef long i, ws = word_start, nn = nnormals
    cdef u64 sd = <u64> seed
    with nogil:
        for i in range(ns):
            fill_normals(sd, sv[i], ws, nn, &ov[i, 0])
    return out


def channels(seed, streams, K, r):
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef u64[::1] sv = streams
    cdef long ns = sv.shape[0], kk = K, rr = r
    out = np.empty((ns, kk, rr), dtype=np.complex128)
    cdef cplx[:, :, ::1] ov = out
    cdef long i, k, m
    cdef u64 sd = <u64> seed
    cdef double *buf
    with nogil:
        buf = <double *> malloc(2 * kk * rr * sizeof(double))
        for i in range(ns):
            fill_normals(sd, sv[i], 0, 2 * kk * rr, buf)
            for k in range(kk):
                for m in range(rr):
                    ov[i, k, m] = buf[2 * (k * rr + m)] + 1j * buf[2 * (k * rr + m) + 1]
        free(buf)
    return out


def chi2_batch(seed, streams, n, r):
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef u64[::1] sv = streams
    cdef long ns = sv.shape[0], nn = n, rr = r
    out = np.empty((ns, nn), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef long i, k, m
    cdef double acc
    cdef u64 sd = <u64> seed
    cdef double *buf
    with nogil:
        buf = <double *> malloc(nn * rr * sizeof(double))
        for i in range(ns):
            fill_uniforms(sd, sv[i], 0, nn * rr, buf)
            for k in range(nn):
                acc = 0.0
                for m in range(rr):
                    acc += log(buf[k * rr + m])
                ov[i, k] = -2.0 * acc
        free(buf)
    return out


# ---------------------------------------------------------------------------
# receiver kernels
# ---------------------------------------------------------------------------

cdef int cholesky(cplx *a, long n) noexcept nogil:
    """In-place lower Cholesky of a Hermitian positive-definite n x n matrix."""
    cdef long i, j, k
    cdef cplx s
    cdef double d
    for j in range(n):
        s = a[j * n + j]
        for k in range(j):
            s -= a[j * n + k] * a[j * n + k].conjugate()
        d = s.real
        if d <= 0.0:
            return -1
        d = sqrt(d)
        a[j * n + j] = d
        for i in range(j + 1, n):
            s = a[i * n + j]
            for k in range(j):
                s -= a[i * n + k] * a[j * n + k].conjugate()
            a[i * n + j] = s / d
    return 0


cdef void inv_gram_diag(cplx *L, long n, double *diag) noexcept nogil:
    """diag of (L L^H)^-1 via forward solves L x = e_i."""
    cdef long i, m, t
    cdef cplx s
    cdef double acc
    cdef cplx *x
    x = <cplx *> malloc(n * sizeof(cplx))
    for i in range(n):
        acc = 0.0
        x[i] = 1.0 / L[i * n + i]
        acc += (x[i] * x[i].conjugate()).real
        for m in range(i + 1, n):
            s = 0.0
            for t in range(i, m):
                s -= L[m * n + t] * x[t]
            x[m] = s / L[m * n + m]
            acc += (x[m] * x[m].conjugate()).real
        diag[i] = acc
    free(x)


cdef int gram_diag_inv(cplx[:, :, ::1] H, double shift, double[:, ::1] out) noexcept nogil:
    """out[b, i] = [(H_b^H H_b + shift I)^-1]_ii for every slot b."""
    cdef long B = H.shape[0], r = H.shape[1], j = H.shape[2]
    cdef long b, p, q, m
    cdef cplx s
    cdef cplx *G
    cdef double *d
    cdef int rc = 0
    G = <cplx *> malloc(j * j * sizeof(cplx))
    d = <double *> malloc(j * sizeof(double))
    for b in range(B):
        for p in range(j):
            for q in range(p + 1):
                s = 0.0
                for m in range(r):
                    s += H[b, m, p].conjugate() * H[b, m, q]
                G[q * j + p] = s.conjugate()
                G[p * j + q] = s
            G[p * j + p] = G[p * j + p] + shift
        if cholesky(G, j) != 0:
            rc = -1
            break
        inv_gram_diag(G, j, d)
        for p in range(j):
            out[b, p] = d[p]
    free(G)
    free(d)
    return rc


def zf_gains(H):
    H = np.ascontiguousarray(H, dtype=np.complex128)
    cdef long B = H.shape[0], j = H.shape[2]
    out = np.empty((B, j), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef cplx[:, :, ::1] hv = H
    cdef int rc
    with nogil:
        rc = gram_diag_inv(hv, 0.0, ov)
    if rc != 0:
        raise np.linalg.LinAlgError("rank-deficient active set")
    np.reciprocal(out, out=out)
    return out


def mmse_sinrs(H):
    H = np.ascontiguousarray(H, dtype=np.complex128)
    cdef long B = H.shape[0], j = H.shape[2]
    out = np.empty((B, j), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef cplx[:, :, ::1] hv = H
    with nogil:
        gram_diag_inv(hv, 1.0, ov)
    out = 1.0 / out - 1.0
    np.maximum(out, 0.0, out=out)
    return out


def sic_chain(H, nstages):
    H = np.ascontiguousarray(H, dtype=np.complex128)
    cdef cplx[:, :, ::1] hv = H
    cdef long B = H.shape[0], K = H.shape[1], r = H.shape[2], L = nstages
    orders = np.empty((B, L), dtype=np.int64)
    projn = np.empty((B, L), dtype=np.float64)
    cdef long[:, ::1] ov = orders
    cdef double[:, ::1] pv = projn
    cdef long b, l, k, m, t, best, rep
    cdef double bestval, nv, acc
    cdef cplx s
    cdef double *res
    cdef cplx *Q
    cdef cplx *v
    with nogil:
        res = <double *> malloc(K * sizeof(double))
        Q = <cplx *> malloc(L * r * sizeof(cplx))
        v = <cplx *> malloc(r * sizeof(cplx))
        for b in range(B):
            for k in range(K):
                acc = 0.0
                for m in range(r):
                    acc += (hv[b, k, m] * hv[b, k, m].conjugate()).real
                res[k] = acc
            for l in range(L):
                best = -1
                bestval = -1.0
                for k in range(K):
                    if res[k] > bestval:
                        bestval = res[k]
                        best = k
                ov[b, l] = best
                pv[b, l] = bestval if bestval > 0.0 else 0.0
                res[best] = -1.0  # taken
                if l == L - 1:
                    break
                for m in range(r):
                    v[m] = hv[b, best, m]
                for rep in range(2):  # re-orthogonalize for stability
                    for t in range(l):
                        s = 0.0
                        for m in range(r):
                            s += Q[t * r + m].conjugate() * v[m]
                        for m in range(r):
                            v[m] = v[m] - s * Q[t * r + m]
                nv = 0.0
                for m in range(r):
                    nv += (v[m] * v[m].conjugate()).real
                nv = sqrt(nv)
                if nv < 1e-300:
                    nv = 1e-300
                for m in range(r):
                    Q[l * r + m] = v[m] / nv
                for k in range(K):
                    if res[k] >= 0.0:
                        s = 0.0
                        for m in range(r):
                            s += Q[l * r + m].conjugate() * hv[b, k, m]
                        res[k] = res[k] - (s * s.conjugate()).real
                        if res[k] < 0.0:
                            res[k] = 0.0
        free(res)
        free(Q)
        free(v)
    return orders, projn

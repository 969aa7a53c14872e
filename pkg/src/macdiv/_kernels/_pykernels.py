"""Pure numpy implementation of the Monte Carlo hot kernels.

Semantics shared with the compiled backend:

* Randomness is counter-based Philox4x64-10.  A stream is keyed by
  (seed, stream_id); word w of a stream is lane w % 4 of the block
  computed at counter value 1 + w // 4 (matching numpy's own Philox
  word order, which the tests exploit as an oracle).
* Uniforms map a word to ((w >> 11) + 1) * 2^-53, in (0, 1].
* Normals are Box-Muller pairs over consecutive words, so normal i
  consumes exactly word i.
"""

import numpy as np

BACKEND = "python"

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_U32 = np.uint64(32)
_U11 = np.uint64(11)
_TO01 = 2.0 ** -53


def _mulhilo(a, b):
    lo = a * b
    ah = a >> _U32
    al = a & _MASK32
    bh = b >> _U32
    bl = b & _MASK32
    t = al * bl
    w = (t >> _U32) + ah * bl
    carry = ((w & _MASK32) + al * bh) >> _U32
    hi = ah * bh + (w >> _U32) + carry
    return hi, lo


def _philox(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


def raw_words(seed, streams, block_start, nblocks):
    """uint64 words for blocks [block_start, block_start + nblocks).

    Returns shape (len(streams), 4 * nblocks).
    """
    streams = np.asarray(streams, dtype=np.uint64)
    nstreams = streams.size
    ctr = np.uint64(1 + block_start) + np.arange(nblocks, dtype=np.uint64)
    c0 = np.broadcast_to(ctr, (nstreams, nblocks)).ravel().copy()
    z = np.zeros(nstreams * nblocks, dtype=np.uint64)
    k0 = np.full(nstreams * nblocks, np.uint64(seed), dtype=np.uint64)
    k1 = np.broadcast_to(streams[:, None], (nstreams, nblocks)).ravel().copy()
    with np.errstate(over="ignore"):
        o0, o1, o2, o3 = _philox(c0, z, z.copy(), z.copy(), k0, k1)
    out = np.stack([o0, o1, o2, o3], axis=1)
    return out.reshape(nstreams, 4 * nblocks)


def uniforms(seed, streams, word_start, nwords):
    """Uniforms in (0, 1] for words [word_start, word_start + nwords)."""
    b0 = word_start // 4
    b1 = (word_start + nwords + 3) // 4
    words = raw_words(seed, streams, b0, b1 - b0)
    off = word_start - 4 * b0
    sel = words[:, off:off + nwords]
    return ((sel >> _U11) + np.uint64(1)).astype(np.float64) * _TO01


def normals(seed, streams, word_start, nnormals):
    """Standard normals for words [word_start, ...); both args must be even."""
    if word_start % 2 or nnormals % 2:
        raise ValueError("normals require even word alignment")
    u = uniforms(seed, streams, word_start, nnormals)
    u1 = u[:, 0::2]
    u2 = u[:, 1::2]
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = (2.0 * np.pi) * u2
    out = np.empty_like(u)
    out[:, 0::2] = rad * np.cos(ang)
    out[:, 1::2] = rad * np.sin(ang)
    return out


def channels(seed, streams, K, r):
    """Complex channel vectors for K users, words [0, 2*K*r).

    Entry real/imaginary parts are unit-variance normals, making each
    squared vector norm exactly chi-square with 2r degrees of freedom.
    """
    z = normals(seed, streams, 0, 2 * K * r).reshape(-1, K, r, 2)
    return z[..., 0] + 1j * z[..., 1]


def chi2_batch(seed, streams, n, r):
    """n chi-square(2r) variates per stream via -2 log of uniform products.

    Sample i of a stream consumes words [i*r, (i+1)*r); cheaper than
    materializing channel vectors when only the norms matter.
    """
    u = uniforms(seed, streams, 0, n * r).reshape(-1, n, r)
    return -2.0 * np.sum(np.log(u), axis=2)


def zf_gains(H):
    """Post zero-forcing power gains for a batch of same-size slots.

    H has shape (B, r, j), columns are the active users.  The gain of
    stream i is the squared norm of its channel projected on the null
    space of the others, computed here as 1 / [(H^H H)^-1]_ii.
    """
    B, r, j = H.shape
    if j == 1:
        return np.sum(np.abs(H[:, :, 0]) ** 2, axis=1)[:, None]
    G = np.einsum("bri,brj->bij", H.conj(), H)
    Ginv = np.linalg.inv(G)
    d = np.einsum("bii->bi", Ginv).real
    return 1.0 / d


def mmse_sinrs(H):
    """Per-stream MMSE output SINRs for a batch of same-size slots.

    Uses the rank-one update identity SINR_i = 1/[(H^H H + I)^-1]_ii - 1,
    equal to h_i^H (H_-i H_-i^H + I)^-1 h_i.
    """
    B, r, j = H.shape
    G = np.einsum("bri,brj->bij", H.conj(), H)
    G[:, np.arange(j), np.arange(j)] += 1.0
    Ginv = np.linalg.inv(G)
    d = np.einsum("bii->bi", Ginv).real
    return np.maximum(1.0 / d - 1.0, 0.0)


def sic_chain(H, nstages):
    """Greedy strongest-projection selection chain per slot.

    At each stage the user with the largest squared channel norm projected
    on the null space of the previously selected users is picked.  Returns
    (orders, projected_norms) of shape (B, nstages).
    """
    B, K, r = H.shape
    res = np.einsum("bkr,bkr->bk", H.conj(), H).real
    Q = np.zeros((B, nstages, r), dtype=complex)
    orders = np.empty((B, nstages), dtype=np.int64)
    projn = np.empty((B, nstages), dtype=np.float64)
    taken = np.zeros((B, K), dtype=bool)
    rows = np.arange(B)
    for l in range(nstages):
        masked = np.where(taken, -np.inf, res)
        idx = np.argmax(masked, axis=1)
        orders[:, l] = idx
        projn[:, l] = np.maximum(masked[rows, idx], 0.0)
        taken[rows, idx] = True
        if l == nstages - 1:
            break
        v = H[rows, idx].copy()
        for _ in range(2):  # re-orthogonalize for stability
            if l > 0:
                coef = np.einsum("blr,br->bl", Q[:, :l].conj(), v)
                v -= np.einsum("bl,blr->br", coef, Q[:, :l])
        nv = np.sqrt(np.einsum("br,br->b", v.conj(), v).real)
        Q[:, l] = v / np.maximum(nv, 1e-300)[:, None]
        c = np.einsum("br,bkr->bk", Q[:, l].conj(), H)
        res = np.maximum(res - np.abs(c) ** 2, 0.0)
    return orders, projn

"""Random channel generation with reproducible counter-based streams.

Convention, relied on everywhere downstream: each complex entry has real
and imaginary parts that are independent unit-variance normals, so the
squared norm of an r-dimensional channel vector is exactly chi-square
with 2r degrees of freedom (Gamma(r, beta=2)).  All thresholds,
normalizing constants and closed-form bounds in this package assume that
scaling; do not change it in isolation.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mathcore import DomainError

_U64 = 2 ** 64


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by (seed, stream_id).

    The same pair always yields the same sample sequence, independent of
    thread count or which other streams were consumed: stream_id doubles
    as the slot index in the Monte Carlo engine.
    """
    seed: int
    stream_id: int

    def __post_init__(self):
        if not (0 <= self.seed < _U64 and 0 <= self.stream_id < _U64):
            raise DomainError("seed and stream_id must fit in 64 bits")

    def uniforms(self, word_start, n):
        return _kernels.uniforms(self.seed, [self.stream_id], word_start, n)[0]

    def normals(self, word_start, n):
        return _kernels.normals(self.seed, [self.stream_id], word_start, n)[0]


@dataclass(frozen=True)
class ChannelSet:
    """K channel vectors of dimension r, one per user (rows of ``vectors``)."""
    vectors: np.ndarray  # complex128, shape (K, r)

    @property
    def K(self):
        return self.vectors.shape[0]

    @property
    def r(self):
        return self.vectors.shape[1]

    def norms_sq(self):
        return np.einsum("kr,kr->k", self.vectors.conj(), self.vectors).real


def sample_channel_set(rng, K, r):
    """Draw K i.i.d. complex Gaussian channel vectors of dimension r.

    Bit-identical for identical (seed, stream_id) regardless of what else
    has been sampled.
    """
    if K < 1 or r < 1:
        raise DomainError("K and r must be positive")
    vecs = _kernels.channels(rng.seed, [rng.stream_id], K, r)[0]
    return ChannelSet(vectors=vecs)


def squared_angle(h, unit_row):
    """|<unit_row, h>|^2 / ||h||^2, the squared cosine between the two.

    For an isotropic h in C^r this is Beta(1, r-1) distributed, i.e. the
    minimum of r-1 independent uniforms.
    """
    h = np.asarray(h, dtype=complex).ravel()
    u = np.asarray(unit_row, dtype=complex).ravel()
    if h.size != u.size:
        raise DomainError("dimension mismatch")
    if abs(np.linalg.norm(u) - 1.0) > 1e-10:
        raise DomainError("unit_row must have unit norm")
    hn = np.real(np.vdot(h, h))
    if hn == 0.0:
        raise DomainError("h must be nonzero")
    return float(np.abs(np.vdot(u, h)) ** 2 / hn)

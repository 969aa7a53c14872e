"""Per-user achievable rates for ZF, MMSE and ZF-SIC decoding.

Rates are natural-log (nats per channel use) throughout; the CLI layer
converts to bits on request.  These are the reference, contract-level
implementations built on the orthogonalization primitives in
``mathcore``; the Monte Carlo engine uses algebraically equivalent
batched kernels that the tests cross-check against these.
"""

import numpy as np

from .mathcore import ContractError, norm_sq, nullspace_basis, hermitian_inverse, quad_form


def zf_rates(H, P):
    """Zero-forcing rates log(1 + P ||V_i h_i||^2) for the active columns.

    V_i is an orthonormal basis of the null space of the other j - 1
    columns, of dimension (r - j + 1) x r.

    Args:
        H: complex (r x j) matrix of active users' channels, j <= r.
        P: transmit power.

    Raises:
        ContractError: if j > r; more users than antennas is a collision
            and must be handled by the caller, not decoded.
    """
    H = np.asarray(H, dtype=complex)
    _check_active(H, P)
    r, j = H.shape
    rates = np.empty(j)
    for i in range(j):
        others = np.delete(H, i, axis=1)
        V = nullspace_basis(others, r=r)
        rates[i] = np.log1p(P * norm_sq(V @ H[:, i]))
    return rates


def mmse_rates(H, P):
    """MMSE rates log(1 + P h_i^H (H_-i H_-i^H + I)^-1 h_i)."""
    H = np.asarray(H, dtype=complex)
    _check_active(H, P)
    r, j = H.shape
    eye = np.eye(r)
    rates = np.empty(j)
    for i in range(j):
        others = np.delete(H, i, axis=1)
        R = hermitian_inverse(others @ others.conj().T + eye)
        rates[i] = np.log1p(P * quad_form(H[:, i], R))
    return rates


def zfsic_rates(selected, projections, P):
    """Successive-cancellation rates log(1 + P ||V^(l-1) h^(l)||^2).

    Args:
        selected: ordered channel vectors h^(1)..h^(L) as chosen by the
            scheduler (strongest projection first).
        projections: the scheduler's recorded projected squared norms,
            one per stage.
        P: transmit power.

    The projection chain is recomputed from scratch here and compared to
    ``projections``; an inconsistent chain raises ContractError rather
    than silently producing rates for a different selection.
    """
    selected = [np.asarray(h, dtype=complex).ravel() for h in selected]
    projections = np.asarray(projections, dtype=float)
    if P <= 0:
        raise ContractError("power must be positive")
    L = len(selected)
    if L == 0 or projections.shape != (L,):
        raise ContractError("one projected norm per selected vector required")
    r = selected[0].size
    if L > r:
        raise ContractError("cannot select more users than antennas")

    recomputed = np.empty(L)
    for l in range(L):
        if l == 0:
            recomputed[l] = norm_sq(selected[0])
        else:
            span = np.stack(selected[:l], axis=1)  # r x l
            V = nullspace_basis(span, r=r)
            recomputed[l] = norm_sq(V @ selected[l])
    scale = max(float(np.max(recomputed)), 1.0)
    if np.max(np.abs(recomputed - projections)) > 1e-8 * scale:
        raise ContractError("projection chain inconsistent with the selection")
    return np.log1p(P * projections)


def _check_active(H, P):
    if H.ndim != 2:
        raise ContractError("H must be a matrix")
    r, j = H.shape
    if j < 1:
        raise ContractError("at least one active user required")
    if j > r:
        raise ContractError(f"{j} active users exceed {r} antennas (collision)")
    if P <= 0:
        raise ContractError("power must be positive")

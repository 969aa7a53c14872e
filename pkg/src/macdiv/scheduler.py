"""The two distributed selection procedures.

Single-threshold access: every user compares its squared channel norm to
a common threshold and transmits iff above it.  No user exceeding leaves
the slot idle; more than r exceeding is a collision and the slot is lost.

Multi-threshold SIC access: r iterations, each selecting the user with
the strongest channel projection on the null space of those already
selected.  Contention inside an iteration is resolved ideally (the true
argmax wins); the physical splitting protocol is out of scope.
"""

from dataclasses import dataclass, field

import numpy as np

from . import receivers
from .mathcore import ContractError, inv_reg_gamma_q, nullspace_basis

IDLE = "idle"
COLLISION = "collision"
SERVED = "served"


@dataclass(frozen=True)
class SlotOutcome:
    kind: str                 # idle | collision | served
    j: int                    # number of users above threshold
    rates: np.ndarray | None  # per-user rates, present iff served
    sum_capacity: float       # 0 for idle and collision

    def __post_init__(self):
        if self.kind not in (IDLE, COLLISION, SERVED):
            raise ContractError(f"unknown outcome kind {self.kind!r}")


@dataclass(frozen=True)
class SicSelection:
    order: list               # selected user indices, strongest first
    projected_norms: list     # max projected squared norm per stage
    thresholds: list          # stage thresholds u^(l)
    exceeded_flags: list      # whether the stage max cleared its threshold
    vectors: list = field(default_factory=list)  # selected channel vectors


def channel_access(channels, policy, P, receiver="zf"):
    """One slot of the single-threshold algorithm.

    Args:
        channels: ChannelSet for this slot.
        policy: ThresholdPolicy (its r must match the channels).
        P: transmit power.
        receiver: 'zf' or 'mmse'.
    """
    if policy.r != channels.r:
        raise ContractError("policy antenna count does not match the channels")
    if receiver not in ("zf", "mmse"):
        raise ContractError(f"unknown receiver {receiver!r}")
    norms = channels.norms_sq()
    active = np.flatnonzero(norms > policy.u)
    j = int(active.size)
    r = channels.r
    if j == 0:
        return SlotOutcome(IDLE, 0, None, 0.0)
    if j > r:
        return SlotOutcome(COLLISION, j, None, 0.0)
    H = channels.vectors[active].T  # r x j, active users as columns
    if receiver == "zf":
        rates = receivers.zf_rates(H, P)
    else:
        rates = receivers.mmse_rates(H, P)
    return SlotOutcome(SERVED, j, rates, float(np.sum(rates)))


def sic_select(channels, r, exceed_target=1.0, paper_literal=False):
    """Iterative strongest-projection selection of exactly r users.

    Stage l records the threshold u^(l) = 2 Q^-1(r - l + 1, target/K) on
    the projected squared norm (``paper_literal`` drops the factor 2),
    picks the argmax of the projections among unselected users, and
    extends the cancelled subspace.

    Raises:
        ContractError: if K < r.
    """
    K = channels.K
    if K < r:
        raise ContractError(f"need at least r={r} users, got K={K}")
    if r != channels.r:
        raise ContractError("stage count must equal the antenna count")
    H = channels.vectors  # (K, r)
    quant_scale = 1.0 if paper_literal else 2.0

    order, projected, thresholds, flags, vectors = [], [], [], [], []
    selected_cols = None  # r x l matrix of chosen vectors
    for l in range(1, r + 1):
        u_l = quant_scale * inv_reg_gamma_q(r - l + 1, exceed_target / K)
        if selected_cols is None:
            proj = np.einsum("kr,kr->k", H.conj(), H).real
        else:
            V = nullspace_basis(selected_cols, r=r)
            PH = (V @ H.T).T  # (K, r-l+1) projections of every user
            proj = np.einsum("km,km->k", PH.conj(), PH).real
        proj = proj.copy()
        proj[order] = -np.inf
        idx = int(np.argmax(proj))
        order.append(idx)
        projected.append(float(proj[idx]))
        thresholds.append(float(u_l))
        flags.append(bool(proj[idx] > u_l))
        vectors.append(H[idx])
        selected_cols = np.stack(vectors, axis=1)
    return SicSelection(order, projected, thresholds, flags, vectors)


def sic_slot(channels, r, P, exceed_target=1.0, paper_literal=False):
    """One slot of the multi-threshold algorithm: always served, r streams."""
    sel = sic_select(channels, r, exceed_target, paper_literal)
    rates = receivers.zfsic_rates(sel.vectors, sel.projected_norms, P)
    return SlotOutcome(SERVED, r, rates, float(np.sum(rates)))

"""Distributed threshold scheduling for the MIMO multiple-access uplink.

Monte Carlo capacity estimation for threshold-based user selection with
ZF, MMSE and ZF-SIC receivers, extreme-value threshold design for
chi-square channel gains, and the matching closed-form capacity bounds.
"""

__version__ = "0.1.0"

from .mathcore import ContractError, DomainError, RankError  # noqa: F401

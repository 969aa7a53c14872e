"""Kernel backend selection.

The compiled extension is used when importable; otherwise the numpy
fallback takes over transparently.  ``MACDIV_BACKEND=c`` or ``=python``
forces a choice (``c`` raises if the extension is missing).  Both
backends implement the same stream and kernel semantics; the test suite
cross-checks them.
"""

import os

from . import _pykernels

_choice = os.environ.get("MACDIV_BACKEND", "auto").lower()

if _choice in ("auto", "c"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _choice == "c":
            raise ImportError(
                "MACDIV_BACKEND=c requested but the compiled kernels are not "
                "built; run `pip install -e . --no-build-isolation`"
            )
        _impl = _pykernels
elif _choice == "python":
    _impl = _pykernels
else:
    raise ValueError(f"unknown MACDIV_BACKEND {_choice!r} (use auto, c or python)")

BACKEND = _impl.BACKEND

raw_words = _impl.raw_words
uniforms = _impl.uniforms
normals = _impl.normals
channels = _impl.channels
chi2_batch = _impl.chi2_batch
zf_gains = _impl.zf_gains
mmse_sinrs = _impl.mmse_sinrs
sic_chain = _impl.sic_chain

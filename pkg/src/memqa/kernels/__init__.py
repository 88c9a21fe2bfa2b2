"""Sequence kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set
MEMQA_KERNELS=python (or =compiled) to force a backend.  Both expose
the same `lstm_forward` / `lstm_backward` contract — see `_numpy.py`.
"""

import os

from . import _numpy

_forced = os.environ.get("MEMQA_KERNELS", "").strip().lower()

if _forced == "python":
    _impl = _numpy
else:
    try:
        from . import _seqkern as _impl
    except ImportError:
        if _forced == "compiled":
            raise
        _impl = _numpy

BACKEND = _impl.NAME
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward


def available_backends():
    """Importable backend modules, keyed by name (for benchmarks/tests)."""
    backends = {_numpy.NAME: _numpy}
    try:
        from . import _seqkern
        backends[_seqkern.NAME] = _seqkern
    except ImportError:
        pass
    return backends

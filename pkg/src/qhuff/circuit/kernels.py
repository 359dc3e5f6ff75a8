"""Backend selection for the branch-matrix kernels.

The compiled extension is used when it imports; set ``QHUFF_PURE_PYTHON=1`` to
force the numpy fallback.
"""

import os

from . import _kernels_py

if os.environ.get("QHUFF_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
rotate_rows = _impl.rotate_rows
controlled_rotate = _impl.controlled_rotate
register_values = _impl.register_values
add_rows = _impl.add_rows
apply_gates = _impl.apply_gates

G_NOT, G_CNOT, G_SWAP, G_CSWAP, G_CCNOT = range(5)
GATE_NAMES = ("NOT", "CNOT", "SWAP", "CSWAP", "CCNOT")


def backends():
    """Both kernel modules that are importable, keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out

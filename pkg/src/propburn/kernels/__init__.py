"""Linear-algebra kernels with a compiled fast path.

The compiled extension is used when available; set PROPBURN_PURE_PYTHON=1
to force the NumPy reference implementation.
"""

import os

from . import blocktri_py

if os.environ.get("PROPBURN_PURE_PYTHON", "") not in ("", "0"):
    _impl = blocktri_py
else:
    try:
        from . import blocktri as _impl  # compiled extension
    except ImportError:
        _impl = blocktri_py

BACKEND = _impl.BACKEND
factor = _impl.factor
solve = _impl.solve
SingularBlockError = _impl.SingularBlockError

__all__ = ["BACKEND", "factor", "solve", "SingularBlockError", "blocktri_py"]

"""Backend selection for the recursion kernel.

The compiled extension is used when it imports; otherwise the numpy
version. ``CONSENSUS_DETECT_BACKEND=python`` forces the fallback.
"""

import os

from . import _kernel_py

BACKEND = "python"
run_batch = _kernel_py.run_batch

if os.environ.get("CONSENSUS_DETECT_BACKEND", "").lower() != "python":
    try:
        from . import _kernel
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "compiled"
        run_batch = _kernel.run_batch

__all__ = ["BACKEND", "run_batch"]

"""Pick the kernel implementation at import time.

The compiled module is used when present unless ``TREEQUENCH_PURE`` is set
to a non-empty value. Both expose the same functions and give bit-identical
results.
"""
import os

from . import _purekernels as pure

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and not os.environ.get("TREEQUENCH_PURE"):
    kernels = compiled
else:
    kernels = pure

BACKEND = kernels.BACKEND

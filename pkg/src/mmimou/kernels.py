"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable. Setting
``MMIMOU_PURE_PYTHON=1`` forces the numpy fallback.

``beam_gains`` is a batched matrix product; numpy hands it to BLAS, which
beats the compiled loop (see ``benchmarks/bench_kernels.py``), so it is
taken from the numpy module under either backend.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("MMIMOU_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

wrapped_displacement = _impl.wrapped_displacement
beam_gains = _pykernels.beam_gains

__all__ = ["BACKEND", "wrapped_displacement", "beam_gains"]

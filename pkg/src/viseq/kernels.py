"""Hot numerical kernels, compiled when available.

The Cython extension ``viseq._kernels`` is preferred; ``viseq._kernels_py``
is the fallback and produces bit-identical output. Set
``VISEQ_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("VISEQ_PURE_PYTHON"):
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

binomial_inverse = _impl.binomial_inverse
robbins_monro_table = _impl.robbins_monro_table
resample_means = _impl.resample_means

__all__ = ["BACKEND", "binomial_inverse", "robbins_monro_table", "resample_means"]

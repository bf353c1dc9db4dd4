"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation. Setting ``MAXLOAD_PURE_PYTHON=1`` forces the fallback.
"""
import os

if os.environ.get("MAXLOAD_PURE_PYTHON", "") not in ("", "0"):
    from maxload._pykernels import (  # noqa: F401
        BACKEND,
        binomial_table,
        max_load_partition,
        rectangular_probability,
    )
else:
    try:
        from maxload._ckernels import (  # noqa: F401
            BACKEND,
            binomial_table,
            max_load_partition,
            rectangular_probability,
        )
    except ImportError:
        from maxload._pykernels import (  # noqa: F401
            BACKEND,
            binomial_table,
            max_load_partition,
            rectangular_probability,
        )

"""Backend selection for the theta-series kernel.

The compiled core is used when it imports; ``DYNRMAT_BACKEND=python`` forces
the numpy fallback.
"""

import os

from . import _theta_py

BACKEND = "python"
lattice_theta = _theta_py.lattice_theta

if os.environ.get("DYNRMAT_BACKEND", "").lower() != "python":
    try:
        from . import _theta_core
    except ImportError:
        pass
    else:
        lattice_theta = _theta_core.lattice_theta
        BACKEND = "cython"

__all__ = ["BACKEND", "lattice_theta"]

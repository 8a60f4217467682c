"""Selects the stepping kernel: compiled extension if available, else Python.

Set MAPDR_PURE_PYTHON=1 to force the fallback (used by the benchmark and
the backend-equivalence tests). Both kernels are bit-identical; the choice
only affects speed.
"""

from __future__ import annotations

import os

if os.environ.get("MAPDR_PURE_PYTHON"):
    from . import stepcore_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _stepcore as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import stepcore_py as _impl

        BACKEND = "python"

step_particles = _impl.step_particles

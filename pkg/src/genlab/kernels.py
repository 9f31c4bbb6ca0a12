"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy versions.
Set ``GENLAB_PURE_PYTHON=1`` to force the numpy path.
"""

import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if os.environ.get("GENLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if backend is compiled_backend else "numpy"

altline_trials = backend.altline_trials
coprime_trials = backend.coprime_trials

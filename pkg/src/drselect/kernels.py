"""Selection of the top-k backend at import time.

The compiled extension is preferred when present; setting
``DRSELECT_PURE_PYTHON=1`` forces the numpy fallback (useful for the
equivalence tests and the benchmark). ``BACKEND`` reports which one won.
"""

import os

if os.environ.get("DRSELECT_PURE_PYTHON", "0") not in ("", "0"):
    from drselect import _topk_py as _impl

    BACKEND = "python"
else:
    try:
        from drselect import _topk as _impl  # compiled at install time, may be absent

        BACKEND = "compiled"
    except ImportError:
        from drselect import _topk_py as _impl

        BACKEND = "python"

topk_indices = _impl.topk_indices

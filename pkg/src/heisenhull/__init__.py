"""Envelopes and hulls in the first Heisenberg group."""

import os as _os

# the TBB layer shipped with some numba wheels warns on older runtimes
_os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

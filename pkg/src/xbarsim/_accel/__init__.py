"""Kernel backend selection.

The compiled Cython extension is used when it was built; otherwise the
pure-numpy reference implementation takes over. Both are bit-compatible.
Set XBARSIM_FORCE_PY=1 to force the fallback (useful for benchmarking).
"""

import os

from . import reference

if os.environ.get("XBARSIM_FORCE_PY"):
    _impl = reference
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = reference

BACKEND = _impl.NAME
program_pulses_batch = _impl.program_pulses_batch
rtn_states = _impl.rtn_states

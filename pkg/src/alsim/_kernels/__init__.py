"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension (Cython) is preferred; set ALSIM_PURE_PYTHON=1 to
force the fallback, e.g. for benchmarking or debugging. `BACKEND` names
the implementation that won.
"""

import os

if os.environ.get("ALSIM_PURE_PYTHON"):
    from . import fallback as _impl
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import fallback as _impl

BACKEND = _impl.BACKEND
kcenter_greedy = _impl.kcenter_greedy
kmeanspp_select = _impl.kmeanspp_select
match_token_patterns = _impl.match_token_patterns

__all__ = ["BACKEND", "kcenter_greedy", "kmeanspp_select", "match_token_patterns"]

"""Hot-kernel dispatch: compiled Cython core when available, numpy otherwise.

Set the environment variable ``IPROMP_PURE_KERNELS=1`` before import to force
the pure-numpy path (useful for debugging and benchmarking).
"""
import os

from . import pure

if os.environ.get("IPROMP_PURE_KERNELS"):
    _impl = pure
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
rbf_rows = _impl.rbf_rows
window_loglik_scan = _impl.window_loglik_scan

__all__ = ["BACKEND", "rbf_rows", "window_loglik_scan", "pure"]

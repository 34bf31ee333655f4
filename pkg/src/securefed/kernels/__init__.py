"""Kernel backend selection.

The compiled Cython extension is preferred when importable; the numpy
implementation is the fallback. Set SECUREFED_KERNELS=pure or =compiled to
force a backend (forcing `compiled` raises if the extension was not built).
Both backends implement the same two functions with identical semantics;
see `python -m securefed.benchmark` for a speed and agreement comparison.
"""

import os

from . import pure

_requested = os.environ.get("SECUREFED_KERNELS", "auto").lower()
if _requested not in ("auto", "compiled", "pure"):
    raise ValueError(f"SECUREFED_KERNELS must be auto, compiled or pure, got {_requested!r}")

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "SECUREFED_KERNELS=compiled but the extension is not built; "
                "reinstall the package or use SECUREFED_KERNELS=pure"
            )
if _impl is None:
    _impl = pure

backend_name: str = _impl.NAME
batch_forward = _impl.batch_forward
batch_loss_grad = _impl.batch_loss_grad


def available_backends() -> dict:
    """Importable backend modules keyed by name."""
    backends = {"pure": pure}
    try:
        from . import _ckernels
        backends["compiled"] = _ckernels
    except ImportError:
        pass
    return backends

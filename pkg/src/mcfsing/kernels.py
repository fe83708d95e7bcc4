"""Hot-kernel dispatch: compiled extension if available, numpy otherwise.

``BACKEND`` records which implementation is active.  ``available_backends``
always includes the pure-python kernels so benchmarks and parity tests can
compare the two.
"""

from . import _fallback

try:
    from . import _speedups
    _impl = _speedups
    BACKEND = "compiled"
except ImportError:  # extension not built
    _speedups = None
    _impl = _fallback
    BACKEND = "python"

STATUS_TIME = _fallback.STATUS_TIME
STATUS_PINCH = _fallback.STATUS_PINCH
STATUS_EXTINCT = _fallback.STATUS_EXTINCT
STATUS_MAXSTEPS = _fallback.STATUS_MAXSTEPS
STATUS_EMIT = _fallback.STATUS_EMIT

greedy_cover = _impl.greedy_cover
pairwise_bin_max = _impl.pairwise_bin_max
rotsym_step_block = _impl.rotsym_step_block


def available_backends():
    out = {"python": _fallback}
    if _speedups is not None:
        out["compiled"] = _speedups
    return out

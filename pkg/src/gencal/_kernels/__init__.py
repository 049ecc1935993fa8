"""Kernel selection: compiled extension if built, numpy fallback otherwise.

Set ``GENCAL_PURE_PYTHON=1`` in the environment to force the fallback
even when the extension is available (used by the benchmark and the
cross-kernel tests).
"""

import os

from gencal._kernels import fallback

try:
    from gencal._kernels import _core as compiled
except ImportError:
    compiled = None

if compiled is not None and os.environ.get("GENCAL_PURE_PYTHON", "") not in ("1", "true"):
    active = compiled
    USING_COMPILED = True
else:
    active = fallback
    USING_COMPILED = False

KERNEL_FLAVOR = "compiled" if USING_COMPILED else "fallback"

"""Classify-then-segment experiment framework for ultrasound nerve localization.

The heavy lifting lives in the compiled `_core` extension; this package
re-exports its public surface.
"""

from bpseg._core import *  # noqa: F401,F403
from bpseg import _core as _c

__version__ = "1.0.0"
__all__ = [name for name in dir(_c) if not name.startswith("_")]
del _c

"""Synthetic speech detector: speaker + prosody embeddings into a kernel SVM.

The heavy lifting lives in the native module; this package re-exports it.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]

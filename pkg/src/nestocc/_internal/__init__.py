"""Internal utilities for nestocc package.

This module provides invariant checks shared by the tree builder, the
allocators and the experiment runner. It is not part of the public API.
"""

from __future__ import annotations

from . import validation

__all__ = ["validation"]

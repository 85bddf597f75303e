"""Backend selection for the tree kernels.

The compiled extension is preferred when it imported cleanly; the pure-numpy
kernels are the fallback. ``SENTISCOPE_BACKEND=python|compiled`` forces the
choice (requesting the compiled backend when it is absent is an error rather
than a silent downgrade). Both backends grow bit-identical trees, so the
switch only affects speed.
"""

from __future__ import annotations

import os

from sentiscope.models import pykernels

try:
    from sentiscope.models import _ckernels
except ImportError:
    _ckernels = None


def _select():
    forced = os.environ.get("SENTISCOPE_BACKEND", "").strip().lower()
    if forced == "python":
        return "python", pykernels.grow_tree, pykernels.tree_apply
    if forced == "compiled":
        if _ckernels is None:
            raise ImportError(
                "SENTISCOPE_BACKEND=compiled but the sentiscope._ckernels "
                "extension is not built; reinstall with Cython and a C compiler"
            )
        return "compiled", _ckernels.grow_tree, _ckernels.tree_apply
    if forced:
        raise ValueError(f"SENTISCOPE_BACKEND must be 'python' or 'compiled', got {forced!r}")
    if _ckernels is not None:
        return "compiled", _ckernels.grow_tree, _ckernels.tree_apply
    return "python", pykernels.grow_tree, pykernels.tree_apply


_BACKEND_NAME, grow_tree, tree_apply = _select()


def active_backend() -> str:
    """Name of the kernel backend chosen at import: 'compiled' or 'python'."""
    return _BACKEND_NAME


def compiled_available() -> bool:
    return _ckernels is not None

"""Counter-based Gaussian noise keyed by (seed, stream, path, index).

Every standard normal is a pure function of its key, so path ``p`` comes out
the same whether it is generated alone, inside a chunk, or by another worker.
The Philox4x32-10 bijection runs in the compiled kernel when it is available
and in numpy otherwise; both backends return identical bits.

Set ``FWN_BACKEND=python`` to force the numpy fallback.
"""
from __future__ import annotations

import enum
import os

import numpy as np

from . import _philox_py

try:
    if os.environ.get("FWN_BACKEND", "").lower() == "python":
        raise ImportError("compiled backend disabled by FWN_BACKEND")
    from . import _philox as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


class Stream(enum.IntEnum):
    """Disjoint counter sub-spaces, one per consumer of randomness."""

    FGN = 0
    WHITE_NOISE = 1
    INDEPENDENT_B = 2
    INITIAL = 3
    AUX = 4


def _backend(name=None):
    name = name or BACKEND
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled Philox kernel is not built")
        return _compiled
    if name == "python":
        return _philox_py
    raise ValueError(f"unknown backend {name!r}")


def philox_block(ctr, key, backend=None):
    """Apply Philox4x32-10 to one 128-bit counter; returns four 32-bit words."""
    return _backend(backend).philox_block(tuple(ctr), tuple(key))


def uniforms(seed, stream, path_start, n_paths, count, backend=None):
    """Uniforms on [0, 1) with 53 random bits, shape ``(n_paths, count)``."""
    n_blocks = (count + 1) // 2
    u = _backend(backend).uniforms(int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream),
                                   int(path_start), int(n_paths), n_blocks)
    return u[:, :count]


def normals(seed, stream, path_start, n_paths, count, backend=None):
    """Standard normals, shape ``(n_paths, count)``.

    Entries ``2j`` and ``2j+1`` of a path come from one Box-Muller pair, which
    consumes the two uniforms of Philox block ``j``.
    """
    if n_paths == 0 or count == 0:
        return np.zeros((n_paths, count))
    n_pairs = (count + 1) // 2
    u = _backend(backend).uniforms(int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream),
                                   int(path_start), int(n_paths), n_pairs)
    # the Box-Muller transform stays in numpy so both backends share it
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0::2]))
    angle = (2.0 * np.pi) * u[:, 1::2]
    out = np.empty((n_paths, 2 * n_pairs))
    np.multiply(radius, np.cos(angle), out=out[:, 0::2])
    np.multiply(radius, np.sin(angle), out=out[:, 1::2])
    return out[:, :count]

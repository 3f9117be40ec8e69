"""Block-recurrence iteration kernels.

The staged solvers spend almost all their time stepping

    X_{n+1} = B_1 X_n + B_2 X_{n-1} + ... + B_m X_{n+1-m} + F

where the B_i are small complex blocks.  A compiled version lives in
``quadlag._kernels``; this module provides the pure-numpy fallback and picks
the implementation at import time.  Set QUADLAG_NO_EXT=1 to force the
fallback.
"""

import os

import numpy as np

_impl_c = None
if not os.environ.get("QUADLAG_NO_EXT"):
    try:
        from ._kernels import iterate_recurrence_c as _impl_c
    except ImportError:
        _impl_c = None

HAVE_EXT = _impl_c is not None


def active_kernel():
    """Name of the implementation that iterate_recurrence dispatches to."""
    return "compiled" if HAVE_EXT else "python"


def iterate_recurrence_py(Bs, seeds, forcing, steps):
    m, d, w = seeds.shape
    hist = [np.array(seeds[k]) for k in range(m)]
    out = np.empty((steps, d, w), dtype=complex)
    for n in range(steps):
        acc = forcing.copy()
        for i in range(m):
            # B_{i+1} pairs with the (i+1)-th newest state
            acc += Bs[i] @ hist[m - 1 - i]
        out[n] = acc
        hist.pop(0)
        hist.append(acc)
    return out


def iterate_recurrence(Bs, seeds, forcing, steps):
    """Run the affine block recurrence for `steps` steps.

    Bs: (m, d, d) blocks, B_1 first.  seeds: (m, d, w) prior states, oldest
    first.  forcing: (d, w) constant term.  Returns (steps, d, w) with the
    states after each step, oldest first.
    """
    Bs = np.ascontiguousarray(Bs, dtype=complex)
    seeds = np.ascontiguousarray(seeds, dtype=complex)
    forcing = np.ascontiguousarray(forcing, dtype=complex)
    if Bs.ndim != 3 or Bs.shape[1] != Bs.shape[2]:
        raise ValueError("Bs must be (m, d, d)")
    m, d, _ = Bs.shape
    if seeds.shape[0] != m or seeds.shape[1] != d:
        raise ValueError("seeds must be (m, d, w)")
    if forcing.shape != (d, seeds.shape[2]):
        raise ValueError("forcing must be (d, w)")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0:
        return np.empty((0, d, seeds.shape[2]), dtype=complex)
    if _impl_c is not None:
        return _impl_c(Bs, seeds, forcing, steps)
    return iterate_recurrence_py(Bs, seeds, forcing, steps)

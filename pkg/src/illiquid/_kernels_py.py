"""Pure-NumPy implementation of the solver's hot kernel.

The solver spends almost all of its time forming conditional expectations of
tabulated payoff slices over Gaussian increments of the log-odds state, for
every (time-lag, state) pair. On a uniform grid each Gauss-Hermite node
lands at a fixed fractional offset, so the whole expectation collapses to a
correlation of the tabulated slice with a short per-lag tap kernel. This
module provides that batched correlation in plain NumPy; a Cython twin lives
in ``_native.pyx`` and is preferred when available.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def correlate_batch(signal, kernels, starts, lengths, n_out):
    """Batched 'valid' correlations of one signal with many short kernels.

    out[d, i] = sum_l signal[starts[d] + i + l] * kernels[d, l]
    for l < lengths[d] and i < n_out.
    """
    signal = np.ascontiguousarray(signal, dtype=float)
    kernels = np.asarray(kernels, dtype=float)
    starts = np.asarray(starts, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    D = starts.size
    out = np.empty((D, n_out))
    for d in range(D):
        L = int(lengths[d])
        s = int(starts[d])
        seg = signal[s : s + n_out + L - 1]
        out[d] = np.correlate(seg, kernels[d, :L], mode="valid")
    return out

"""Pure numpy version of the compiled recursion kernel.

Vectorized over trials, sequential over edges, so every floating point
operation happens in the same order as in ``_kernel.pyx`` and the two
backends agree bit for bit.
"""

import numpy as np


def run_batch(ei, ej, online, llr, checkpoints):
    ei = np.asarray(ei, dtype=np.int64)
    ej = np.asarray(ej, dtype=np.int64)
    online = np.asarray(online, dtype=bool)
    llr = np.asarray(llr, dtype=np.float64)
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    n_trials, horizon, n = llr.shape
    out = np.zeros((n_trials, checkpoints.size, n))
    x = np.zeros((n_trials, n))
    rows = np.arange(n_trials)
    for k in range(horizon):
        ca = float(k) / float(k + 1)
        cb = 1.0 / float(k + 1)
        y = ca * x + cb * llr[:, k, :]
        on = online[:, k, :]
        deg = np.zeros((n_trials, n), dtype=np.int64)
        for e in range(ei.size):
            deg[:, ei[e]] += on[:, e]
            deg[:, ej[e]] += on[:, e]
        diag = np.ones((n_trials, n))
        w = 1.0 / (1.0 + np.maximum(deg[:, ei], deg[:, ej]).astype(float))
        for e in range(ei.size):
            m = rows[on[:, e]]
            diag[m, ei[e]] -= w[m, e]
            diag[m, ej[e]] -= w[m, e]
        x = diag * y
        for e in range(ei.size):
            m = rows[on[:, e]]
            x[m, ei[e]] += w[m, e] * y[m, ej[e]]
            x[m, ej[e]] += w[m, e] * y[m, ei[e]]
        hit = np.flatnonzero(checkpoints == k + 1)
        if hit.size:
            out[:, hit, :] = x[:, None, :]
    return out

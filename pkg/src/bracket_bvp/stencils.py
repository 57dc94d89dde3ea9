"""Finite-difference weights on arbitrary node sets (Fornberg recursion)."""

import numpy as np


def fd_weights(nodes, x0, order):
    """Weights w such that sum(w * f(nodes)) approximates d^order f / dx^order at x0.

    Exact for polynomials up to degree len(nodes) - 1; nodes need not be
    uniformly spaced or contain x0.
    """
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    if order >= n:
        raise ValueError(f"{n} nodes cannot resolve derivative order {order}")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative_tables(nodes, width=5):
    """First- and second-derivative values need per-node stencils; build them.

    Returns (W1, W2, idx) where row i holds the weights of a width-point
    stencil centred on node i (shifted inward near the ends) and idx[i] is
    the index of the first stencil node.
    """
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    if n < width:
        raise ValueError(f"grid of {n} nodes is too small for width-{width} stencils")
    half = width // 2
    w1 = np.zeros((n, width))
    w2 = np.zeros((n, width))
    idx = np.zeros(n, dtype=int)
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        idx[i] = lo
        window = x[lo:lo + width]
        w1[i] = fd_weights(window, x[i], 1)
        w2[i] = fd_weights(window, x[i], 2)
    return w1, w2, idx


def apply_table(values, weights, idx):
    """Apply per-node stencil weights produced by derivative_tables."""
    v = np.asarray(values, dtype=float)
    width = weights.shape[1]
    cols = idx[:, None] + np.arange(width)[None, :]
    return np.sum(weights * v[cols], axis=1)

"""Pure-Python/numpy implementations of the hot kernels.

These define the reference semantics; ``_core.pyx`` must agree with them
bit-for-bit on integer outputs and to round-off on complex ones.
"""

import numpy as np


def supermatrix(U, d, d_S, d_E):
    """Dynamical-map supermatrix from a full propagator.

    ``C[i1*d_S + i2, j1*d_S + j2] = sum d[a1, a2] <j1 g|U|i1 a1> conj(<j2 g|U|i2 a2>)``
    """
    U4 = np.asarray(U, dtype=complex).reshape(d_S, d_E, d_S, d_E)
    A = np.einsum("jgia,ab->jgib", U4, np.asarray(d, dtype=complex))
    C = np.einsum("jgib,kglb->iljk", A, U4.conj())
    return C.reshape(d_S * d_S, d_S * d_S)


def sample_chain(cum, uniforms, init, order):
    """Inverse-CDF sampling of an order-1 or order-2 chain.

    ``cum`` has one cumulative row per conditioning context (``S`` rows for
    order 1, ``S*S`` rows indexed ``x[n-2]*S + x[n-1]`` for order 2).
    ``init`` holds the first ``order`` states; ``uniforms`` drives the rest.
    """
    cum = np.asarray(cum, dtype=np.float64)
    S = cum.shape[1]
    n = len(init) + len(uniforms)
    seq = np.empty(n, dtype=np.int64)
    seq[:len(init)] = init
    for k, u in enumerate(uniforms):
        pos = k + len(init)
        if order == 1:
            row = seq[pos - 1]
        else:
            row = seq[pos - 2] * S + seq[pos - 1]
        c = cum[row]
        nxt = S - 1
        for s in range(S):
            if u < c[s]:
                nxt = s
                break
        seq[pos] = nxt
    return seq


def count_transitions(seq, S, order):
    """Counts of length-``order+1`` windows, shape ``(S,) * (order + 1)``."""
    seq = np.asarray(seq, dtype=np.int64)
    counts = np.zeros((S,) * (order + 1), dtype=np.int64)
    if len(seq) <= order:
        return counts
    idx = tuple(seq[k:len(seq) - order + k] for k in range(order + 1))
    np.add.at(counts, idx, 1)
    return counts

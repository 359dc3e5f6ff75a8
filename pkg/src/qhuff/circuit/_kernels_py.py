"""Pure-numpy branch-matrix kernels (fallback for the compiled module)."""

import numpy as np

G_NOT, G_CNOT, G_SWAP, G_CSWAP, G_CCNOT = range(5)

BACKEND = "python"


def rotate_rows(bits, span, shifts):
    w = len(span)
    if w == 0:
        return
    shifts = np.asarray(shifts) % w
    rows = np.nonzero(shifts)[0]
    if len(rows) == 0:
        return
    cols = span[(np.arange(w)[None, :] + shifts[rows, None]) % w]
    bits[rows[:, None], span[None, :]] = bits[rows[:, None], cols]


def controlled_rotate(bits, span, control, shift):
    w = len(span)
    if w == 0 or shift % w == 0:
        return
    rows = np.nonzero(bits[:, control])[0]
    if len(rows) == 0:
        return
    perm = span[(np.arange(w) + shift) % w]
    bits[rows[:, None], span[None, :]] = bits[rows[:, None], perm[None, :]]


def register_values(bits, span):
    w = len(span)
    if w == 0:
        return np.zeros(len(bits), dtype=np.int64)
    weights = (np.int64(1) << np.arange(w - 1, -1, -1, dtype=np.int64))
    return bits[:, span].astype(np.int64) @ weights


def add_rows(bits, src, dst, sign):
    wd = len(dst)
    if wd == 0:
        return
    b = register_values(bits, dst)
    a = register_values(bits, src)
    b = (b + sign * a) & ((np.int64(1) << wd) - 1)
    shifts = np.arange(wd - 1, -1, -1, dtype=np.int64)
    bits[:, dst] = ((b[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def apply_gates(bits, gates):
    for code, q0, q1, q2 in np.asarray(gates):
        if code == G_NOT:
            bits[:, q0] ^= 1
        elif code == G_CNOT:
            bits[:, q1] ^= bits[:, q0]
        elif code == G_SWAP:
            bits[:, [q0, q1]] = bits[:, [q1, q0]]
        elif code == G_CSWAP:
            m = bits[:, q0].astype(bool)
            a = bits[m, q1].copy()
            bits[m, q1] = bits[m, q2]
            bits[m, q2] = a
        elif code == G_CCNOT:
            bits[:, q2] ^= bits[:, q0] & bits[:, q1]
        else:
            raise ValueError(f"unknown gate code {code}")

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branch-matrix kernels. Semantics mirror ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

ctypedef cnp.uint8_t u8
ctypedef cnp.int64_t i64

DEF G_NOT = 0
DEF G_CNOT = 1
DEF G_SWAP = 2
DEF G_CSWAP = 3
DEF G_CCNOT = 4

BACKEND = "cython"


def rotate_rows(u8[:, ::1] bits, i64[::1] span, i64[::1] shifts):
    cdef Py_ssize_t rows = bits.shape[0]
    cdef Py_ssize_t w = span.shape[0]
    cdef Py_ssize_t r, p, s
    if w == 0:
        return
    cdef u8[::1] tmp = np.empty(w, dtype=np.uint8)
    for r in range(rows):
        s = shifts[r] % w
        if s < 0:
            s += w
        if s == 0:
            continue
        for p in range(w):
            tmp[p] = bits[r, span[(p + s) % w]]
        for p in range(w):
            bits[r, span[p]] = tmp[p]


def controlled_rotate(u8[:, ::1] bits, i64[::1] span, Py_ssize_t control, i64 shift):
    cdef Py_ssize_t rows = bits.shape[0]
    cdef Py_ssize_t w = span.shape[0]
    cdef Py_ssize_t r, p, s
    if w == 0:
        return
    s = shift % w
    if s < 0:
        s += w
    if s == 0:
        return
    cdef u8[::1] tmp = np.empty(w, dtype=np.uint8)
    for r in range(rows):
        if bits[r, control] == 0:
            continue
        for p in range(w):
            tmp[p] = bits[r, span[(p + s) % w]]
        for p in range(w):
            bits[r, span[p]] = tmp[p]


def register_values(u8[:, ::1] bits, i64[::1] span):
    cdef Py_ssize_t rows = bits.shape[0]
    cdef Py_ssize_t w = span.shape[0]
    cdef Py_ssize_t r, p
    cdef i64 v
    out = np.empty(rows, dtype=np.int64)
    cdef i64[::1] o = out
    for r in range(rows):
        v = 0
        for p in range(w):
            v = (v << 1) | bits[r, span[p]]
        o[r] = v
    return out


def add_rows(u8[:, ::1] bits, i64[::1] src, i64[::1] dst, i64 sign):
    cdef Py_ssize_t rows = bits.shape[0]
    cdef Py_ssize_t ws = src.shape[0]
    cdef Py_ssize_t wd = dst.shape[0]
    cdef Py_ssize_t r, p
    cdef i64 a, b, mask = (<i64>1 << wd) - 1
    for r in range(rows):
        a = 0
        for p in range(ws):
            a = (a << 1) | bits[r, src[p]]
        b = 0
        for p in range(wd):
            b = (b << 1) | bits[r, dst[p]]
        b = (b + sign * a) & mask
        for p in range(wd - 1, -1, -1):
            bits[r, dst[p]] = b & 1
            b >>= 1


def apply_gates(u8[:, ::1] bits, i64[:, ::1] gates):
    cdef Py_ssize_t rows = bits.shape[0]
    cdef Py_ssize_t g, r
    cdef i64 code, q0, q1, q2
    cdef u8 t
    for g in range(gates.shape[0]):
        code = gates[g, 0]
        q0 = gates[g, 1]
        q1 = gates[g, 2]
        q2 = gates[g, 3]
        if code == G_NOT:
            for r in range(rows):
                bits[r, q0] ^= 1
        elif code == G_CNOT:
            for r in range(rows):
                bits[r, q1] ^= bits[r, q0]
        elif code == G_SWAP:
            for r in range(rows):
                t = bits[r, q0]
                bits[r, q0] = bits[r, q1]
                bits[r, q1] = t
        elif code == G_CSWAP:
            for r in range(rows):
                if bits[r, q0]:
                    t = bits[r, q1]
                    bits[r, q1] = bits[r, q2]
                    bits[r, q2] = t
        elif code == G_CCNOT:
            for r in range(rows):
                bits[r, q2] ^= bits[r, q0] & bits[r, q1]
        else:
            raise ValueError(f"unknown gate code {code}")

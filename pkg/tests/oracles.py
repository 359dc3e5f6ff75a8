"""Independent reference computations used by the tests.

Nothing here goes through the circuit simulator: the encoder is the
classical map (codeword sequence) -> (length registers, concatenated tape),
and the truncation channels are composed as dense matrices on the span of
the configurations that actually occur.
"""

from __future__ import annotations

import itertools

import numpy as np


def encode_config(codewords, syms, tape_width):
    """Classical image of a symbol tuple: (lengths, tape string)."""
    tape = "".join(codewords[s] for s in syms)
    return tuple(len(codewords[s]) for s in syms), tape.ljust(tape_width, "0")


def block_fidelity(model, seq, truncate_len, channel="typical"):
    """Fidelity of one input sequence after encode, truncate and decode.

    ``channel="typical"`` projects onto configurations whose tape content fits
    in ``truncate_len`` (anything else is a failed decode); ``"discard"`` traces
    out the tape qubits beyond ``truncate_len`` and re-embeds them as zeros.
    """
    code = model.code
    n = code.n
    width = len(seq) * code.l_max
    syms_all = list(itertools.product(range(n), repeat=len(seq)))
    psi = np.array([np.prod([model.coeffs[j, s] for j, s in zip(seq, syms)]) for syms in syms_all])
    configs = [encode_config(code.codewords, syms, width) for syms in syms_all]

    if channel == "typical":
        keep = np.array([sum(c[0]) <= truncate_len for c in configs], dtype=float)
        out = keep * psi
        return float(abs(np.vdot(psi, out)) ** 2)

    kept_keys = sorted({(c[0], c[1][:truncate_len]) for c in configs})
    drop_keys = sorted({c[1][truncate_len:] for c in configs})
    ki = {k: i for i, k in enumerate(kept_keys)}
    di = {k: i for i, k in enumerate(drop_keys)}
    # joint amplitude matrix M[kept, dropped]; reduced state rho = M M^dagger
    mat = np.zeros((len(kept_keys), len(drop_keys)), dtype=complex)
    for amp, c in zip(psi, configs):
        mat[ki[(c[0], c[1][:truncate_len])], di[c[1][truncate_len:]]] += amp
    rho = mat @ mat.conj().T
    # decoder: kept configuration padded with zeros -> symbol tuple, if it is a valid image
    image = {c: i for i, c in enumerate(configs)}
    dec = np.zeros((len(syms_all), len(kept_keys)))
    for key, col in ki.items():
        padded = (key[0], key[1].ljust(width, "0"))
        if padded in image:
            dec[image[padded], col] = 1.0
    out = dec @ rho @ dec.T
    return float(np.real(np.vdot(psi, out @ psi)))


def average_block_fidelity(model, n_signals, truncate_len, channel="typical"):
    q = np.asarray(model.ensemble.probs)
    total = 0.0
    for seq in itertools.product(range(len(q)), repeat=n_signals):
        w = float(np.prod(q[list(seq)]))
        if w > 0:
            total += w * block_fidelity(model, seq, truncate_len, channel)
    return total


def tail_by_enumeration(lengths, probs, n_signals, truncate_len):
    tot = 0.0
    for combo in itertools.product(range(len(lengths)), repeat=n_signals):
        if sum(lengths[i] for i in combo) > truncate_len:
            tot += float(np.prod([probs[i] for i in combo]))
    return tot


def partial_trace_fidelity(amps, bits, drop):
    """Dense fidelity of a small pure state against itself after tracing out ``drop`` qubits."""
    n = len(bits[0])
    dim = 1 << n
    psi = np.zeros(dim, dtype=complex)
    for a, b in zip(amps, bits):
        psi[int(b, 2)] += a
    t = psi.reshape([2] * n)
    keep = [i for i in range(n) if i not in drop]
    t = np.transpose(t, keep + list(drop)).reshape(1 << len(keep), -1)
    rho = t @ t.conj().T
    # re-embed with the dropped qubits in |0>
    full = np.zeros((dim, dim), dtype=complex)
    idx = []
    for k in range(1 << len(keep)):
        kb = format(k, f"0{len(keep)}b")
        bitsl = ["0"] * n
        for pos, c in zip(keep, kb):
            bitsl[pos] = c
        idx.append(int("".join(bitsl), 2))
    full[np.ix_(idx, idx)] = rho
    return float(np.real(np.vdot(psi, full @ psi)))

"""Reduced states and fidelities computed from branch matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import GateNetwork, run
from .state import SparseState, group_ids, row_keys


@dataclass
class ReducedState:
    """A mixed state on the kept qubits, as a set of unnormalised pure components.

    Rows sharing a ``group`` label (within one batch) form one component
    |psi_d>; discarded qubits have been replaced by zeros.
    """

    state: SparseState
    group: np.ndarray
    kept: tuple[int, ...]

    def is_pure(self) -> bool:
        for b in np.unique(self.state.batch):
            if len(np.unique(self.group[self.state.batch == b])) > 1:
                return False
        return True


def reduce_to_kept(state: SparseState, kept) -> ReducedState:
    kept = tuple(sorted(int(q) for q in kept))
    discard = np.setdiff1d(np.arange(state.n_qubits), kept)
    gid, _ = group_ids(state.bits[:, discard], state.batch)
    out = state.copy()
    out.bits[:, discard] = 0
    return ReducedState(out, gid, kept)


def _lookup(keys: np.ndarray, table_keys: np.ndarray, table_vals: np.ndarray) -> np.ndarray:
    order = np.argsort(table_keys)
    sk = table_keys[order]
    pos = np.searchsorted(sk, keys)
    pos = np.clip(pos, 0, max(len(sk) - 1, 0))
    hit = sk[pos] == keys if len(sk) else np.zeros(len(keys), bool)
    out = np.zeros(len(keys), dtype=complex)
    out[hit] = table_vals[order][pos[hit]]
    return out


def fidelity_against(reduced: ReducedState, reference: SparseState,
                     decode: GateNetwork | None = None) -> np.ndarray:
    """Per-batch fidelity sum_d |<ref| decode |psi_d, 0>|^2."""
    st = reduced.state if decode is None else run(decode, reduced.state)
    ref_amp = _lookup(row_keys(st.bits, st.batch), row_keys(reference.bits, reference.batch),
                      reference.amps)
    contrib = np.conj(ref_amp) * st.amps
    gid, ng = group_ids(np.zeros((st.n_rows, 0), np.uint8), st.batch, reduced.group)
    ov = np.zeros(ng, dtype=complex)
    np.add.at(ov, gid, contrib)
    gb = np.zeros(ng, dtype=np.int64)
    gb[gid] = st.batch
    return np.bincount(gb, weights=np.abs(ov) ** 2, minlength=reference.n_batches)


def symbol_table(code) -> np.ndarray:
    """table[length, left-aligned content] -> symbol index, -1 for non-codewords."""
    lw, cw = code.len_reg_width, code.l_max
    table = -np.ones((1 << lw, 1 << cw), dtype=np.int64)
    for i, h in enumerate(code.codewords):
        table[len(h), int(h.ljust(cw, "0"), 2)] = i
    return table


def read_bits(bits: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Integer value of ``cols`` (MSB first); ``cols`` is 1-D or per-row 2-D."""
    cols = np.asarray(cols, dtype=np.int64)
    if cols.ndim == 1:
        sub = bits[:, cols]
    else:
        sub = np.take_along_axis(bits, cols, axis=1)
    w = sub.shape[1]
    weights = np.int64(1) << np.arange(w - 1, -1, -1, dtype=np.int64)
    return sub.astype(np.int64) @ weights


def extract_symbols(bits: np.ndarray, signals, table: np.ndarray) -> np.ndarray:
    """Symbol index of each signal on each row; ``signals`` holds (content cols, length cols)."""
    out = np.empty((bits.shape[0], len(signals)), dtype=np.int64)
    for k, (content, length) in enumerate(signals):
        lv = read_bits(bits, length)
        cv = read_bits(bits, content)
        valid = lv < table.shape[0]
        sym = -np.ones(bits.shape[0], dtype=np.int64)
        sym[valid] = table[lv[valid], cv[valid]]
        out[:, k] = sym
    return out


def signals_fidelity(state: SparseState, signals, table: np.ndarray, ref: np.ndarray,
                     group: np.ndarray | None = None, rest_bits: np.ndarray | None = None) -> np.ndarray:
    """Per-batch fidelity of the reduced state of ``signals`` against a product reference.

    ``ref[b, k, i]`` is the amplitude of the batch-b input for signal k on symbol i.
    Everything outside the signal registers (``rest_bits``, by default the
    rows with the signal columns zeroed) is traced out.
    """
    n_batches = ref.shape[0]
    if state.n_rows == 0:
        return np.zeros(n_batches)
    syms = extract_symbols(state.bits, signals, table)
    ok = (syms >= 0).all(axis=1)
    if rest_bits is None:
        rest_bits = state.bits.copy()
        for content, length in signals:
            for cols in (content, length):
                cols = np.asarray(cols, dtype=np.int64)
                if cols.ndim == 1:
                    rest_bits[:, cols] = 0
                else:
                    np.put_along_axis(rest_bits, cols, 0, axis=1)
    grp = np.zeros(state.n_rows, np.int64) if group is None else group
    batch = state.batch[ok]
    coef = np.ones(int(ok.sum()), dtype=complex)
    for k in range(len(signals)):
        coef *= ref[batch, k, syms[ok, k]]
    contrib = np.conj(coef) * state.amps[ok]
    gid, ng = group_ids(rest_bits[ok], batch, grp[ok])
    ov = np.zeros(ng, dtype=complex)
    np.add.at(ov, gid, contrib)
    gb = np.zeros(ng, dtype=np.int64)
    gb[gid] = batch
    return np.bincount(gb, weights=np.abs(ov) ** 2, minlength=n_batches)

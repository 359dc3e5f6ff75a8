"""Loading source signals into codeword and length registers."""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

from ..qmath import SUPPORT_TOL, SourceModel
from .layout import RegisterLayout
from .state import SparseState

DEFAULT_MAX_BRANCHES = 10**6


class ResourceError(RuntimeError):
    """Raised when a simulation would exceed the branch budget."""


def max_branches() -> int:
    raw = os.environ.get("QHUFF_MAX_BRANCHES")
    if raw is None:
        return DEFAULT_MAX_BRANCHES
    try:
        return int(float(raw))
    except ValueError:
        raise ResourceError(f"QHUFF_MAX_BRANCHES={raw!r} is not a number") from None


def _supports(model: SourceModel) -> list[np.ndarray]:
    return [np.flatnonzero(np.abs(c) ** 2 > SUPPORT_TOL) for c in model.coeffs]


def codeword_bits(model: SourceModel) -> tuple[np.ndarray, np.ndarray]:
    """Left-aligned codeword bits (n, l_max) and length-register bits (n, w_l)."""
    code = model.code
    cw = np.zeros((code.n, code.l_max), dtype=np.uint8)
    lw = np.zeros((code.n, code.len_reg_width), dtype=np.uint8)
    for i, h in enumerate(code.codewords):
        cw[i, :len(h)] = [int(c) for c in h]
        lw[i] = [int(c) for c in format(len(h), f"0{code.len_reg_width}b")]
    return cw, lw


@dataclass
class InputBatch:
    """A set of input sequences (one per batch label) and their weights."""

    sequences: np.ndarray  # (n_batches, N) signal indices
    weights: np.ndarray  # (n_batches,)

    @property
    def n_batches(self) -> int:
        return len(self.weights)

    def reference(self, model: SourceModel) -> np.ndarray:
        """``ref[b, k, i]``: amplitude of signal k of batch b on codeword i."""
        return model.coeffs[self.sequences]


def exact_inputs(model: SourceModel, n_signals: int) -> InputBatch:
    """Every input sequence of positive probability, weighted by the product of emission probabilities."""
    q = np.asarray(model.ensemble.probs)
    live = np.flatnonzero(q > 0)
    seqs = np.array(list(itertools.product(live, repeat=n_signals)), dtype=np.int64)
    seqs = seqs.reshape(-1, n_signals)
    return InputBatch(seqs, np.prod(q[seqs], axis=1))


def sampled_inputs(model: SourceModel, n_signals: int, trials: int, seed: int | None) -> InputBatch:
    rng = np.random.default_rng(seed)
    q = np.asarray(model.ensemble.probs)
    seqs = rng.choice(len(q), size=(trials, n_signals), p=q / q.sum())
    return InputBatch(seqs.astype(np.int64), np.full(trials, 1.0 / trials))


def branch_count(model: SourceModel, batch: InputBatch) -> int:
    sizes = np.array([len(s) for s in _supports(model)], dtype=np.int64)
    return int(np.prod(sizes[batch.sequences], axis=1).sum())


def exact_branch_count(model: SourceModel, n_signals: int) -> int:
    """Rows needed for exact mode, computed without enumerating."""
    q = np.asarray(model.ensemble.probs)
    sizes = [len(s) for j, s in enumerate(_supports(model)) if q[j] > 0]
    return sum(sizes) ** n_signals


def check_budget(rows: int, limit: int | None = None) -> None:
    limit = max_branches() if limit is None else limit
    if rows > limit:
        raise ResourceError(
            f"simulation needs {rows} branches, above the limit of {limit}; "
            "use fewer signals, sampled mode with fewer trials, or raise QHUFF_MAX_BRANCHES")


def prepare_batch(model: SourceModel, batch: InputBatch, layout: RegisterLayout,
                  limit: int | None = None) -> SparseState:
    """Product states of all sequences in ``batch``, stacked with batch labels."""
    n_sig = batch.sequences.shape[1]
    if n_sig != layout.n_signals:
        raise ValueError(f"sequences have {n_sig} signals, layout expects {layout.n_signals}")
    n_src = len(model.ensemble)
    if batch.sequences.size and (batch.sequences.min() < 0 or batch.sequences.max() >= n_src):
        raise IndexError(f"signal index out of range 0..{n_src - 1}")
    check_budget(branch_count(model, batch), limit)

    supports = _supports(model)
    width = max(len(s) for s in supports)
    supp = -np.ones((n_src, width), dtype=np.int64)
    for j, s in enumerate(supports):
        supp[j, :len(s)] = s
    sizes = np.array([len(s) for s in supports], dtype=np.int64)

    row_batch = np.arange(batch.n_batches, dtype=np.int64)
    syms = np.zeros((batch.n_batches, 0), dtype=np.int64)
    for k in range(n_sig):
        sig = batch.sequences[row_batch, k]
        counts = sizes[sig]
        rep = np.repeat(np.arange(len(row_batch)), counts)
        starts = np.cumsum(counts) - counts
        offset = np.arange(len(rep)) - np.repeat(starts, counts)
        row_batch = row_batch[rep]
        syms = np.column_stack([syms[rep], supp[sig[rep], offset]])

    cw, lw = codeword_bits(model)
    bits = np.zeros((len(row_batch), layout.n_qubits), dtype=np.uint8)
    amps = np.ones(len(row_batch), dtype=complex)
    for k in range(n_sig):
        bits[:, list(layout.codeword(k))] = cw[syms[:, k]]
        bits[:, list(layout.length(k))] = lw[syms[:, k]]
        amps *= model.coeffs[batch.sequences[row_batch, k], syms[:, k]]
    return SparseState(bits, amps, row_batch)


def prepare_block(model: SourceModel, inputs, layout: RegisterLayout) -> SparseState:
    """State of a single input sequence."""
    seq = np.asarray([inputs], dtype=np.int64).reshape(1, -1)
    if seq.shape[1] != layout.n_signals:
        raise ValueError(f"expected {layout.n_signals} inputs, got {seq.shape[1]}")
    return prepare_batch(model, InputBatch(seq, np.ones(1)), layout)

"""Block storage codec: merge tree encoder, truncation and reverse decoding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit.layout import RegisterLayout, is_power_of_two, make_layout
from .circuit.network import (DepthReport, GateNetwork, MacroOp, add_into, rotate_by_register,
                              rotate_register, run, swap_spans)
from .circuit.prepare import (InputBatch, check_budget, exact_branch_count, exact_inputs,
                              prepare_batch, sampled_inputs)
from .circuit.reduce import ReducedState, reduce_to_kept, signals_fidelity, symbol_table
from .circuit.state import SparseState, group_ids
from .huffman import HuffmanCode
from .qmath import Ensemble, SourceModel, source_model

CEIL_SLACK = 1e-9


class StorageError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    """A tape region whose content is left-aligned, with the register holding its length.

    The content length is ``sign * value(length) + offset``.
    """

    span: tuple
    length: tuple
    sign: int = 1
    offset: int = 0


def merge_pair(left: Message, right: Message, parent=None, require_adjacent: bool = True) -> list[MacroOp]:
    """Ops that concatenate ``left`` and ``right`` content at the start of ``left.span + right.span``.

    Both length registers are left untouched; when ``parent`` is given the two
    lengths are added into it afterwards.
    """
    if require_adjacent and left.span and right.span and left.span[-1] + 1 != right.span[0]:
        raise StorageError("merge needs adjacent tape segments")
    combined = tuple(left.span) + tuple(right.span)
    ops = rotate_by_register(left.span, left.length, 1, left.sign, left.offset)
    ops.append(rotate_register(combined, len(left.span)))
    ops += rotate_by_register(combined, left.length, -1, left.sign, left.offset)
    if parent is not None:
        if left.sign != 1 or left.offset or right.sign != 1 or right.offset:
            raise StorageError("parent sums need plain length registers")
        ops.append(add_into(left.length, parent))
        ops.append(add_into(right.length, parent))
    return ops


def build_parallel_encoder(layout: RegisterLayout, code: HuffmanCode | None = None) -> GateNetwork:
    """Load every codeword into its tape segment, then merge pairs round by round."""
    n = layout.n_signals
    if not is_power_of_two(n):
        raise StorageError(f"parallel encoder needs a power-of-two signal count, got {n}")
    lmax = layout.code_width
    net = GateNetwork(layout.n_qubits)
    net.parallel([swap_spans(layout.codeword(k), layout.segment(k)) for k in range(n)], "load codewords")
    lens = [layout.length(k) for k in range(n)]
    rounds = n.bit_length() - 1
    history = []
    for j in range(1, rounds + 1):
        size = (1 << (j - 1)) * lmax
        parents, streams = [], []
        for p in range(n >> j):
            parent = layout.total_length if j == rounds else layout[f"partial_{j}_{p}"]
            left = Message(layout.tape[2 * p * size:(2 * p + 1) * size], lens[2 * p])
            right = Message(layout.tape[(2 * p + 1) * size:(2 * p + 2) * size], lens[2 * p + 1])
            streams.append(merge_pair(left, right, parent))
            parents.append(parent)
        net.zip_parallel(streams, f"merge round {j}")
        history.append((lens, parents))
        lens = parents
    for children, parents in reversed(history):
        net.parallel([add_into(children[2 * p + 1], par, -1) for p, par in enumerate(parents)],
                      "uncompute sums")
        net.parallel([add_into(children[2 * p], par, -1) for p, par in enumerate(parents)])
    return net


def append_signal_ops(layout: RegisterLayout, k: int, sent: int = 0) -> list[MacroOp]:
    """Append signal ``k`` behind the content already on the tape.

    The running total in ``total_length`` (covering signals before ``k``) marks
    where the content ends; only tape positions from ``sent`` onward are touched.
    """
    lmax = layout.code_width
    seg = layout.segment(k)
    ops = [swap_spans(layout.codeword(k), seg)]
    if k * lmax > sent:
        local = Message(layout.tape[sent:k * lmax], layout.total_length, 1, -sent)
        ops += merge_pair(local, Message(seg, layout.length(k)))
    ops.append(add_into(layout.length(k), layout.total_length))
    return ops


def build_sequential_encoder(layout: RegisterLayout, code: HuffmanCode | None = None) -> GateNetwork:
    """Append signals one at a time, then clear the running total."""
    net = GateNetwork(layout.n_qubits)
    for k in range(layout.n_signals):
        net.extend([[op] for op in append_signal_ops(layout, k)], f"append signal {k}")
    for k in reversed(range(layout.n_signals)):
        net.append(add_into(layout.length(k), layout.total_length, -1), "uncompute total" if k == layout.n_signals - 1 else "")
    return net


@dataclass(frozen=True)
class StorageParams:
    n_signals: int
    delta: float
    truncate_len: int


def default_delta(code: HuffmanCode, n_signals: int) -> float:
    """Three standard deviations of the mean codeword length over ``n_signals`` draws.

    Capped at ``l_max - avg_len``, where the block already keeps the whole tape.
    """
    spread = 3.0 * math.sqrt(max(code.length_variance(), 0.0) / n_signals)
    return min(spread, max(code.l_max - float(code.avg_len), 0.0))


def storage_params(code: HuffmanCode, n_signals: int, delta: float | None = None) -> StorageParams:
    if n_signals < 1:
        raise StorageError("need at least one signal")
    if delta is None:
        delta = default_delta(code, n_signals)
    if delta < 0:
        raise StorageError(f"delta must be non-negative, got {delta}")
    t = max(math.ceil(n_signals * (code.avg_len + delta) - CEIL_SLACK), 0)
    if t > n_signals * code.l_max:
        raise StorageError(
            f"delta {delta} needs {t} tape qubits but the tape has {n_signals * code.l_max}; "
            f"delta = l_max - avg_len = {code.l_max - float(code.avg_len):.6g} already keeps everything")
    return StorageParams(n_signals, float(delta), int(t))


def typical_tail_weight(code: HuffmanCode, n_signals: int, truncate_len: int) -> float:
    """Probability that the total codeword length of ``n_signals`` draws exceeds ``truncate_len``."""
    dist = np.zeros(1)
    dist[0] = 1.0
    for _ in range(n_signals):
        nxt = np.zeros(len(dist) + code.l_max)
        for p, l in zip(code.probs, code.lengths):
            nxt[l:l + len(dist)] += float(p) * dist
        dist = nxt
    return float(dist[truncate_len + 1:].sum()) if truncate_len + 1 < len(dist) else 0.0


@dataclass
class CodecReport:
    qubits_stored: int
    fidelity: float
    entropy_baseline: float
    depth: DepthReport
    fidelity_gap: float
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"qubits_stored": self.qubits_stored, "fidelity": self.fidelity,
               "entropy_baseline": self.entropy_baseline, "depth": self.depth.as_dict(),
               "fidelity_gap": self.fidelity_gap}
        out.update(self.extras)
        return out


@dataclass
class StoredBlock:
    """Truncated encoder output.

    ``typical`` holds the branches whose content fits in the kept tape
    prefix (the rest are the failure outcome of the typical-subspace
    projection); ``discarded`` is the plain partial trace over the dropped
    tape qubits.
    """

    params: StorageParams
    layout: RegisterLayout
    typical: SparseState
    discarded: ReducedState
    tail: np.ndarray  # per-batch weight outside the typical subspace


def signal_registers(layout: RegisterLayout, ks=None) -> list[tuple]:
    ks = range(layout.n_signals) if ks is None else ks
    return [(np.asarray(layout.codeword(k)), np.asarray(layout.length(k))) for k in ks]


def total_lengths(state: SparseState, layout: RegisterLayout) -> np.ndarray:
    tot = np.zeros(state.n_rows, dtype=np.int64)
    for k in range(layout.n_signals):
        tot += state.values(layout.length(k))
    return tot


def truncate(state: SparseState, layout: RegisterLayout, params: StorageParams) -> StoredBlock:
    t = params.truncate_len
    fits = total_lengths(state, layout) <= t
    typical = state.select(fits)
    dropped = set(layout.tape[t:])
    kept = [q for q in range(layout.n_qubits) if q not in dropped]
    nb = state.n_batches
    tail = np.bincount(state.batch[~fits], weights=np.abs(state.amps[~fits]) ** 2, minlength=nb)
    return StoredBlock(params, layout, typical, reduce_to_kept(state, kept), tail)


@dataclass
class DecodedBlock:
    """Decoder output for both truncation channels."""

    model: SourceModel
    layout: RegisterLayout
    typical: SparseState
    discarded: ReducedState

    def fidelities(self, inputs: InputBatch, ks=None, channel: str = "typical") -> np.ndarray:
        """Per-batch fidelity of signals ``ks`` (default all, jointly)."""
        table = symbol_table(self.model.code)
        regs = signal_registers(self.layout, ks)
        ref = inputs.reference(self.model)
        if ks is not None:
            ref = ref[:, list(ks), :]
        if channel == "typical":
            return signals_fidelity(self.typical, regs, table, ref)
        if channel == "discard":
            return signals_fidelity(self.discarded.state, regs, table, ref, group=self.discarded.group)
        raise ValueError(f"unknown channel {channel!r}")

    def signal_density(self, k: int, batch: int = 0, channel: str = "typical") -> np.ndarray:
        """Output density matrix of signal ``k`` in the computational basis.

        Branches whose registers do not hold a valid codeword are a failure
        outcome and contribute nothing, so the trace can be below one.
        """
        if channel == "typical":
            st, grp = self.typical, np.zeros(self.typical.n_rows, np.int64)
        else:
            st, grp = self.discarded.state, self.discarded.group
        sel = st.batch == batch
        st, grp = st.select(sel), grp[sel]
        table = symbol_table(self.model.code)
        from .circuit.reduce import extract_symbols
        (content, length), = signal_registers(self.layout, [k])
        sym = extract_symbols(st.bits, [(content, length)], table)[:, 0]
        ok = sym >= 0
        rest = st.bits.copy()
        rest[:, content] = 0
        rest[:, length] = 0
        gid, ng = group_ids(rest[ok], grp[ok])
        n = self.model.code.n
        vecs = np.zeros((ng, n), dtype=complex)
        np.add.at(vecs, (gid, sym[ok]), st.amps[ok])
        rho_sym = vecs.T @ vecs.conj()
        phi = self.model.spectrum.eigenvectors[:, list(self.model.symbols)]
        return phi @ rho_sym @ phi.conj().T


def decode(block: StoredBlock, model: SourceModel, encoder: GateNetwork) -> DecodedBlock:
    """Pad the dropped tape with zeros and run the encoder backwards."""
    if encoder.n_qubits != block.layout.n_qubits:
        raise StorageError("encoder does not match the stored block layout")
    if model.code.l_max != block.layout.code_width:
        raise StorageError("code does not match the stored block layout")
    dec = encoder.inverse()
    typical = run(dec, block.typical)
    disc = block.discarded
    discarded = ReducedState(run(dec, disc.state), disc.group, disc.kept)
    return DecodedBlock(model, block.layout, typical, discarded)


def make_encoder(layout: RegisterLayout, code: HuffmanCode, mode: str) -> GateNetwork:
    if mode == "parallel":
        return build_parallel_encoder(layout, code)
    if mode == "sequential":
        return build_sequential_encoder(layout, code)
    raise StorageError(f"unknown encoder {mode!r}")


def storage_run(source, n_signals: int, delta: float | None = None, *, exact: bool = True,
                trials: int | None = None, seed: int | None = None, encoder: str = "auto",
                truncate_len: int | None = None, max_branches: int | None = None,
                per_signal: bool = True) -> CodecReport:
    """Encode, truncate and decode blocks of ``n_signals`` signals and report the average fidelity.

    ``fidelity`` is the typical-subspace projection fidelity: branches whose
    total codeword length exceeds the kept tape are counted as failures.
    ``extras`` also carries the fidelity of the plain discard channel
    (drop the tail qubits, pad with zeros, decode) and the mean single-signal
    fidelity under that channel.
    """
    model = source if isinstance(source, SourceModel) else source_model(source)
    code = model.code
    if encoder == "auto":
        encoder = "parallel" if is_power_of_two(n_signals) else "sequential"
    params = storage_params(code, n_signals, delta)
    if truncate_len is not None:
        if not 0 <= truncate_len <= n_signals * code.l_max:
            raise StorageError(f"truncation length {truncate_len} outside 0..{n_signals * code.l_max}")
        params = StorageParams(n_signals, params.delta, int(truncate_len))
    if exact:
        check_budget(exact_branch_count(model, n_signals), max_branches)
        inputs = exact_inputs(model, n_signals)
    else:
        if not trials or trials < 1:
            raise StorageError("sampled mode needs a positive trial count")
        inputs = sampled_inputs(model, n_signals, trials, seed)

    layout = make_layout(n_signals, code, parallel=(encoder == "parallel"))
    net = make_encoder(layout, code, encoder)
    state = prepare_batch(model, inputs, layout, max_branches)
    block = truncate(run(net, state), layout, params)
    out = decode(block, model, net)

    w = inputs.weights / inputs.weights.sum()
    fid = float(np.clip(w @ out.fidelities(inputs), 0.0, 1.0))
    extras = {
        "n_signals": n_signals,
        "delta": params.delta,
        "truncate_len": params.truncate_len,
        "tail_weight": typical_tail_weight(code, n_signals, params.truncate_len),
        "branch_tail_weight": float(w @ block.tail),
        "discard_fidelity": float(np.clip(w @ out.fidelities(inputs, channel="discard"), 0.0, 1.0)),
        "encoder": encoder,
        "mode": "exact" if exact else "sampled",
        "tape_width": layout.tape_width,
        "len_width": code.len_reg_width,
    }
    if not exact:
        extras["trials"] = int(trials)
        extras["seed"] = seed
    if per_signal:
        ps = [w @ out.fidelities(inputs, [k], channel="discard") for k in range(n_signals)]
        extras["per_signal_fidelity"] = float(np.mean(ps))
    return CodecReport(
        qubits_stored=params.truncate_len + n_signals * code.len_reg_width,
        fidelity=fid,
        entropy_baseline=n_signals * model.entropy,
        depth=net.depth_metrics(),
        fidelity_gap=1.0 - fid,
        extras=extras,
    )

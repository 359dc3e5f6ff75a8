"""Two-party streaming codec: sequential encoding, flushing, and truncation with disentanglement.

The sender (``"alice"``) encodes signals one by one onto a shared tape and
streams the prefix that is already final to the receiver (``"bob"``). Every
qubit has exactly one owner; each operation is checked against the owner map
before it is applied, so neither party ever touches the other's qubits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit.layout import RegisterLayout, make_layout, value_width
from .circuit.network import GateNetwork, MacroOp, add_into, apply_op, rotate_by_register
from .circuit.prepare import (InputBatch, check_budget, exact_branch_count, exact_inputs,
                              prepare_batch, sampled_inputs)
from .circuit.reduce import signals_fidelity, symbol_table
from .circuit.state import SparseState, group_ids
from .qmath import SourceModel, source_model
from .storage import (CodecReport, Message, StorageError, append_signal_ops, merge_pair,
                      storage_params)

SENDER, RECEIVER = 0, 1
ACTORS = ("alice", "bob")


class SessionError(ValueError):
    pass


class OwnershipError(RuntimeError):
    """An operation referenced a qubit held by the other party."""


def comm_layout(n_signals: int, code) -> RegisterLayout:
    """Sequential layout plus the receiver's work registers."""
    lay = make_layout(n_signals, code, parallel=False)
    lay.add("position", lay.total_len_width)
    lay.add("bus", n_signals * code.l_min)
    for k in range(n_signals):
        lay.add(f"out_{k}", code.l_max)
    return lay


@dataclass
class Transfer:
    step: int
    direction: str  # "fwd" or "bwd"
    qubits: int
    what: str


@dataclass
class CommSession:
    model: SourceModel
    layout: RegisterLayout
    state: SparseState | None
    inputs: InputBatch | None
    delta: float
    owner: np.ndarray
    network: GateNetwork
    signals_encoded: int = 0
    sent_tape: int = 0
    qubits_sent_fwd: int = 0
    qubits_sent_bwd: int = 0
    truncation_point: int | None = None
    case: str | None = None
    m_prime: int | None = None
    finalized: bool = False
    step: int = 0
    trace: list = field(default_factory=list)
    transfers: list = field(default_factory=list)
    total_len_held: tuple = ()
    bob_tape_width: int = 0

    # -- basic properties ---------------------------------------------------
    @property
    def code(self):
        return self.model.code

    @property
    def n_signals(self) -> int:
        return self.layout.n_signals

    @property
    def received_qubits(self) -> int:
        return int(sum(self.owner[q] == RECEIVER for q in self.layout.tape))

    def owned(self, span, actor: int) -> bool:
        return all(self.owner[q] == actor for q in span)

    # -- primitive session actions -----------------------------------------
    def apply(self, actor: int, ops, note: str = "") -> None:
        for op in ops:
            if op.is_identity():
                continue
            bad = [q for q in op.qubits if self.owner[q] != actor]
            if bad:
                raise OwnershipError(f"{ACTORS[actor]} cannot apply {op.kind} to qubits {sorted(bad)[:4]}")
            self.network.append(op, note)
            note = ""
            if self.state is not None:
                apply_op(self.state.bits, op)
            self.step += 1
            self.trace.append((self.step, ACTORS[actor], _op_text(op), _span_text(sorted(op.qubits)), "0"))

    def send(self, actor: int, qubits, what: str) -> int:
        qubits = [q for q in qubits]
        if not qubits:
            return 0
        bad = [q for q in qubits if self.owner[q] != actor]
        if bad:
            raise OwnershipError(f"{ACTORS[actor]} cannot send qubits it does not hold: {bad[:4]}")
        self.owner[qubits] = 1 - actor
        self.step += 1
        direction = "fwd" if actor == SENDER else "bwd"
        if actor == SENDER:
            self.qubits_sent_fwd += len(qubits)
        else:
            self.qubits_sent_bwd += len(qubits)
        self.transfers.append(Transfer(self.step, direction, len(qubits), what))
        self.trace.append((self.step, ACTORS[actor], f"send {what}", _span_text(qubits),
                           f"{direction}+{len(qubits)}"))
        return len(qubits)

    def lengths(self, upto: int) -> np.ndarray:
        """Per-row sum of the first ``upto`` codeword lengths."""
        tot = np.zeros(self.state.n_rows, dtype=np.int64)
        for k in range(upto):
            tot += self.state.values(self.layout.length(k))
        return tot

    def truncation_length(self, m: int) -> int:
        """Qubits allocated to the kept tape of the first ``m`` signals."""
        return storage_params(self.code, m, self.delta).truncate_len

def _op_text(op: MacroOp) -> str:
    if op.kind in ("rot", "crot", "add"):
        return f"{op.kind}{op.amount:+d}"
    return op.kind


def _span_text(qubits) -> str:
    qubits = list(qubits)
    if not qubits:
        return "-"
    parts, lo, prev = [], qubits[0], qubits[0]
    for q in qubits[1:] + [None]:
        if q is not None and q == prev + 1:
            prev = q
            continue
        parts.append(f"{lo}" if lo == prev else f"{lo}-{prev}")
        if q is not None:
            lo = prev = q
    return ",".join(parts)


# -- session lifecycle --------------------------------------------------------

def open_session(source, n_signals: int, delta: float | None = None, inputs=None, *,
                 trials: int | None = None, seed: int | None = None,
                 construct_only: bool = False, max_branches: int | None = None) -> CommSession:
    """Start a session over ``n_signals`` signals.

    ``inputs`` may be an :class:`InputBatch`, a list of signal-index sequences
    (equal weights), or ``None`` for every sequence weighted by its
    probability (or ``trials`` random ones when ``trials`` is given).
    """
    model = source if isinstance(source, SourceModel) else source_model(source)
    if n_signals < 1:
        raise SessionError("need at least one signal")
    params = storage_params(model.code, n_signals, delta)
    layout = comm_layout(n_signals, model.code)
    owner = np.full(layout.n_qubits, SENDER, dtype=np.int8)
    for name in ["position", "bus"] + [f"out_{k}" for k in range(n_signals)]:
        owner[list(layout[name])] = RECEIVER
    state = batch = None
    if not construct_only:
        if inputs is None:
            if trials:
                batch = sampled_inputs(model, n_signals, trials, seed)
            else:
                check_budget(exact_branch_count(model, n_signals), max_branches)
                batch = exact_inputs(model, n_signals)
        elif isinstance(inputs, InputBatch):
            batch = inputs
        else:
            seqs = np.asarray(inputs, dtype=np.int64).reshape(-1, n_signals)
            batch = InputBatch(seqs, np.full(len(seqs), 1.0 / len(seqs)))
        state = prepare_batch(model, batch, layout, max_branches)
    return CommSession(model, layout, state, batch, params.delta, owner, GateNetwork(layout.n_qubits),
                       total_len_held=())


def _require_open(s: CommSession) -> None:
    if s.finalized:
        raise SessionError("session already finalized")


def encode_next(s: CommSession) -> CommSession:
    """Append the next signal to the sender's unsent tape region."""
    _require_open(s)
    k = s.signals_encoded
    if k >= s.n_signals:
        raise SessionError("all signals already encoded")
    s.apply(SENDER, append_signal_ops(s.layout, k, s.sent_tape), f"append signal {k}")
    s.signals_encoded += 1
    return s


def safe_prefix(s: CommSession) -> int:
    return max(0, s.signals_encoded * s.code.l_min - s.sent_tape)


def arrived_count(s: CommSession) -> int:
    return s.received_qubits // s.code.l_max


def flush(s: CommSession, extra: int = 0) -> int:
    """Send the tape prefix that later encoding cannot change, and the lengths of arrived signals.

    ``extra`` sends that many further tape qubits; those may still be
    rewritten by later appends, so fidelity is lost and has to be measured.
    Returns the number of qubits sent.
    """
    _require_open(s)
    n = safe_prefix(s) + max(0, extra)
    n = min(n, s.signals_encoded * s.code.l_max - s.sent_tape)
    sent = 0
    if n > 0:
        lo = s.sent_tape
        sent += s.send(SENDER, s.layout.tape[lo:lo + n], "tape")
        s.sent_tape += n
    for k in range(min(arrived_count(s), s.signals_encoded)):
        if s.owned(s.layout.length(k), SENDER):
            sent += s.send(SENDER, s.layout.length(k), f"length_{k}")
    return sent


# -- truncation ---------------------------------------------------------------

def _dispatch(s: CommSession, m: int) -> str:
    if m > s.signals_encoded:
        return "forward"
    start = s.lengths(m - 1)
    end = s.lengths(m)
    if (start >= s.sent_tape).all():
        return "forward"
    if (end <= s.sent_tape).all():
        return "backward"
    return "middle"


def _choose_m_prime(s: CommSession, m: int) -> int:
    r = s.signals_encoded
    for mp in range(m + 1, r + 1):
        if s.state is None or (s.lengths(mp - 1) >= s.sent_tape).all():
            return mp
    if r < s.n_signals:
        return r + 1
    return max(r, m)


def _send_total(s: CommSession, width: int) -> None:
    reg = s.layout.total_length
    held = tuple(reg[len(reg) - width:]) if width else ()
    s.send(SENDER, [q for q in held if s.owner[q] == SENDER], "total_length")
    s.total_len_held = held


def _forward(s: CommSession, m: int, bound: int) -> None:
    lay, lmax = s.layout, s.code.l_max
    while s.signals_encoded < m:
        encode_next(s)
    for j in range(s.signals_encoded - 1, m - 1, -1):
        if j * lmax < s.sent_tape:
            raise SessionError(f"signal {j} overlaps the sent prefix; forward truncation impossible")
        ops = [op.inverse() for op in reversed(append_signal_ops(lay, j, s.sent_tape))]
        s.apply(SENDER, ops, f"separate signal {j}")
    s.signals_encoded = m
    hi = max(s.sent_tape, min(bound, lay.tape_width))
    if hi > s.sent_tape:
        s.send(SENDER, lay.tape[s.sent_tape:hi], "tape")
        s.sent_tape = hi
    for k in range(m):
        if s.owned(lay.length(k), SENDER):
            s.send(SENDER, lay.length(k), f"length_{k}")
    _send_total(s, value_width(m * lmax))


def _backward(s: CommSession, m: int) -> None:
    lay, code = s.layout, s.code
    S, r = s.sent_tape, s.signals_encoded
    for k in range(m):
        if s.owned(lay.length(k), SENDER):
            s.send(SENDER, lay.length(k), f"length_{k}")
    pos = lay["position"]
    s.apply(RECEIVER, [add_into(lay.length(k), pos) for k in range(m)], "position of cut")
    bw = S - m * code.l_min
    bus = lay["bus"][:bw]
    region = lay.tape[:S]
    if bw:
        s.apply(RECEIVER, rotate_by_register(tuple(region) + tuple(bus), pos, -1, -1, S)
                + rotate_by_register(region, pos, 1, -1, S), "move surplus to bus")
        s.send(RECEIVER, bus, "bus")
    for k in range(m, r):
        if s.owned(lay.length(k), RECEIVER):
            s.send(RECEIVER, lay.length(k), f"length_{k}")
    tot = lay.total_length
    s.apply(SENDER, [add_into(lay.length(k), tot, -1) for k in range(m, r)], "drop later lengths")
    if bw:
        local = Message(lay.tape[S:r * code.l_max], ())
        s.apply(SENDER, merge_pair(Message(bus, tot, -1, S), local, require_adjacent=False),
                "rejoin surplus")
    _send_total(s, value_width(m * code.l_max))
    s.apply(RECEIVER, [add_into(lay.length(k), pos, -1) for k in range(m)], "clear position")


def _middle(s: CommSession, m: int) -> None:
    lay, lmax = s.layout, s.code.l_max
    t_m = s.truncation_length(m)
    mp = _choose_m_prime(s, m)
    s.m_prime = mp
    _forward(s, mp, t_m + (mp - m) * lmax)
    tot = s.total_len_held
    for j in range(mp - 1, m - 1, -1):
        lo = t_m + (j - m) * lmax
        left = Message(lay.tape[:lo], tot)
        right = Message(lay.tape[lo:lo + lmax], lay.length(j))
        ops = [add_into(lay.length(j), tot, -1)]
        ops += [op.inverse() for op in reversed(merge_pair(left, right))]
        s.apply(RECEIVER, ops, f"return signal {j}")
        s.send(RECEIVER, right.span, f"segment_{j}")
        s.send(RECEIVER, lay.length(j), f"length_{j}")


def truncate_session(s: CommSession, m: int, case: str | None = None) -> CommSession:
    """Cut the stream after the first ``m`` signals and hand them to the receiver, disentangled.

    ``case`` overrides the branchwise dispatch (needed when no state is
    simulated).
    """
    if s.finalized:
        return s
    if not 1 <= m <= s.n_signals:
        raise SessionError(f"truncation point {m} outside 1..{s.n_signals}")
    if case is None:
        if s.state is None:
            raise SessionError("construction-only sessions need an explicit case")
        case = _dispatch(s, m)
    s.case = case
    s.truncation_point = m
    if case == "forward":
        _forward(s, m, s.truncation_length(m))
    elif case == "backward":
        _backward(s, m)
    elif case == "middle":
        _middle(s, m)
    else:
        raise SessionError(f"unknown case {case!r}")
    s.bob_tape_width = sum(1 for q in s.layout.tape if s.owner[q] == RECEIVER)
    s.finalized = True
    return s


def finalize(s: CommSession) -> CommSession:
    """Encode whatever is left and deliver the whole block."""
    return truncate_session(s, s.n_signals, "forward")


def run_session(s: CommSession, flush_every: int | None = None, truncate_at: int | None = None) -> CommSession:
    """Encode with a flush after every ``flush_every`` signals, then truncate or finalize."""
    while s.signals_encoded < s.n_signals:
        encode_next(s)
        if flush_every and s.signals_encoded % flush_every == 0:
            flush(s)
    if truncate_at is None:
        return finalize(s)
    return truncate_session(s, truncate_at)


# -- receiver-side decoding and fidelities --------------------------------------

def _bob_tape(s: CommSession) -> tuple:
    return tuple(q for q in s.layout.tape if s.owner[q] == RECEIVER)


def decode_session(s: CommSession) -> SparseState:
    """Receiver unpacks the first m signals into its output registers.

    Branches whose content overran the kept tape are dropped (failure outcome).
    """
    if not s.finalized:
        raise SessionError("session not finalized")
    if s.state is None:
        raise SessionError("construction-only session has no state")
    m = s.truncation_point
    lay = s.layout
    keep = s.lengths(m) <= s.truncation_length(m)
    st = s.state.select(keep)
    tape = _bob_tape(s)
    tot = s.total_len_held
    for j in range(m - 1, -1, -1):
        ops = [add_into(lay.length(j), tot, -1)]
        merge = merge_pair(Message(tape, tot), Message(lay[f"out_{j}"], lay.length(j)), require_adjacent=False)
        ops += [op.inverse() for op in reversed(merge)]
        for op in ops:
            if not op.is_identity():
                if any(s.owner[q] != RECEIVER for q in op.qubits):
                    raise OwnershipError("decoder touched a sender qubit")
                apply_op(st.bits, op)
    return st


def session_fidelity(s: CommSession) -> float:
    """Average fidelity of the first m signals after decoding."""
    st = decode_session(s)
    m = s.truncation_point
    lay = s.layout
    regs = [(np.asarray(lay[f"out_{k}"]), np.asarray(lay.length(k))) for k in range(m)]
    ref = s.inputs.reference(s.model)[:, :m, :]
    per = signals_fidelity(st, regs, symbol_table(s.code), ref)
    w = s.inputs.weights / s.inputs.weights.sum()
    return float(np.clip(w @ per, 0.0, 1.0))


def premature_measurement_fidelity(s: CommSession, k: int) -> float:
    """Fidelity of signal ``k`` if the receiver cut it out and measured it now.

    Every qubit except the extracted codeword (and its length register) is
    traced out, including registers still held by the sender.
    """
    if s.state is None:
        raise SessionError("construction-only session has no state")
    lay, code = s.layout, s.code
    if not s.owned(lay.length(k), RECEIVER):
        raise SessionError(f"length register of signal {k} has not arrived")
    tape = np.asarray(_bob_tape(s), dtype=np.int64)
    st = s.state
    start = s.lengths(k)
    lk = st.values(lay.length(k))
    if len(tape) < 1 or (start + lk > len(tape)).any():
        raise SessionError(f"signal {k} has not fully arrived")
    nb = len(tape)
    sub = st.bits[:, tape]
    idx = np.arange(nb)[None, :]
    # codeword content, left aligned in l_max bits
    cpos = start[:, None] + np.arange(code.l_max)[None, :]
    cbits = np.take_along_axis(sub, np.clip(cpos, 0, nb - 1), axis=1)
    cbits = cbits * (np.arange(code.l_max)[None, :] < lk[:, None])
    weights = 1 << np.arange(code.l_max - 1, -1, -1)
    cval = cbits.astype(np.int64) @ weights
    table = symbol_table(code)
    valid = lk < table.shape[0]
    sym = -np.ones(st.n_rows, dtype=np.int64)
    sym[valid] = table[lk[valid], cval[valid]]
    # what remains on the receiver's tape once the signal is cut out
    src = np.where(idx < start[:, None], idx, idx + lk[:, None])
    rest_tape = np.take_along_axis(sub, np.clip(src, 0, nb - 1), axis=1) * (src < nb)
    rest = st.bits.copy()
    rest[:, tape] = rest_tape
    rest[:, list(lay.length(k))] = 0
    held = [q for q in lay.total_length if s.owner[q] == RECEIVER]
    if held:
        w = len(held)
        val = (st.values(held) - lk) % (1 << w)
        rest[:, held] = ((val[:, None] >> np.arange(w - 1, -1, -1)[None, :]) & 1).astype(np.uint8)
    ok = sym >= 0
    coef = s.inputs.reference(s.model)[st.batch[ok], k, sym[ok]]
    contrib = np.conj(coef) * st.amps[ok]
    gid, ng = group_ids(rest[ok], st.batch[ok])
    ov = np.zeros(ng, dtype=complex)
    np.add.at(ov, gid, contrib)
    gb = np.zeros(ng, dtype=np.int64)
    gb[gid] = st.batch[ok]
    per = np.bincount(gb, weights=np.abs(ov) ** 2, minlength=s.inputs.n_batches)
    w = s.inputs.weights / s.inputs.weights.sum()
    return float(w @ per)


# -- reporting ------------------------------------------------------------------

def comm_report(s: CommSession) -> CodecReport:
    if not s.finalized:
        raise SessionError("session not finalized")
    m = s.truncation_point
    code = s.code
    t_m = s.truncation_length(m)
    stored = t_m + m * code.len_reg_width + value_width(m * code.l_max)
    fid = session_fidelity(s) if s.state is not None else float("nan")
    extras = {
        "n_signals": s.n_signals,
        "truncate_at": m,
        "case": s.case,
        "m_prime": s.m_prime,
        "delta": s.delta,
        "truncate_len": t_m,
        "qubits_sent_fwd": s.qubits_sent_fwd,
        "qubits_sent_bwd": s.qubits_sent_bwd,
        "receiver_tape_qubits": s.bob_tape_width,
        "forward_ledger": [[t.step, t.qubits, t.what] for t in s.transfers if t.direction == "fwd"],
        "backward_ledger": [[t.step, t.qubits, t.what] for t in s.transfers if t.direction == "bwd"],
        "steps": s.step,
    }
    return CodecReport(
        qubits_stored=stored,
        fidelity=fid,
        entropy_baseline=m * s.model.entropy,
        depth=s.network.depth_metrics(),
        fidelity_gap=1.0 - fid,
        extras=extras,
    )


def format_trace(s: CommSession) -> str:
    return "".join(f"({a}, {b}, {c}, {d}, {e})\n" for a, b, c, d, e in s.trace)


def zero_count_fidelity(a: complex, b: complex, n_signals: int = 1) -> float:
    """Fidelity of one signal a|0> + b|1> whose sender still holds the count of zeros in the block.

    Each signal is written as its own bit; the count register is traced out
    together with the other signals.
    """
    norm = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
    a, b = a / norm, b / norm
    rows = np.array(np.meshgrid(*[[0, 1]] * n_signals, indexing="ij")).reshape(n_signals, -1).T
    amps = np.prod(np.where(rows == 0, a, b), axis=1)
    zeros = (rows == 0).sum(axis=1)
    fid = 0.0
    others = rows[:, 1:]
    gid, ng = group_ids(others.astype(np.uint8), zeros)
    coef = np.where(rows[:, 0] == 0, a, b)
    ov = np.zeros(ng, dtype=complex)
    np.add.at(ov, gid, np.conj(coef) * amps)
    fid = float((np.abs(ov) ** 2).sum())
    return fid


__all__ = [
    "CommSession", "OwnershipError", "SessionError", "arrived_count", "comm_layout", "comm_report",
    "decode_session", "encode_next", "finalize", "flush", "format_trace", "open_session",
    "premature_measurement_fidelity", "run_session", "safe_prefix", "session_fidelity",
    "truncate_session", "zero_count_fidelity", "StorageError",
]

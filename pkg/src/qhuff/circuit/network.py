"""Macro operations, their primitive-gate expansions, and depth accounting.

A ``GateNetwork`` is a sequence of macro layers; the macro ops inside one
layer act on disjoint qubits. Two depth models are reported:

* idealized: one unit per macro layer (a digit-conditioned rotation, a swap
  layer, an XOR layer and an adder stage each count 1);
* strict: primitive layers (CNOT, CSWAP, CCNOT) where a control shared by
  k gates is first copied onto k-1 ancillas by a CNOT fan-out tree, and the
  copies are uncomputed afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .kernels import G_CCNOT, G_CNOT, G_CSWAP, GATE_NAMES
from .state import SparseState


class OverlapError(ValueError):
    pass


def _span(s) -> tuple[int, ...]:
    return tuple(int(q) for q in s)


@dataclass(frozen=True)
class MacroOp:
    """One macro operation.

    kinds and fields:

    * ``swap``: exchange ``spans[0]`` and ``spans[1]`` (equal widths)
    * ``xor``: ``spans[1] ^= spans[0]`` (equal widths)
    * ``rot``: rotate ``spans[0]`` left by ``amount`` (negative = right)
    * ``crot``: rotate ``spans[0]`` left by ``amount`` when qubit ``spans[1][0]`` is 1
    * ``add``: ``spans[1] += amount * value(spans[0])`` modulo ``2**len(spans[1])``

    Registers are read most significant bit first.
    """

    kind: str
    spans: tuple
    amount: int = 0
    label: str = ""

    def __post_init__(self):
        spans = tuple(_span(s) for s in self.spans)
        object.__setattr__(self, "spans", spans)
        flat = [q for s in spans for q in s]
        if len(set(flat)) != len(flat):
            raise OverlapError(f"{self.kind}: spans overlap {spans}")
        if self.kind in ("swap", "xor") and len(spans[0]) != len(spans[1]):
            raise ValueError(f"{self.kind}: width mismatch {len(spans[0])} vs {len(spans[1])}")
        if self.kind == "crot" and len(spans[1]) != 1:
            raise ValueError("crot takes exactly one control qubit")
        if self.kind == "add" and self.amount not in (1, -1):
            raise ValueError("add sign must be +1 or -1")
        if self.kind not in ("swap", "xor", "rot", "crot", "add"):
            raise ValueError(f"unknown macro kind {self.kind!r}")

    @property
    def qubits(self) -> frozenset:
        return frozenset(q for s in self.spans for q in s)

    def inverse(self) -> "MacroOp":
        if self.kind in ("swap", "xor"):
            return self
        return MacroOp(self.kind, self.spans, -self.amount, self.label)

    def is_identity(self) -> bool:
        if self.kind in ("rot", "crot"):
            w = len(self.spans[0])
            return w == 0 or self.amount % w == 0
        return all(len(s) == 0 for s in self.spans)

    def shape_key(self) -> tuple:
        if self.kind in ("rot", "crot"):
            w = len(self.spans[0])
            return (self.kind, w, self.amount % w)
        return (self.kind, tuple(len(s) for s in self.spans), self.amount)


# -- macro semantics ---------------------------------------------------------

def apply_op(bits: np.ndarray, op: MacroOp) -> None:
    """Apply a macro op in place to a branch matrix."""
    sp = [np.asarray(s, dtype=np.int64) for s in op.spans]
    if op.kind == "swap":
        if len(sp[0]):
            tmp = bits[:, sp[0]].copy()
            bits[:, sp[0]] = bits[:, sp[1]]
            bits[:, sp[1]] = tmp
    elif op.kind == "xor":
        if len(sp[0]):
            bits[:, sp[1]] ^= bits[:, sp[0]]
    elif op.kind == "rot":
        if len(sp[0]):
            shifts = np.full(len(bits), op.amount, dtype=np.int64)
            kernels.rotate_rows(bits, sp[0], shifts)
    elif op.kind == "crot":
        kernels.controlled_rotate(bits, sp[0], int(sp[1][0]), op.amount)
    elif op.kind == "add":
        kernels.add_rows(bits, sp[0], sp[1], op.amount)


# -- primitive expansion -----------------------------------------------------

def _reflection_pairs(w: int, c: int) -> list[tuple[int, int]]:
    pairs = []
    for x in range(w):
        y = (c - x) % w
        if x < y:
            pairs.append((x, y))
    return pairs


def rotation_transpositions(w: int, shift: int) -> list[list[tuple[int, int]]]:
    """Left rotation by ``shift`` as two layers of disjoint position swaps.

    x -> x - s equals the reflection x -> -x followed by x -> -s - x.
    """
    s = shift % w
    if s == 0:
        return []
    layers = [_reflection_pairs(w, 0), _reflection_pairs(w, -s)]
    return [lay for lay in layers if lay]


def _fanout(control: int, ancillas: Sequence[int], k: int) -> tuple[list[int], list[list[tuple]]]:
    """Copy ``control`` onto ``k - 1`` ancillas with a doubling CNOT tree."""
    holders = [control]
    layers = []
    free = list(ancillas[:k - 1])
    while len(holders) < k:
        layer = []
        for h in list(holders):
            if len(holders) == k:
                break
            t = free.pop(0)
            layer.append((G_CNOT, h, t, -1))
            holders.append(t)
        layers.append(layer)
    return holders, layers


def _cuccaro(a: list[int], b: list[int], carry: int) -> list[tuple]:
    """Ripple-carry modular adder b <- a + b (LSB-first index lists)."""
    gates = []
    cs = [carry] + a[:-1]
    for i in range(len(b)):
        c, y, z = cs[i], b[i], a[i]
        gates += [(G_CNOT, z, y, -1), (G_CNOT, z, c, -1), (G_CCNOT, c, y, z)]
    for i in reversed(range(len(b))):
        c, y, z = cs[i], b[i], a[i]
        gates += [(G_CCNOT, c, y, z), (G_CNOT, z, c, -1), (G_CNOT, c, y, -1)]
    return gates


def _gate_qubits(g) -> tuple[int, ...]:
    return tuple(q for q in g[1:] if q >= 0)


def asap_layers(gates: Iterable[tuple]) -> list[list[tuple]]:
    layers: list[list[tuple]] = []
    ready: dict[int, int] = {}
    for g in gates:
        qs = _gate_qubits(g)
        t = max((ready.get(q, 0) for q in qs), default=0)
        if t == len(layers):
            layers.append([])
        layers[t].append(g)
        for q in qs:
            ready[q] = t + 1
    return layers


def ancillas_needed(op: MacroOp) -> int:
    if op.kind == "crot":
        k = sum(len(l) for l in rotation_transpositions(len(op.spans[0]), op.amount))
        return max(0, k - 1)
    if op.kind == "add":
        ws, wd = len(op.spans[0]), len(op.spans[1])
        return 1 + max(0, wd - ws) if wd else 0
    return 0


def expand_op(op: MacroOp, ancilla_base: int) -> list[list[tuple]]:
    """Primitive layers of one macro op; ancillas start at ``ancilla_base``."""
    if op.kind == "swap":
        a, b = op.spans
        if not a:
            return []
        l1 = [(G_CNOT, x, y, -1) for x, y in zip(a, b)]
        l2 = [(G_CNOT, y, x, -1) for x, y in zip(a, b)]
        return [l1, l2, list(l1)]
    if op.kind == "xor":
        a, b = op.spans
        return [[(G_CNOT, x, y, -1) for x, y in zip(a, b)]] if a else []
    if op.kind == "rot":
        span = op.spans[0]
        out = []
        for lay in rotation_transpositions(len(span), op.amount):
            l1 = [(G_CNOT, span[x], span[y], -1) for x, y in lay]
            l2 = [(G_CNOT, span[y], span[x], -1) for x, y in lay]
            out += [l1, l2, list(l1)]
        return out
    if op.kind == "crot":
        span, (ctrl,) = op.spans
        swaps = rotation_transpositions(len(span), op.amount)
        k = sum(len(l) for l in swaps)
        if k == 0:
            return []
        anc = list(range(ancilla_base, ancilla_base + k - 1))
        holders, fan = _fanout(ctrl, anc, k)
        body = []
        h = 0
        for lay in swaps:
            layer = []
            for x, y in lay:
                layer.append((G_CSWAP, holders[h], span[x], span[y]))
                h += 1
            body.append(layer)
        return fan + body + [list(l) for l in reversed(fan)]
    if op.kind == "add":
        src, dst = op.spans
        wd = len(dst)
        if wd == 0:
            return []
        a = list(reversed(src))[:wd]
        pad = wd - len(a)
        carry = ancilla_base
        a += list(range(ancilla_base + 1, ancilla_base + 1 + pad))
        gates = _cuccaro(a, list(reversed(dst)), carry)
        if op.amount < 0:
            gates = gates[::-1]
        return asap_layers(gates)
    raise ValueError(op.kind)


_COST_CACHE: dict = {}


def op_cost(op: MacroOp) -> tuple[int, int]:
    """(strict depth, gate count) of one macro op, memoised on its shape."""
    key = op.shape_key()
    cost = _COST_CACHE.get(key)
    if cost is None:
        layers = expand_op(op, 1 << 40)
        cost = (len(layers), sum(len(l) for l in layers))
        _COST_CACHE[key] = cost
    return cost


@dataclass(frozen=True)
class DepthReport:
    idealized_depth: int
    strict_depth: int
    gate_count: int

    def as_dict(self) -> dict:
        return {"idealized_depth": self.idealized_depth, "strict_depth": self.strict_depth,
                "gate_count": self.gate_count}


@dataclass
class GateNetwork:
    n_qubits: int
    layers: list = field(default_factory=list)
    notes: list = field(default_factory=list)  # (layer index, text) macro boundaries

    def _check(self, ops: Sequence[MacroOp]) -> None:
        seen: set = set()
        for op in ops:
            qs = op.qubits
            if qs & seen:
                raise OverlapError("ops in one layer must act on disjoint qubits")
            if qs and (min(qs) < 0 or max(qs) >= self.n_qubits):
                raise ValueError(f"{op.kind} references qubits outside the layout")
            seen |= qs

    def parallel(self, ops: Sequence[MacroOp], note: str = "") -> "GateNetwork":
        ops = [op for op in ops if not op.is_identity()]
        if not ops:
            return self
        self._check(ops)
        if note:
            self.notes.append((len(self.layers), note))
        self.layers.append(list(ops))
        return self

    def append(self, op: MacroOp, note: str = "") -> "GateNetwork":
        return self.parallel([op], note)

    def extend(self, layers: Iterable[Sequence[MacroOp]], note: str = "") -> "GateNetwork":
        for i, lay in enumerate(layers):
            self.parallel(lay, note if i == 0 else "")
        return self

    def zip_parallel(self, streams: Sequence[Sequence[MacroOp]], note: str = "") -> "GateNetwork":
        """Run several equally shaped op sequences side by side."""
        if not streams:
            return self
        depth = max(len(s) for s in streams)
        for i in range(depth):
            self.parallel([s[i] for s in streams if i < len(s)], note if i == 0 else "")
        return self

    def inverse(self) -> "GateNetwork":
        inv = GateNetwork(self.n_qubits)
        for lay in reversed(self.layers):
            inv.layers.append([op.inverse() for op in lay])
        return inv

    def ops(self) -> Iterator[MacroOp]:
        for lay in self.layers:
            yield from lay

    def depth_metrics(self) -> DepthReport:
        ideal = strict = gates = 0
        for lay in self.layers:
            ideal += 1
            costs = [op_cost(op) for op in lay]
            strict += max(c[0] for c in costs)
            gates += sum(c[1] for c in costs)
        return DepthReport(ideal, strict, gates)

    @property
    def n_ancillas(self) -> int:
        return max((sum(ancillas_needed(op) for op in lay) for lay in self.layers), default=0)

    def expand(self) -> Iterator[list[tuple]]:
        """Primitive layers; ancillas are numbered from ``n_qubits``."""
        for lay in self.layers:
            base = self.n_qubits
            parts = []
            for op in lay:
                parts.append(expand_op(op, base))
                base += ancillas_needed(op)
            for i in range(max((len(p) for p in parts), default=0)):
                yield [g for p in parts if i < len(p) for g in p[i]]

    def netlist(self) -> str:
        lines = []
        for k, layer in enumerate(self.expand()):
            for g in sorted(layer):
                name = GATE_NAMES[g[0]]
                if g[0] == G_CNOT:
                    lines.append(f"LAYER {k}: {name} {g[2]} @{g[1]}")
                elif g[0] == G_CSWAP:
                    lines.append(f"LAYER {k}: {name} {g[2]} {g[3]} @{g[1]}")
                elif g[0] == G_CCNOT:
                    lines.append(f"LAYER {k}: {name} {g[3]} @{g[1]},{g[2]}")
                else:
                    lines.append(f"LAYER {k}: {name} " + " ".join(str(q) for q in _gate_qubits(g)))
        return "\n".join(lines) + ("\n" if lines else "")


def run(network: GateNetwork, state: SparseState) -> SparseState:
    """Apply the macro semantics of every layer to a copy of ``state``."""
    if state.n_qubits != network.n_qubits:
        raise ValueError(f"state has {state.n_qubits} qubits, network expects {network.n_qubits}")
    out = state.copy()
    for op in network.ops():
        apply_op(out.bits, op)
    return out


def run_gates(network: GateNetwork, bits: np.ndarray) -> np.ndarray:
    """Gate-level execution on a branch matrix; ancilla columns are appended as zeros."""
    n_anc = network.n_ancillas
    full = np.zeros((bits.shape[0], network.n_qubits + n_anc), dtype=np.uint8)
    full[:, :bits.shape[1]] = bits
    for layer in network.expand():
        if layer:
            kernels.apply_gates(full, np.asarray(layer, dtype=np.int64).reshape(-1, 4))
    return full


# -- macro builders ----------------------------------------------------------

def swap_spans(a, b) -> MacroOp:
    return MacroOp("swap", (a, b))


def xor_deposit(src, dst) -> MacroOp:
    return MacroOp("xor", (src, dst))


def rotate_register(span, amount: int) -> MacroOp:
    """Fixed left rotation (negative amount rotates right)."""
    return MacroOp("rot", (span,), amount)


def rotate_by_register(span, control, direction: int = 1, sign: int = 1, offset: int = 0) -> list[MacroOp]:
    """Rotate ``span`` by ``sign * value(control) + offset`` positions.

    ``direction`` is +1 for left, -1 for right. Each control digit i becomes one
    rotation by 2**i conditioned on that digit; ``offset`` is a fixed rotation.
    """
    ops = []
    w = len(span)
    if w == 0:
        return ops
    if offset % w:
        ops.append(MacroOp("rot", (span,), direction * offset))
    for i, q in enumerate(reversed(tuple(control))):
        shift = direction * sign * (1 << i)
        if shift % w:
            ops.append(MacroOp("crot", (span, (q,)), shift))
    return ops


def add_into(src, dst, sign: int = 1) -> MacroOp:
    return MacroOp("add", (src, dst), sign)

from __future__ import annotations

import math
from dataclasses import dataclass, field


def ceil_log2(x: int) -> int:
    """Smallest w with 2**w >= x (x >= 1)."""
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0


def value_width(max_value: int) -> int:
    """Qubits needed to store every integer in 0..max_value."""
    return max(1, ceil_log2(max_value + 1))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


class LayoutError(ValueError):
    pass


@dataclass
class RegisterLayout:
    """Named, disjoint, contiguous qubit spans.

    Registers are allocated in order from qubit 0; the core registers are the
    per-signal codeword and length registers, the tape, and the total-length
    register. Work registers (merge-tree partial sums, transfer bus, ...) are
    appended after those.
    """

    n_signals: int
    code_width: int
    len_width: int
    registers: dict = field(default_factory=dict)
    n_qubits: int = 0

    @property
    def tape_width(self) -> int:
        return self.n_signals * self.code_width

    @property
    def total_len_width(self) -> int:
        return value_width(self.n_signals * self.code_width)

    def add(self, name: str, width: int) -> tuple[int, ...]:
        if name in self.registers:
            raise LayoutError(f"register {name!r} already allocated")
        span = tuple(range(self.n_qubits, self.n_qubits + width))
        self.registers[name] = span
        self.n_qubits += width
        return span

    def __getitem__(self, name: str) -> tuple[int, ...]:
        return self.registers[name]

    def codeword(self, k: int) -> tuple[int, ...]:
        return self.registers[f"codeword_{k}"]

    def length(self, k: int) -> tuple[int, ...]:
        return self.registers[f"length_{k}"]

    @property
    def tape(self) -> tuple[int, ...]:
        return self.registers["tape"]

    @property
    def total_length(self) -> tuple[int, ...]:
        return self.registers["total_length"]

    def tape_slice(self, lo: int, hi: int) -> tuple[int, ...]:
        return self.tape[lo:hi]

    def segment(self, k: int, size: int | None = None) -> tuple[int, ...]:
        size = self.code_width if size is None else size
        return self.tape[k * size:(k + 1) * size]

    @property
    def core_qubits(self) -> int:
        return (self.n_signals * (self.code_width + self.len_width)
                + self.tape_width + self.total_len_width)

    def owner_of(self, q: int) -> str:
        for name, span in self.registers.items():
            if span and span[0] <= q <= span[-1]:
                return name
        raise LayoutError(f"qubit {q} outside layout")


def make_layout(n_signals: int, code, parallel: bool = True) -> RegisterLayout:
    """Allocate codeword, length, tape and total-length registers.

    With ``parallel=True`` the signal count must be a power of two, and the
    partial-sum registers of the merge tree are appended (the root sum reuses
    the total-length register).
    """
    if n_signals < 1:
        raise LayoutError("need at least one signal")
    if parallel and not is_power_of_two(n_signals):
        raise LayoutError(f"parallel encoding needs a power-of-two signal count, got {n_signals}")
    lay = RegisterLayout(n_signals, code.l_max, code.len_reg_width)
    for k in range(n_signals):
        lay.add(f"codeword_{k}", code.l_max)
    for k in range(n_signals):
        lay.add(f"length_{k}", code.len_reg_width)
    lay.add("tape", lay.tape_width)
    lay.add("total_length", lay.total_len_width)
    if parallel:
        rounds = n_signals.bit_length() - 1
        for j in range(1, rounds):
            width = value_width((1 << j) * code.l_max)
            for p in range(n_signals >> j):
                lay.add(f"partial_{j}_{p}", width)
    return lay

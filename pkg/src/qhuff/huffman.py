"""Classical Huffman machinery over an eigenvalue distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Sequence

PROB_TOL = 1e-12
ORACLE_MAX_SYMBOLS = 8


class DistributionError(ValueError):
    """Raised for probability vectors that are not distributions."""


class MalformedStreamError(ValueError):
    """Raised when a bit stream cannot be parsed with a prefix code."""


def _is_exact(values: Sequence) -> bool:
    return all(isinstance(v, Rational) for v in values)


def validate_dist(probs: Sequence) -> tuple:
    """Check non-negativity and normalisation; return the probabilities as a tuple."""
    probs = tuple(probs)
    if len(probs) == 0:
        raise DistributionError("distribution needs at least one entry")
    for p in probs:
        if p < 0:
            raise DistributionError(f"negative probability {p}")
    total = sum(probs)
    if _is_exact(probs):
        if total != 1:
            raise DistributionError(f"probabilities sum to {total}, not 1")
    elif abs(float(total) - 1.0) > PROB_TOL:
        raise DistributionError(f"probabilities sum to {float(total)!r}, not 1")
    return probs


def shannon_entropy(probs: Sequence) -> float:
    """Entropy in bits, with 0 log 0 = 0."""
    return -sum(float(p) * math.log2(float(p)) for p in probs if p > 0)


@dataclass(frozen=True)
class HuffmanCode:
    codewords: tuple[str, ...]
    probs: tuple

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.codewords)

    @property
    def n(self) -> int:
        return len(self.codewords)

    @property
    def l_max(self) -> int:
        return max(self.lengths)

    @property
    def l_min(self) -> int:
        return min(self.lengths)

    @property
    def avg_len(self) -> float:
        return float(average_length(self, self.probs))

    @property
    def len_reg_width(self) -> int:
        # wide enough to hold every value 1..l_max
        return max(1, math.ceil(math.log2(self.l_max + 1)))

    def length_variance(self) -> float:
        mean = self.avg_len
        return sum(float(p) * (l - mean) ** 2 for p, l in zip(self.probs, self.lengths))


def build_code(probs: Sequence) -> HuffmanCode:
    """Build a Huffman code with a deterministic tie-break.

    The work list holds ``(weight, creation_order)`` nodes. The two smallest
    nodes in that lexicographic order are merged, and the earlier-created one
    becomes the 0-branch. Weights within ``PROB_TOL`` count as equal unless
    every input is an exact rational.
    """
    probs = validate_dist(probs)
    n = len(probs)
    if n == 1:
        return HuffmanCode(("0",), probs)

    tol = 0 if _is_exact(probs) else PROB_TOL
    # node: [weight, order, children]
    live = [(probs[i], i, None) for i in range(n)]
    order = n

    def before(a, b):
        if a[0] < b[0] - tol:
            return True
        if abs(a[0] - b[0]) <= tol:
            return a[1] < b[1]
        return False

    def pop_min():
        best = 0
        for k in range(1, len(live)):
            if before(live[k], live[best]):
                best = k
        return live.pop(best)

    while len(live) > 1:
        a = pop_min()
        b = pop_min()
        zero, one = (a, b) if a[1] < b[1] else (b, a)
        live.append((a[0] + b[0], order, (zero, one)))
        order += 1

    codes = [""] * n
    stack = [(live[0], "")]
    while stack:
        node, prefix = stack.pop()
        if node[2] is None:
            codes[node[1]] = prefix
        else:
            stack.append((node[2][0], prefix + "0"))
            stack.append((node[2][1], prefix + "1"))
    return HuffmanCode(tuple(codes), probs)


def code_from_codewords(codewords: Sequence[str], probs: Sequence) -> HuffmanCode:
    """Wrap explicit codewords (used for hand-built prefix codes in tests)."""
    if len(codewords) != len(probs):
        raise ValueError("arity mismatch between codewords and probabilities")
    return HuffmanCode(tuple(codewords), tuple(probs))


def kraft_sum(code: HuffmanCode) -> Fraction:
    return sum((Fraction(1, 2 ** l) for l in code.lengths), Fraction(0))


def is_prefix_free(codewords: Sequence[str]) -> bool:
    words = sorted(codewords)
    return all(not words[i + 1].startswith(words[i]) for i in range(len(words) - 1))


def average_length(code: HuffmanCode, probs: Sequence):
    if len(probs) != code.n:
        raise ValueError(f"arity mismatch: {code.n} codewords, {len(probs)} probabilities")
    return sum(p * l for p, l in zip(probs, code.lengths))


def decode_prefix(bits: str, code: HuffmanCode) -> tuple[tuple[int, ...], int]:
    """Split a bit string into codeword indices.

    Returns the decoded symbols and the number of trailing bits that form an
    incomplete (but still extendable) codeword.
    """
    lookup = {w: i for i, w in enumerate(code.codewords)}
    prefixes = {w[:k] for w in code.codewords for k in range(len(w))}
    out = []
    cur = ""
    for b in bits:
        if b not in "01":
            raise MalformedStreamError(f"not a bit: {b!r}")
        cur += b
        if cur in lookup:
            out.append(lookup[cur])
            cur = ""
        elif cur not in prefixes:
            raise MalformedStreamError(f"{cur!r} is not a prefix of any codeword")
    return tuple(out), len(cur)


@lru_cache(maxsize=None)
def _full_tree_depths(n: int) -> frozenset:
    """Leaf-depth multisets (sorted tuples) of all full binary trees with n leaves."""
    if n == 1:
        return frozenset({(0,)})
    out = set()
    for shape in _full_tree_depths(n - 1):
        for k in set(shape):
            depths = list(shape)
            depths.remove(k)
            depths.extend((k + 1, k + 1))
            out.add(tuple(sorted(depths)))
    return frozenset(out)


def optimal_length_oracle(probs: Sequence):
    """Brute-force minimal expected codeword length over all binary code trees."""
    probs = validate_dist(probs)
    n = len(probs)
    if n > ORACLE_MAX_SYMBOLS:
        raise ValueError(f"oracle is exhaustive; refusing n={n} > {ORACLE_MAX_SYMBOLS}")
    if n == 1:
        return probs[0] * 1
    desc = sorted(probs, reverse=True)
    best = None
    for depths in _full_tree_depths(n):
        cost = sum(p * l for p, l in zip(desc, depths))
        if best is None or cost < best:
            best = cost
    return best

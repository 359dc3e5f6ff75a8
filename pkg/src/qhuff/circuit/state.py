from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRUNE = 1e-13


@dataclass
class SparseState:
    """Amplitudes on classical basis strings.

    ``bits[r]`` is the basis string of row ``r`` (one byte per qubit) and
    ``amps[r]`` its amplitude. ``batch[r]`` tags rows that belong to
    independent input blocks simulated side by side; each batch is a separate
    normalised state, and every circuit here acts row by row.
    """

    bits: np.ndarray
    amps: np.ndarray
    batch: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        self.amps = np.asarray(self.amps, dtype=complex)
        self.batch = np.asarray(self.batch, dtype=np.int64)

    @classmethod
    def from_dict(cls, branches: dict, n_qubits: int | None = None) -> "SparseState":
        keys = list(branches)
        n = n_qubits if n_qubits is not None else len(keys[0])
        bits = np.array([[int(c) for c in k] for k in keys], dtype=np.uint8).reshape(len(keys), n)
        return cls(bits, np.array([branches[k] for k in keys]), np.zeros(len(keys), dtype=np.int64))

    def to_dict(self, batch: int = 0) -> dict:
        out = {}
        for row, a, b in zip(self.bits, self.amps, self.batch):
            if b == batch:
                key = "".join(map(str, row))
                out[key] = out.get(key, 0) + a
        return out

    @property
    def n_rows(self) -> int:
        return len(self.amps)

    @property
    def n_qubits(self) -> int:
        return self.bits.shape[1]

    @property
    def n_batches(self) -> int:
        return int(self.batch.max()) + 1 if len(self.batch) else 0

    def copy(self) -> "SparseState":
        return SparseState(self.bits.copy(), self.amps.copy(), self.batch.copy())

    def norms(self) -> np.ndarray:
        return np.bincount(self.batch, weights=np.abs(self.amps) ** 2, minlength=self.n_batches)

    def prune(self, threshold: float = PRUNE) -> "SparseState":
        keep = np.abs(self.amps) >= threshold
        return SparseState(self.bits[keep], self.amps[keep], self.batch[keep])

    def select(self, rows) -> "SparseState":
        return SparseState(self.bits[rows], self.amps[rows], self.batch[rows])

    def values(self, span) -> np.ndarray:
        from .kernels import register_values
        return register_values(self.bits, np.asarray(span, dtype=np.int64))

    def canonical(self) -> "SparseState":
        """Merge duplicate rows and sort, giving a comparable representation."""
        keys = row_keys(self.bits, self.batch)
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        amps = np.zeros(len(uniq), dtype=complex)
        np.add.at(amps, inv.ravel(), self.amps)
        out = SparseState(self.bits[first], amps, self.batch[first])
        return out.prune()


def row_keys(bits: np.ndarray, *labels: np.ndarray) -> np.ndarray:
    """Hashable fixed-width byte keys for (labels..., bit row) tuples."""
    packed = np.packbits(bits, axis=1)
    parts = [np.asarray(lbl, dtype=">i8").reshape(-1, 1).view(np.uint8) for lbl in labels]
    mat = np.ascontiguousarray(np.concatenate(parts + [packed], axis=1))
    return mat.view(np.dtype((np.void, mat.shape[1]))).ravel()


def group_ids(bits: np.ndarray, *labels: np.ndarray) -> tuple[np.ndarray, int]:
    keys = row_keys(bits, *labels)
    _, inv = np.unique(keys, return_inverse=True)
    inv = inv.ravel()
    return inv, int(inv.max()) + 1 if len(inv) else 0

"""Small-Hilbert-space linear algebra: ensembles, spectra, entropy, fidelity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .huffman import PROB_TOL, shannon_entropy

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
DEGENERACY_GAP = 1e-9
NULL_EIGENVALUE = 1e-12
SUPPORT_TOL = 1e-12


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class Ensemble:
    """Pure-state source: unit vectors ``states[j]`` emitted with ``probs[j]``."""

    states: tuple[np.ndarray, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.states) == 0 or len(self.states) != len(self.probs):
            raise EnsembleError("need one probability per signal and at least one signal")
        dim = len(self.states[0])
        if dim < 2 or dim & (dim - 1):
            raise EnsembleError(f"dimension {dim} is not a power of 2 (>= 2)")
        vecs = []
        for s in self.states:
            v = np.asarray(s, dtype=complex)
            if v.shape != (dim,):
                raise EnsembleError("all signals must share one dimension")
            if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
                raise EnsembleError(f"signal norm {np.linalg.norm(v)!r} is not 1")
            v.setflags(write=False)
            vecs.append(v)
        probs = tuple(float(p) for p in self.probs)
        if any(p < 0 for p in probs):
            raise EnsembleError("negative emission probability")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise EnsembleError(f"emission probabilities sum to {sum(probs)!r}")
        object.__setattr__(self, "states", tuple(vecs))
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return len(self.states[0])

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.dim)))

    def __len__(self):
        return len(self.states)


def density_from_ensemble(e: Ensemble) -> np.ndarray:
    rho = np.zeros((e.dim, e.dim), dtype=complex)
    for u, q in zip(e.states, e.probs):
        rho += q * np.outer(u, u.conj())
    return rho


def check_density(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > NORM_TOL:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -NORM_TOL:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def _canonical_basis(vectors: np.ndarray) -> np.ndarray:
    """Echelon-form orthonormal basis of span(vectors) with positive real pivots.

    Projects computational basis vectors onto the subspace in index order and
    Gram-Schmidts the independent ones.
    """
    d, k = vectors.shape
    q, _ = np.linalg.qr(vectors)
    proj = q @ q.conj().T
    basis = []
    for c in range(d):
        if len(basis) == k:
            break
        v = proj[:, c].copy()
        for b in basis:
            v -= (b.conj() @ v) * b
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            basis.append(v / nrm)
    return np.stack(basis, axis=1)


@dataclass(frozen=True)
class Spectrum:
    """Descending eigenvalues and matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column i is |phi_i>

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigendecompose(rho: np.ndarray) -> Spectrum:
    """Diagonalise a density matrix with a deterministic eigenbasis.

    Eigenvalues closer than ``DEGENERACY_GAP`` form one cluster; each cluster is
    re-expressed in the echelon basis produced by ``_canonical_basis``.
    """
    rho = check_density(rho)
    vals, vecs = np.linalg.eigh(rho)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    out_vals = np.empty_like(vals)
    out_vecs = np.empty_like(vecs)
    i = 0
    d = len(vals)
    while i < d:
        j = i + 1
        while j < d and vals[j - 1] - vals[j] < DEGENERACY_GAP:
            j += 1
        out_vecs[:, i:j] = _canonical_basis(vecs[:, i:j])
        out_vals[i:j] = vals[i:j].mean()
        i = j
    out_vals[np.abs(out_vals) < NULL_EIGENVALUE] = 0.0
    out_vals = np.clip(out_vals, 0.0, None)
    return Spectrum(out_vals, out_vecs)


def von_neumann_entropy(rho: np.ndarray) -> float:
    return shannon_entropy(eigendecompose(rho).eigenvalues)


def eigenbasis_coefficients(u: np.ndarray, s: Spectrum) -> np.ndarray:
    """Coefficients ``c_i = <phi_i|u>``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (s.dim,):
        raise ValueError(f"vector of length {u.shape} does not match dimension {s.dim}")
    return s.eigenvectors.conj().T @ u


def fidelity(u: np.ndarray, rho_out: np.ndarray) -> float:
    u = np.asarray(u, dtype=complex)
    rho_out = np.asarray(rho_out, dtype=complex)
    if rho_out.shape != (len(u), len(u)):
        raise ValueError("dimension mismatch between state and density matrix")
    return float(np.real(u.conj() @ rho_out @ u))


def average_fidelity(e: Ensemble, outputs: Sequence[np.ndarray]) -> float:
    if len(outputs) != len(e):
        raise ValueError(f"expected {len(e)} outputs, got {len(outputs)}")
    return sum(q * fidelity(u, r) for u, q, r in zip(e.states, e.probs, outputs))


@dataclass(frozen=True)
class SourceModel:
    """Everything the coding layers need about a source.

    ``symbols[k]`` is the eigenvector index carrying codeword ``k``;
    ``coeffs[j, k]`` is the amplitude of signal ``j`` on that eigenvector.
    """

    ensemble: Ensemble
    spectrum: Spectrum
    symbols: tuple[int, ...]
    coeffs: np.ndarray
    entropy: float
    code: object = field(default=None)

    @property
    def symbol_probs(self) -> tuple[float, ...]:
        p = [float(self.spectrum.eigenvalues[i]) for i in self.symbols]
        total = sum(p)
        return tuple(x / total for x in p)


def source_model(e: Ensemble) -> SourceModel:
    """Diagonalise the ensemble and build its Huffman code over the supported eigenvectors."""
    from .huffman import build_code

    spec = eigendecompose(density_from_ensemble(e))
    full = np.stack([eigenbasis_coefficients(u, spec) for u in e.states])
    support = np.abs(full) ** 2 > SUPPORT_TOL
    keep = tuple(
        i for i in range(e.dim)
        if spec.eigenvalues[i] > NULL_EIGENVALUE or support[:, i].any()
    )
    coeffs = full[:, keep]
    model = SourceModel(e, spec, keep, coeffs, von_neumann_entropy(density_from_ensemble(e)))
    code = build_code(model.symbol_probs)
    object.__setattr__(model, "code", code)
    return model

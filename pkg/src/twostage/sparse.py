"""Greedy sparse approximation over a self-adaptive dictionary.

:func:`eomp` orthonormalizes every remaining atom against each newly chosen
one, so a chosen atom arrives already orthonormal and its coefficient is a
single inner product. :func:`omp_baseline` is classic OMP with a
least-squares refit, kept as a reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dictionary import Dictionary

#: atoms whose norm falls below this during orthonormalization are dropped
DROP_TOL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    epsilon_sq: float
    termination_ratio: float = 0.0
    max_atoms: int | None = None

    def __post_init__(self):
        if self.epsilon_sq < 0:
            raise ValueError("epsilon_sq must be non-negative")
        if not 0.0 <= self.termination_ratio < 1.0:
            raise ValueError("termination ratio must lie in [0, 1)")

    @classmethod
    def from_quantizer(cls, q1: float, termination_ratio: float,
                       epsilon_factor: float = 1.2, max_atoms: int | None = None) -> "SolverConfig":
        """Fidelity target ``epsilon_factor * q1**2 / 12``; the factor must exceed 1."""
        if epsilon_factor <= 1.0:
            raise ValueError("epsilon_factor must be > 1 so that epsilon^2 > q1^2/12")
        return cls(epsilon_factor * q1 * q1 / 12.0, termination_ratio, max_atoms)


@dataclass
class SparseSolution:
    chosen: list[int]
    B: np.ndarray
    coeffs: np.ndarray
    residual: np.ndarray
    terminated_early: bool = False
    residual_norms: list[float] = field(default_factory=list)

    @property
    def n_atoms(self) -> int:
        return len(self.chosen)


def _check_input(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    scale = max(1.0, float(np.linalg.norm(x)))
    if abs(float(x.mean())) > 1e-9 * scale:
        raise ValueError("input block must be mean-removed")
    return x


def _atoms_of(dictionary) -> tuple[np.ndarray, np.ndarray]:
    """Accept a :class:`Dictionary` or a bare ``(N, M)`` matrix of unit columns."""
    if isinstance(dictionary, Dictionary):
        idx = dictionary.valid_indices()
        return dictionary.atoms, idx
    atoms = np.asarray(dictionary, dtype=np.float64)
    norms = np.linalg.norm(atoms, axis=0)
    return atoms, np.flatnonzero(norms > 0)


def _should_stop(norm_sq: float, prev_norm: float, config: SolverConfig, n: int) -> tuple[bool, bool]:
    """Return ``(stop, early)``; fidelity wins when both tests fire."""
    if norm_sq <= n * config.epsilon_sq:
        return True, False
    new_norm = math.sqrt(norm_sq)
    if prev_norm > 0 and (prev_norm - new_norm) / prev_norm < config.termination_ratio:
        return True, True
    return False, False


def eomp(x, dictionary, config: SolverConfig, callback=None) -> SparseSolution:
    """Sparse approximation of mean-removed ``x`` with embedded orthonormalization.

    ``callback(remaining, remaining_idx, basis)`` is invoked after each
    candidate update, before selection; it receives live arrays and must not
    modify them.
    """
    x = _check_input(x)
    n = x.shape[0]
    atoms, idx = _atoms_of(dictionary)
    max_atoms = n if config.max_atoms is None else config.max_atoms
    remaining = atoms[:, idx].copy()
    r = x.copy()
    chosen: list[int] = []
    basis: list[np.ndarray] = []
    coeffs: list[float] = []
    norm_sq = float(r @ r)
    norms = [math.sqrt(norm_sq)]
    early = False
    if norm_sq <= n * config.epsilon_sq:
        idx = idx[:0]

    while idx.size and len(chosen) < max_atoms:
        if basis:
            b = basis[-1]
            remaining -= np.outer(b, b @ remaining)
            lengths = np.sqrt(np.einsum("ij,ij->j", remaining, remaining))
            keep = lengths >= DROP_TOL
            if not keep.all():
                remaining = remaining[:, keep]
                idx = idx[keep]
                lengths = lengths[keep]
                if not idx.size:
                    break
            remaining /= lengths
        if callback is not None:
            callback(remaining, idx, basis)
        corr = remaining.T @ r
        # argmax returns the first maximum; idx is ascending, so ties go to the smaller index
        j = int(np.argmax(np.abs(corr)))
        c = float(corr[j])
        if c == 0.0:
            break
        a = remaining[:, j].copy()
        r -= c * a
        chosen.append(int(idx[j]))
        basis.append(a)
        coeffs.append(c)
        remaining = np.delete(remaining, j, axis=1)
        idx = np.delete(idx, j)
        prev = norms[-1]
        norm_sq = float(r @ r)
        norms.append(math.sqrt(norm_sq))
        stop, early = _should_stop(norm_sq, prev, config, n)
        if stop:
            break

    B = np.column_stack(basis) if basis else np.zeros((n, 0))
    return SparseSolution(chosen, B, np.asarray(coeffs), r, early, norms)


def omp_baseline(x, dictionary, config: SolverConfig) -> SparseSolution:
    """Classic OMP: correlate with the original atoms, refit all weights by least squares."""
    x = _check_input(x)
    n = x.shape[0]
    atoms, idx = _atoms_of(dictionary)
    max_atoms = n if config.max_atoms is None else config.max_atoms
    available = np.ones(atoms.shape[1], dtype=bool)
    mask = np.zeros_like(available)
    mask[idx] = True
    available &= mask
    r = x.copy()
    chosen: list[int] = []
    norm_sq = float(r @ r)
    norms = [math.sqrt(norm_sq)]
    early = False
    if norm_sq <= n * config.epsilon_sq:
        available[:] = False

    while available.any() and len(chosen) < max_atoms:
        corr = np.abs(atoms.T @ r)
        corr[~available] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 0.0:
            break
        chosen.append(j)
        available[j] = False
        sub = atoms[:, chosen]
        w, *_ = np.linalg.lstsq(sub, x, rcond=None)
        r = x - sub @ w
        prev = norms[-1]
        norm_sq = float(r @ r)
        norms.append(math.sqrt(norm_sq))
        stop, early = _should_stop(norm_sq, prev, config, n)
        if stop:
            break

    if chosen:
        B, kept = orthonormalize_sequence(atoms[:, chosen])
        chosen = [chosen[i] for i in kept]
    else:
        B = np.zeros((n, 0))
    coeffs = B.T @ x
    return SparseSolution(chosen, B, coeffs, x - B @ coeffs, early, norms)


def orthonormalize_sequence(raw: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Replay the one-step recursion on columns of ``raw`` in order.

    Each column is updated against every previously accepted orthonormal
    column, renormalizing after each step. Columns that collapse below
    ``DROP_TOL`` are skipped. Returns the orthonormal matrix and the
    positions of the accepted columns. Encoder and decoder both rebuild the
    first-stage basis through this function.
    """
    raw = np.asarray(raw, dtype=np.float64)
    n, k = raw.shape
    out = np.empty((n, k))
    kept: list[int] = []
    for i in range(k):
        a = raw[:, i].copy()
        length = math.sqrt(float(a @ a))
        if length < DROP_TOL:
            continue
        a /= length
        ok = True
        for j in range(len(kept)):
            b = out[:, j]
            a -= float(b @ a) * b
            length = math.sqrt(float(a @ a))
            if length < DROP_TOL:
                ok = False
                break
            a /= length
        if ok:
            out[:, len(kept)] = a
            kept.append(i)
    return out[:, :len(kept)].copy(), kept

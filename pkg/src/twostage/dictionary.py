"""Self-adaptive dictionary of integer-displacement candidate blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class SearchRange:
    """Inclusive displacement interval ``lo..hi`` applied to both axes."""

    lo: int = -24
    hi: int = 23

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty search range {self.lo}..{self.hi}")

    @classmethod
    def symmetric(cls, radius: int) -> "SearchRange":
        """``-radius .. radius-1`` (e.g. 24 -> -24..23, a 48x48 grid)."""
        return cls(-radius, radius - 1)

    @property
    def side(self) -> int:
        return self.hi - self.lo + 1

    @property
    def size(self) -> int:
        return self.side * self.side

    def index(self, dx: int, dy: int) -> int:
        if not (self.lo <= dx <= self.hi and self.lo <= dy <= self.hi):
            raise ValueError(f"displacement ({dx},{dy}) outside {self.lo}..{self.hi}")
        return (dy - self.lo) * self.side + (dx - self.lo)

    def displacement(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.size:
            raise ValueError(f"atom index {index} outside 0..{self.size - 1}")
        row, col = divmod(index, self.side)
        return col + self.lo, row + self.lo


@dataclass(frozen=True)
class Dictionary:
    """Candidate atoms as columns of an ``(N, M)`` matrix.

    Invalid (near-constant) candidates are stored as zero columns and keep
    their grid slot.
    """

    atoms: np.ndarray
    valid: np.ndarray
    search: SearchRange
    block_size: int
    origin: tuple[int, int] = (0, 0)
    raw_norms: np.ndarray = field(default=None, repr=False)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def index_map(self) -> dict[int, tuple[int, int]]:
        return {i: self.search.displacement(i) for i in range(self.search.size)}

    def valid_indices(self) -> np.ndarray:
        return np.flatnonzero(self.valid)


def build_dictionary(ref: np.ndarray, block_origin: tuple[int, int],
                     search: SearchRange = SearchRange(), block_size: int = 16) -> Dictionary:
    """Gather every candidate block ``ref[y+dy, x+dx]`` for the block at ``block_origin``.

    ``block_origin`` is ``(row, col)``. Support outside the frame is clamped to
    the border. Candidates are mean-removed and scaled to unit norm; those
    whose mean-removed norm is below ``1e-9 * sqrt(N)`` are flagged invalid.
    """
    ref = np.asarray(ref)
    h, w = ref.shape
    if block_size > h or block_size > w:
        raise ValueError(f"block size {block_size} exceeds frame {w}x{h}")
    row, col = block_origin
    pad = max(abs(search.lo), abs(search.hi))
    padded = np.pad(ref, pad, mode="edge")
    top = row + search.lo + pad
    left = col + search.lo + pad
    # window spans every displacement; rows of the grid are dy, columns dx
    span = search.side + block_size - 1
    region = padded[top:top + span, left:left + span]
    windows = sliding_window_view(region, (block_size, block_size))
    n = block_size * block_size
    cand = windows.reshape(search.size, n).astype(np.float64)
    cand = cand - cand.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", cand, cand))
    valid = norms >= 1e-9 * np.sqrt(n)
    cand[valid] /= norms[valid, None]
    cand[~valid] = 0.0
    return Dictionary(atoms=np.ascontiguousarray(cand.T), valid=valid, search=search,
                      block_size=block_size, origin=(row, col), raw_norms=norms)

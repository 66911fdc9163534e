"""2-D DCT basis, its orthonormalization against first-stage atoms, and residual projection."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sparse import DROP_TOL


def zigzag_order(size: int) -> list[tuple[int, int]]:
    """JPEG-style zig-zag scan of a ``size x size`` grid as ``(row, col)`` pairs."""
    order = []
    for s in range(2 * size - 1):
        diag = [(r, s - r) for r in range(size) if 0 <= s - r < size]
        # even anti-diagonals run bottom-left -> top-right
        order.extend(reversed(diag) if s % 2 == 0 else diag)
    return order


def dct_matrix(size: int) -> np.ndarray:
    """Orthonormal 1-D DCT-II matrix; row ``k`` is the k-th basis function."""
    k = np.arange(size)[:, None]
    i = np.arange(size)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * size)) * np.sqrt(2.0 / size)
    m[0] /= np.sqrt(2.0)
    return m


@lru_cache(maxsize=8)
def _dct_basis_cached(block_size: int) -> np.ndarray:
    c = dct_matrix(block_size)
    cols = [np.outer(c[u], c[v]).ravel() for u, v in zigzag_order(block_size)]
    basis = np.column_stack(cols)
    basis.setflags(write=False)
    return basis


def dct_basis(block_size: int) -> np.ndarray:
    """``(N, N)`` matrix whose columns are 2-D DCT-II basis blocks in zig-zag order.

    Column ``i`` is the raster-flattened basis block for the i-th zig-zag
    frequency, so column 0 is the constant ``1/sqrt(N)`` block.
    """
    if block_size < 1:
        raise ValueError("block size must be positive")
    return _dct_basis_cached(block_size)


@dataclass
class AlteredBasis:
    T: np.ndarray
    kept_ids: np.ndarray

    @property
    def size(self) -> int:
        return self.T.shape[1]


def orthonormalize_against(dct: np.ndarray, B: np.ndarray) -> AlteredBasis:
    """Gram-Schmidt the columns of ``dct`` (in order) against ``span(B)``.

    Each DCT vector has ``span(B)`` and all earlier survivors projected out;
    when what is left has norm below ``DROP_TOL`` the vector is dropped,
    otherwise it is renormalized and kept. Runs of independent columns are
    processed with one Householder QR each (sign-fixed so the result matches
    sequential Gram-Schmidt). The procedure is deterministic, so the decoder
    reproduces ``T`` bit-exactly from ``B``.
    """
    dct = np.asarray(dct, dtype=np.float64)
    n, m = dct.shape
    B = np.asarray(B, dtype=np.float64).reshape(n, -1)
    k = B.shape[1]
    if k == 0:
        return AlteredBasis(dct.copy(), np.arange(m))
    G = dct - B @ (B.T @ dct)
    # second pass restores orthogonality lost to cancellation
    G -= B @ (B.T @ G)
    room = n - k
    blocks: list[np.ndarray] = []
    kept: list[np.ndarray] = []
    n_kept = 0
    start = 0
    while start < m and n_kept < room:
        H = G[:, start:]
        if blocks:
            Q = np.hstack(blocks)
            H = H - Q @ (Q.T @ H)
            H -= Q @ (Q.T @ H)
        q, r = np.linalg.qr(H)
        diag = np.diag(r)
        bad = np.flatnonzero(np.abs(diag) < DROP_TOL)
        stop = int(bad[0]) if bad.size else diag.size
        stop = min(stop, room - n_kept)
        if stop:
            blocks.append(q[:, :stop] * np.sign(diag[:stop]))
            kept.append(start + np.arange(stop))
            n_kept += stop
        start += stop + 1
    if not blocks:
        return AlteredBasis(np.zeros((n, 0)), np.zeros(0, dtype=np.int64))
    return AlteredBasis(np.hstack(blocks), np.concatenate(kept))


def project_residual(r: np.ndarray, basis: AlteredBasis) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    T = basis.T if isinstance(basis, AlteredBasis) else np.asarray(basis)
    if r.shape != (T.shape[0],):
        raise ValueError(f"residual length {r.shape} does not match basis dimension {T.shape[0]}")
    return T.T @ r


def reconstruct(coeffs: np.ndarray, basis: AlteredBasis) -> np.ndarray:
    T = basis.T if isinstance(basis, AlteredBasis) else np.asarray(basis)
    return T @ np.asarray(coeffs, dtype=np.float64)

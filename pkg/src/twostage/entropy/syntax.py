"""Block syntax elements: significance map, selection orders, levels, stage-2 coefficients.

Each ``encode_*`` has a ``decode_*`` that is its exact inverse when run on a
decoder whose context table started in the same state.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .binarize import (decode_eg_bypass, decode_tu, decode_tu_eg, deinterleave,
                       encode_eg_bypass, encode_tu, encode_tu_eg, interleave)
from .engine import ArithmeticDecoder, ArithmeticEncoder, StreamError

FANOUT = 4
CELLS = FANOUT * FANOUT


# -- significance map -------------------------------------------------------

def layer_sizes(side: int) -> tuple[int, int, int]:
    """Bottom, middle and top layer sides, e.g. 48 -> (48, 12, 3)."""
    if side <= 0 or side % (FANOUT * FANOUT):
        raise ValueError(f"map side {side} must be a positive multiple of {FANOUT * FANOUT}")
    return side, side // FANOUT, side // CELLS


def significance_map(chosen: Sequence[int], side: int) -> np.ndarray:
    grid = np.zeros((side, side), dtype=np.uint8)
    for idx in chosen:
        r, c = divmod(int(idx), side)
        if r >= side:
            raise ValueError(f"atom index {idx} outside a {side}x{side} map")
        grid[r, c] = 1
    return grid


def _coarsen(grid: np.ndarray) -> np.ndarray:
    s = grid.shape[0] // FANOUT
    return grid.reshape(s, FANOUT, s, FANOUT).any(axis=(1, 3)).astype(np.uint8)


def _encode_cell_block(enc: ArithmeticEncoder, cells: np.ndarray, layer: int) -> None:
    ones = np.flatnonzero(cells.ravel())
    m = len(ones)
    encode_tu(enc, m - 1, CELLS - 1, ("cnt", layer), n_ctx=CELLS)
    first = int(ones[0])
    enc.encode_bypass_bits(first, 4)
    prev = first
    for k, pos in enumerate(ones[1:]):
        left = m - 1 - k
        gap = int(pos) - prev - 1
        encode_tu(enc, gap, CELLS - 1 - prev - left, ("run", layer), n_ctx=CELLS)
        prev = int(pos)


def _decode_cell_block(dec: ArithmeticDecoder, layer: int) -> np.ndarray:
    m = decode_tu(dec, CELLS - 1, ("cnt", layer), n_ctx=CELLS) + 1
    first = dec.decode_bypass_bits(4)
    if first + m > CELLS:
        raise StreamError("significance block overflows its 4x4 region")
    cells = np.zeros(CELLS, dtype=np.uint8)
    cells[first] = 1
    prev = first
    for k in range(m - 1):
        left = m - 1 - k
        gap = decode_tu(dec, CELLS - 1 - prev - left, ("run", layer), n_ctx=CELLS)
        prev = prev + gap + 1
        cells[prev] = 1
    return cells.reshape(FANOUT, FANOUT)


def encode_significance_map(enc: ArithmeticEncoder, grid: np.ndarray) -> None:
    """Three-layer quad-tree coding of a binary ``side x side`` grid.

    The top layer is coded cell by cell with one context per position. Each
    set upper cell then codes its 4x4 child block (depth first): number of
    ones, position of the first one as four bypass bits, then the exclusive
    gaps to each later one as truncated unary.
    """
    grid = np.asarray(grid, dtype=np.uint8)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise ValueError(f"significance map must be square, got {grid.shape}")
    _, mid_side, top_side = layer_sizes(grid.shape[0])
    mid = _coarsen(grid)
    top = _coarsen(mid)
    for pos, bit in enumerate(top.ravel()):
        enc.encode(int(bit), enc.contexts[("top", pos)])
    for tr, tc in zip(*np.nonzero(top)):
        mblock = mid[tr * FANOUT:(tr + 1) * FANOUT, tc * FANOUT:(tc + 1) * FANOUT]
        _encode_cell_block(enc, mblock, 1)
        for mr, mc in zip(*np.nonzero(mblock)):
            r = (tr * FANOUT + mr) * FANOUT
            c = (tc * FANOUT + mc) * FANOUT
            _encode_cell_block(enc, grid[r:r + FANOUT, c:c + FANOUT], 2)


def decode_significance_map(dec: ArithmeticDecoder, side: int) -> np.ndarray:
    _, mid_side, top_side = layer_sizes(side)
    grid = np.zeros((side, side), dtype=np.uint8)
    top = np.array([dec.decode(dec.contexts[("top", pos)]) for pos in range(top_side * top_side)],
                   dtype=np.uint8).reshape(top_side, top_side)
    for tr, tc in zip(*np.nonzero(top)):
        mblock = _decode_cell_block(dec, 1)
        for mr, mc in zip(*np.nonzero(mblock)):
            r = (tr * FANOUT + mr) * FANOUT
            c = (tc * FANOUT + mc) * FANOUT
            grid[r:r + FANOUT, c:c + FANOUT] = _decode_cell_block(dec, 2)
    return grid


# -- selection orders -------------------------------------------------------

def order_width(k: int) -> int:
    return (k - 1).bit_length() if k > 1 else 0


def plane_ones(k: int, plane: int) -> int:
    """How many of 0..k-1 have bit ``plane`` set (closed form, no enumeration)."""
    period = 1 << (plane + 1)
    full, rest = divmod(k, period)
    return full * (1 << plane) + max(0, rest - (1 << plane))


def orders_from_chosen(chosen: Sequence[int]) -> tuple[list[int], list[int]]:
    """Split a selection-ordered index list into raster-sorted indices and their ranks."""
    ranked = sorted(range(len(chosen)), key=lambda i: chosen[i])
    return [int(chosen[i]) for i in ranked], ranked


def chosen_from_orders(raster_indices: Sequence[int], orders: Sequence[int]) -> list[int]:
    if sorted(orders) != list(range(len(orders))):
        raise StreamError("selection orders are not a permutation")
    chosen = [0] * len(orders)
    for idx, rank in zip(raster_indices, orders):
        chosen[rank] = int(idx)
    return chosen


def encode_orders(enc: ArithmeticEncoder, orders: Sequence[int]) -> None:
    """Bit-plane coding of a permutation of ``0..K-1``, most significant plane first.

    Per plane only the zero-runs before each one are coded; the number of
    ones in a plane follows from ``K`` alone, so coding stops after the last
    one.
    """
    k = len(orders)
    if sorted(orders) != list(range(k)):
        raise ValueError("orders must be a permutation of 0..K-1")
    for plane in range(order_width(k) - 1, -1, -1):
        ones = plane_ones(k, plane)
        pos = 0
        for i, o in enumerate(orders):
            if not (o >> plane) & 1:
                continue
            encode_tu(enc, i - pos, k - pos - ones, ("ord", plane))
            ones -= 1
            pos = i + 1


def decode_orders(dec: ArithmeticDecoder, k: int) -> list[int]:
    orders = [0] * k
    for plane in range(order_width(k) - 1, -1, -1):
        ones = plane_ones(k, plane)
        pos = 0
        while ones:
            i = pos + decode_tu(dec, k - pos - ones, ("ord", plane))
            orders[i] |= 1 << plane
            ones -= 1
            pos = i + 1
    if sorted(orders) != list(range(k)):
        raise StreamError("decoded orders are not a permutation")
    return orders


# -- first-stage levels -----------------------------------------------------

def encode_levels(enc: ArithmeticEncoder, levels: Sequence[int]) -> None:
    """Levels in selection order, coded from the last chosen atom backwards.

    Magnitudes after the first are predicted from the previously coded
    magnitude (the last-chosen one from 1); the first-chosen magnitude
    minus one is coded with its own contexts. Signs are bypass bins.
    """
    levels = [int(v) for v in levels]
    if any(v == 0 for v in levels):
        raise ValueError("zero levels must be pruned before entropy coding")
    pred = 1
    for v in reversed(levels[1:]):
        a = abs(v)
        encode_tu_eg(enc, interleave(a - pred), ("lvl",))
        enc.encode_bypass(v < 0)
        pred = a
    if levels:
        v = levels[0]
        encode_tu_eg(enc, abs(v) - 1, ("lvl1",))
        enc.encode_bypass(v < 0)


def decode_levels(dec: ArithmeticDecoder, k: int) -> list[int]:
    out = [0] * k
    pred = 1
    for i in range(k - 1, 0, -1):
        a = pred + deinterleave(decode_tu_eg(dec, ("lvl",)))
        if a <= 0:
            raise StreamError("decoded non-positive level magnitude")
        out[i] = -a if dec.decode_bypass() else a
        pred = a
    if k:
        a = decode_tu_eg(dec, ("lvl1",)) + 1
        out[0] = -a if dec.decode_bypass() else a
    return out


# -- second-stage coefficients ----------------------------------------------

def _bucket(i: int) -> int:
    return i if i < 4 else 2 + i.bit_length()


def encode_stage2_coeffs(enc: ArithmeticEncoder, levels: Sequence[int]) -> None:
    """Coded-block flag, last significant position, then per-coefficient flags."""
    levels = [int(v) for v in levels]
    n = len(levels)
    if n == 0:
        return
    nz = [i for i, v in enumerate(levels) if v]
    enc.encode(bool(nz), enc.contexts[("cbf",)])
    if not nz:
        return
    last = nz[-1]
    for i in range(last):
        enc.encode(1, enc.contexts[("last", _bucket(i))])
    if last < n - 1:
        enc.encode(0, enc.contexts[("last", _bucket(last))])
    n_gt1 = 0
    for i in range(last + 1):
        v = levels[i]
        enc.encode(v != 0, enc.contexts[("sig", _bucket(i))])
        if not v:
            continue
        a = abs(v)
        enc.encode(a > 1, enc.contexts[("gt1", min(n_gt1, 3))])
        if a > 1:
            n_gt1 += 1
            enc.encode(a > 2, enc.contexts[("gt2",)])
            if a > 2:
                encode_eg_bypass(enc, a - 3)
        enc.encode_bypass(v < 0)


def decode_stage2_coeffs(dec: ArithmeticDecoder, n: int) -> list[int]:
    out = [0] * n
    if n == 0:
        return out
    if not dec.decode(dec.contexts[("cbf",)]):
        return out
    last = 0
    while last < n - 1 and dec.decode(dec.contexts[("last", _bucket(last))]):
        last += 1
    n_gt1 = 0
    for i in range(last + 1):
        if not dec.decode(dec.contexts[("sig", _bucket(i))]):
            continue
        a = 1
        if dec.decode(dec.contexts[("gt1", min(n_gt1, 3))]):
            n_gt1 += 1
            a = 2
            if dec.decode(dec.contexts[("gt2",)]):
                a = 3 + decode_eg_bypass(dec)
        out[i] = -a if dec.decode_bypass() else a
    if out[last] == 0:
        raise StreamError("last significant coefficient decoded as zero")
    return out


# -- block mean -------------------------------------------------------------

MEAN_EG_ORDER = 2


def encode_mean(enc: ArithmeticEncoder, level: int) -> None:
    encode_eg_bypass(enc, interleave(int(level)), MEAN_EG_ORDER)


def decode_mean(dec: ArithmeticDecoder) -> int:
    return deinterleave(decode_eg_bypass(dec, MEAN_EG_ORDER))

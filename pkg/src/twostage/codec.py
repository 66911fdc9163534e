"""Two-stage block codec: sparse inter approximation followed by altered-DCT residual coding.

Bitstream layout (little-endian)::

    "TSVC" u8 version u16 width u16 height u8 block_size u16 n_frames
    per frame: u8 type  u32 q1*16  u32 q2*16  u16 t*1024  i16 lo  i16 hi  u8 block_size
    per block (raster order): LEB128 payload length, arithmetic-coded payload

Every block payload is coded with a freshly initialized engine.
"""
from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import entropy
from .dictionary import Dictionary, SearchRange, build_dictionary
from .entropy import ArithmeticDecoder, ArithmeticEncoder, StreamError
from .frame_io import block_origins, pad_frame, psnr
from .quantize import dequantize_array, quantize_array
from .sparse import SolverConfig, eomp, orthonormalize_sequence
from .transform import AlteredBasis, dct_basis, orthonormalize_against

log = logging.getLogger(__name__)

MAGIC = b"TSVC"
VERSION = 1
INTRA, INTER = 0, 1
Q_SCALE = 16
T_SCALE = 1024

_GLOBAL = struct.Struct("<4sBHHBH")
_FRAME = struct.Struct("<BIIHhhB")


@dataclass(frozen=True)
class FrameHeader:
    """Per-frame coding parameters, held at their transmitted fixed-point precision."""

    q1: float
    q2: float
    t: float
    search: SearchRange = SearchRange()
    block_size: int = 16
    frame_type: int = INTER

    def __post_init__(self):
        q1 = round(self.q1 * Q_SCALE) / Q_SCALE
        q2 = round(self.q2 * Q_SCALE) / Q_SCALE
        t = round(self.t * T_SCALE) / T_SCALE
        if q1 <= 0 or q2 <= 0:
            raise ValueError(f"stepsizes must be at least 1/{Q_SCALE}: q1={self.q1}, q2={self.q2}")
        if not 0 <= t < 1:
            raise ValueError(f"termination ratio {self.t} outside [0, 1)")
        if self.block_size < 1 or self.block_size > 255:
            raise ValueError(f"unsupported block size {self.block_size}")
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)
        object.__setattr__(self, "t", t)

    def pack(self) -> bytes:
        return _FRAME.pack(self.frame_type, round(self.q1 * Q_SCALE), round(self.q2 * Q_SCALE),
                           round(self.t * T_SCALE), self.search.lo, self.search.hi, self.block_size)

    @classmethod
    def unpack(cls, buf: bytes) -> "FrameHeader":
        ftype, q1, q2, t, lo, hi, bs = _FRAME.unpack(buf)
        if ftype not in (INTRA, INTER):
            raise StreamError(f"unknown frame type {ftype}")
        try:
            return cls(q1 / Q_SCALE, q2 / Q_SCALE, t / T_SCALE, SearchRange(lo, hi), bs, ftype)
        except ValueError as exc:
            raise StreamError(f"invalid frame header: {exc}") from None


@dataclass
class BlockSyntax:
    mean_level: int
    chosen: list[int] = field(default_factory=list)
    levels: list[int] = field(default_factory=list)
    stage2: list[int] = field(default_factory=list)

    @property
    def n_atoms(self) -> int:
        return len(self.chosen)

    def significance_map(self, side: int) -> np.ndarray:
        return entropy.significance_map(self.chosen, side)

    @property
    def orders(self) -> list[int]:
        return entropy.orders_from_chosen(self.chosen)[1]


@dataclass
class EncoderParams:
    q1: float
    q2: float
    t: float
    search: SearchRange = SearchRange()
    block_size: int = 16
    epsilon_factor: float = 1.2
    #: stepsize for intra frames (mean and DCT); defaults to q2
    q_intra: float | None = None

    def header(self, frame_type: int) -> FrameHeader:
        if frame_type == INTRA:
            q = self.q_intra if self.q_intra is not None else self.q2
            return FrameHeader(q, q, self.t, self.search, self.block_size, INTRA)
        return FrameHeader(self.q1, self.q2, self.t, self.search, self.block_size, INTER)


@dataclass
class FrameStats:
    index: int
    frame_type: int
    bits: int
    psnr: float
    mean_atoms: float = 0.0


# -- shared reconstruction path ---------------------------------------------

def _quantize_mean(mean: float, q: float) -> int:
    return int(math.floor(mean / q + 0.5))


def first_stage_basis(dictionary: Dictionary, chosen: Sequence[int]) -> np.ndarray:
    """Rebuild the orthonormal first-stage atoms in transmitted selection order."""
    n = dictionary.dim
    if not len(chosen):
        return np.zeros((n, 0))
    chosen = list(chosen)
    if not dictionary.valid[chosen].all():
        raise StreamError("chosen atom refers to a degenerate candidate")
    B, kept = orthonormalize_sequence(dictionary.atoms[:, chosen])
    if len(kept) != len(chosen):
        raise StreamError("chosen atoms are linearly dependent")
    return B


def second_stage_basis(B: np.ndarray, block_size: int) -> AlteredBasis:
    return orthonormalize_against(dct_basis(block_size), B)


def synthesize(header: FrameHeader, mean_level: int, B: np.ndarray, levels,
               altered: AlteredBasis, stage2) -> np.ndarray:
    """Integer block from mean, first-stage and second-stage levels.

    Encoder and decoder both call this, so the reference buffers match exactly.
    """
    bs = header.block_size
    x = np.full(bs * bs, mean_level * header.q1)
    if B.shape[1]:
        x = x + B @ dequantize_array(levels, header.q1)
    if altered.size:
        x = x + altered.T @ dequantize_array(stage2, header.q2)
    x = np.floor(np.clip(x, 0.0, 255.0) + 0.5)
    return x.astype(np.uint8).reshape(bs, bs)


# -- block coding ------------------------------------------------------------

@dataclass
class BlockResult:
    syntax: BlockSyntax
    recon: np.ndarray
    #: unquantized eOMP atom count before zero-level pruning
    solver_atoms: int = 0
    terminated_early: bool = False


def encode_block(block: np.ndarray, ref: np.ndarray | None, origin: tuple[int, int],
                 header: FrameHeader, epsilon_factor: float = 1.2,
                 dictionary: Dictionary | None = None) -> BlockResult:
    """Code one block; ``ref`` is the reconstructed previous frame (``None`` for intra)."""
    bs = header.block_size
    raw = np.asarray(block, dtype=np.float64).reshape(-1)
    mean = float(raw.mean())
    mean_level = _quantize_mean(mean, header.q1)
    x = raw - mean_level * header.q1
    chosen: list[int] = []
    levels = np.zeros(0, dtype=np.int64)
    B = np.zeros((raw.size, 0))
    solver_atoms = 0
    early = False

    if header.frame_type == INTER:
        if ref is None:
            raise ValueError("inter block needs a reference frame")
        if dictionary is None:
            dictionary = build_dictionary(ref, origin, header.search, bs)
        config = SolverConfig.from_quantizer(header.q1, header.t, epsilon_factor)
        sol = eomp(raw - mean, dictionary, config)
        solver_atoms = sol.n_atoms
        early = sol.terminated_early
        chosen = list(sol.chosen)
        levels = quantize_array(sol.coeffs, header.q1)
        # prune zero levels; the surviving atoms' basis and coefficients change, so repeat
        while chosen:
            keep = np.flatnonzero(levels)
            if keep.size == len(chosen) and B.shape[1] == len(chosen):
                break
            chosen = [chosen[i] for i in keep]
            if not chosen:
                B = np.zeros((raw.size, 0))
                levels = levels[:0]
                break
            B, kept = orthonormalize_sequence(dictionary.atoms[:, chosen])
            chosen = [chosen[i] for i in kept]
            levels = quantize_array(B.T @ x, header.q1)

    altered = second_stage_basis(B, bs)
    r = x - B @ dequantize_array(levels, header.q1) if chosen else x
    stage2 = quantize_array(altered.T.T @ r, header.q2)
    syntax = BlockSyntax(mean_level, chosen, [int(v) for v in levels], [int(v) for v in stage2])
    recon = synthesize(header, mean_level, B, syntax.levels, altered, syntax.stage2)
    return BlockResult(syntax, recon, solver_atoms, early)


def write_block(syntax: BlockSyntax, header: FrameHeader) -> bytes:
    """Entropy-code one block's syntax with a fresh engine."""
    enc = ArithmeticEncoder()
    entropy.encode_mean(enc, syntax.mean_level)
    if header.frame_type == INTER:
        side = header.search.side
        entropy.encode_significance_map(enc, syntax.significance_map(side))
        entropy.encode_orders(enc, syntax.orders)
        entropy.encode_levels(enc, syntax.levels)
    entropy.encode_stage2_coeffs(enc, syntax.stage2)
    return enc.finish()


def decode_block(payload: bytes, ref: np.ndarray | None, origin: tuple[int, int],
                 header: FrameHeader) -> tuple[BlockSyntax, np.ndarray]:
    """Parse a block payload and rebuild its reconstruction exactly as the encoder did."""
    dec = ArithmeticDecoder(payload)
    mean_level = entropy.decode_mean(dec)
    chosen: list[int] = []
    levels: list[int] = []
    B = np.zeros((header.block_size ** 2, 0))
    if header.frame_type == INTER:
        side = header.search.side
        grid = entropy.decode_significance_map(dec, side)
        raster = np.flatnonzero(grid.ravel()).tolist()
        orders = entropy.decode_orders(dec, len(raster))
        chosen = entropy.chosen_from_orders(raster, orders)
        levels = entropy.decode_levels(dec, len(chosen))
        if chosen:
            if ref is None:
                raise StreamError("inter block without a reference frame")
            dictionary = build_dictionary(ref, origin, header.search, header.block_size)
            B = first_stage_basis(dictionary, chosen)
    altered = second_stage_basis(B, header.block_size)
    stage2 = entropy.decode_stage2_coeffs(dec, altered.size)
    syntax = BlockSyntax(mean_level, chosen, levels, stage2)
    return syntax, synthesize(header, mean_level, B, levels, altered, stage2)


# -- frames and sequences ------------------------------------------------------

def _leb128(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_leb128(stream: io.BytesIO) -> int:
    value = 0
    shift = 0
    while True:
        b = stream.read(1)
        if not b:
            raise StreamError("bitstream truncated inside a block length")
        value |= (b[0] & 0x7F) << shift
        if not b[0] & 0x80:
            return value
        shift += 7
        if shift > 28:
            raise StreamError("block length field too long")


def encode_frame(frame: np.ndarray, ref: np.ndarray | None, header: FrameHeader,
                 epsilon_factor: float = 1.2,
                 dictionaries: Sequence[Dictionary] | None = None) -> tuple[bytes, np.ndarray, list[BlockResult]]:
    """Code one padded frame; returns (frame bytes incl. header, reconstruction, per-block results)."""
    frame = np.asarray(frame, dtype=np.uint8)
    bs = header.block_size
    h, w = frame.shape
    if header.frame_type == INTER and ref is None:
        raise ValueError("inter frame needs a reference")
    if ref is not None and ref.shape != frame.shape:
        raise StreamError(f"reference shape {ref.shape} does not match frame {frame.shape}")
    recon = np.empty_like(frame)
    out = bytearray(header.pack())
    results = []
    for i, (r, c) in enumerate(block_origins(h, w, bs)):
        dic = dictionaries[i] if dictionaries is not None else None
        res = encode_block(frame[r:r + bs, c:c + bs], ref, (r, c), header, epsilon_factor, dic)
        payload = write_block(res.syntax, header)
        out += _leb128(len(payload))
        out += payload
        recon[r:r + bs, c:c + bs] = res.recon
        results.append(res)
    return bytes(out), recon, results


def decode_frame(stream: io.BytesIO, shape: tuple[int, int], ref: np.ndarray | None,
                 block_size: int) -> tuple[FrameHeader, np.ndarray]:
    raw = stream.read(_FRAME.size)
    if len(raw) < _FRAME.size:
        raise StreamError("bitstream truncated inside a frame header")
    header = FrameHeader.unpack(raw)
    if header.block_size != block_size:
        raise StreamError("frame block size differs from the sequence header")
    if header.frame_type == INTER and (ref is None or ref.shape != shape):
        raise StreamError("inter frame has no matching reference")
    recon = np.empty(shape, dtype=np.uint8)
    bs = header.block_size
    for r, c in block_origins(shape[0], shape[1], bs):
        n = _read_leb128(stream)
        payload = stream.read(n)
        if len(payload) < n:
            raise StreamError("bitstream truncated inside a block payload")
        _, recon[r:r + bs, c:c + bs] = decode_block(payload, ref, (r, c), header)
    return header, recon


@dataclass
class EncodeResult:
    bitstream: bytes
    recons: list[np.ndarray]
    stats: list[FrameStats]
    headers: list[FrameHeader]


def encode_sequence(frames: Sequence[np.ndarray], params: EncoderParams,
                    width: int | None = None, height: int | None = None) -> EncodeResult:
    """IPPP coding: intra first frame, every later frame predicted from the previous reconstruction.

    ``frames`` may be unpadded; ``width``/``height`` default to the first
    frame's size and PSNR is measured over that visible area.
    """
    if not len(frames):
        raise ValueError("no frames to encode")
    height = height or frames[0].shape[0]
    width = width or frames[0].shape[1]
    padded = [pad_frame(np.asarray(f, dtype=np.uint8), params.block_size) for f in frames]
    stream = bytearray(_GLOBAL.pack(MAGIC, VERSION, width, height, params.block_size, len(frames)))
    recons, stats, headers = [], [], []
    ref = None
    for i, frame in enumerate(padded):
        ftype = INTRA if i == 0 else INTER
        header = params.header(ftype)
        data, recon, results = encode_frame(frame, ref, header, params.epsilon_factor)
        bits = 8 * len(data) + (8 * _GLOBAL.size if i == 0 else 0)
        quality = psnr(frame[:height, :width], recon[:height, :width])
        atoms = float(np.mean([res.syntax.n_atoms for res in results]))
        stats.append(FrameStats(i, ftype, bits, quality, atoms))
        log.info("frame %d type=%d bits=%d psnr=%.3f atoms=%.2f", i, ftype, bits, quality, atoms)
        stream += data
        recons.append(recon)
        headers.append(header)
        ref = recon
    return EncodeResult(bytes(stream), recons, stats, headers)


def decode_sequence(bitstream: bytes) -> tuple[list[np.ndarray], list[FrameHeader], tuple[int, int]]:
    """Decode every frame; returns padded reconstructions, headers and (width, height)."""
    stream = io.BytesIO(bitstream)
    raw = stream.read(_GLOBAL.size)
    if len(raw) < _GLOBAL.size:
        raise StreamError("bitstream shorter than its sequence header")
    magic, version, width, height, bs, count = _GLOBAL.unpack(raw)
    if magic != MAGIC:
        raise StreamError("not a two-stage bitstream (bad magic)")
    if version != VERSION:
        raise StreamError(f"unsupported bitstream version {version}")
    if width == 0 or height == 0 or bs == 0:
        raise StreamError("invalid sequence dimensions")
    shape = (height + (-height % bs), width + (-width % bs))
    frames, headers = [], []
    ref = None
    for _ in range(count):
        header, recon = decode_frame(stream, shape, ref, bs)
        frames.append(recon)
        headers.append(header)
        ref = recon
    if stream.read(1):
        raise StreamError("trailing data after the last frame")
    return frames, headers, (width, height)

"""Command-line driver and rate-distortion sweep over (q1, q2, t)."""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codec import (INTER, INTRA, EncoderParams, FrameHeader, decode_sequence, encode_frame,
                    encode_sequence)
from .dictionary import SearchRange, build_dictionary
from .entropy import StreamError
from .frame_io import block_origins, load_raw_video, pad_frame, psnr, write_raw_video

log = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_STREAM = 3

#: stage-2 stepsize used to switch the second stage off (all levels quantize to zero)
ONE_STAGE_Q2 = 1 << 20


@dataclass
class SweepRow:
    q1: float
    q2: float
    t: float
    bits: float
    psnr: float
    atoms: float = 0.0
    pareto: bool = False


def pareto_front(rows: Iterable[SweepRow]) -> list[SweepRow]:
    """Rows not beaten in both rate and PSNR by any other row, sorted by rate."""
    ordered = sorted(rows, key=lambda r: (r.bits, -r.psnr))
    front: list[SweepRow] = []
    best = -math.inf
    for row in ordered:
        if row.psnr > best:
            front.append(row)
            best = row.psnr
    return front


def psnr_at_rate(front: Sequence[SweepRow], bits: float) -> float:
    """Linear interpolation of PSNR along a Pareto front; NaN outside its rate span."""
    rates = np.array([r.bits for r in front], dtype=np.float64)
    quality = np.array([r.psnr for r in front], dtype=np.float64)
    if not len(rates) or bits < rates[0] or bits > rates[-1]:
        return math.nan
    return float(np.interp(bits, rates, quality))


def _sweep_point(args) -> SweepRow:
    frames, ref, point, search, block_size, epsilon_factor, dictionaries = args
    q1, q2, t = point
    header = FrameHeader(q1, q2, t, search, block_size, INTER)
    bits, quality, atoms = [], [], []
    for i, frame in enumerate(frames):
        data, recon, results = encode_frame(frame, ref, header, epsilon_factor,
                                            dictionaries if i == 0 else None)
        bits.append(8 * len(data))
        quality.append(psnr(frame, recon))
        atoms.append(np.mean([r.syntax.n_atoms for r in results]))
        ref = recon
    return SweepRow(header.q1, header.q2, header.t, float(np.mean(bits)),
                    float(np.mean(quality)), float(np.mean(atoms)))


def rd_sweep(frames: Sequence[np.ndarray], q1s: Sequence[float], q2s: Sequence[float],
             ts: Sequence[float], search: SearchRange = SearchRange(), block_size: int = 16,
             epsilon_factor: float = 1.2, q_intra: float = 4.0, jobs: int = 1) -> list[SweepRow]:
    """Evaluate every (q1, q2, t) on the inter frames of ``frames``.

    The first frame is intra coded once at ``q_intra`` and shared by all grid
    points, so every point predicts from the same reference. Rates are
    bits per inter frame (frame header and block length fields included);
    PSNR is averaged over the inter frames. Pareto rows are flagged.
    """
    grid = list(itertools.product(q1s, q2s, ts))
    if not grid:
        raise ValueError("empty parameter grid")
    if len(frames) < 2:
        raise ValueError("a sweep needs an intra frame and at least one inter frame")
    padded = [pad_frame(np.asarray(f, dtype=np.uint8), block_size) for f in frames]
    intra = FrameHeader(q_intra, q_intra, 0.0, search, block_size, INTRA)
    _, ref, _ = encode_frame(padded[0], None, intra, epsilon_factor)
    dictionaries = None
    if search.size <= 1024:
        h, w = ref.shape
        dictionaries = [build_dictionary(ref, o, search, block_size)
                        for o in block_origins(h, w, block_size)]
    tasks = [(padded[1:], ref, p, search, block_size, epsilon_factor, dictionaries) for p in grid]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    for row in pareto_front(rows):
        row.pareto = True
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["q1", "q2", "t", "bits_per_frame", "psnr_db", "atoms_per_block", "pareto"])
    for r in rows:
        writer.writerow([r.q1, r.q2, r.t, f"{r.bits:.1f}", f"{r.psnr:.4f}", f"{r.atoms:.3f}",
                         int(r.pareto)])


# -- command line ------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")


def _grid_spec(text: str) -> tuple[str, list[float]]:
    name, sep, values = text.partition("=")
    if not sep or name not in ("q1", "q2", "t"):
        raise argparse.ArgumentTypeError(f"grid entries look like q1=4,8,16 (got {text!r})")
    return name, _float_list(values)


def _add_video_args(p: argparse.ArgumentParser, frames_required: bool = True) -> None:
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--width", required=True, type=int)
    p.add_argument("--height", required=True, type=int)
    p.add_argument("--frames", required=frames_required, type=int)
    p.add_argument("--chroma", default="420", choices=["400", "420", "422", "444"],
                   help="chroma layout of the raw file; chroma planes are skipped")


def _add_coding_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--search-range", type=int, default=24,
                   help="R gives displacements -R..R-1; 2R must be a multiple of 16")
    p.add_argument("--epsilon-factor", type=float, default=1.2)
    p.add_argument("--q-intra", type=float, default=None,
                   help="stepsize for the intra frame (default: q2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twostage", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="encode a raw video into a bitstream")
    _add_video_args(enc)
    _add_coding_args(enc)
    enc.add_argument("--output", required=True, type=Path)
    enc.add_argument("--q1", type=float, required=True)
    enc.add_argument("--q2", type=float, required=True)
    enc.add_argument("--t", type=float, required=True)

    dec = sub.add_parser("decode", help="decode a bitstream into a raw video")
    dec.add_argument("--input", required=True, type=Path)
    dec.add_argument("--output", required=True, type=Path)
    dec.add_argument("--chroma", default="420", choices=["400", "420", "422", "444"])

    ps = sub.add_parser("psnr", help="per-frame PSNR between two raw videos")
    _add_video_args(ps)
    ps.add_argument("--reference", required=True, type=Path)

    sw = sub.add_parser("rd-sweep", help="encode over a (q1, q2, t) grid")
    _add_video_args(sw)
    _add_coding_args(sw)
    sw.add_argument("--grid", nargs="+", type=_grid_spec, required=True,
                    metavar="NAME=V1,V2", help="e.g. --grid q1=4,8 q2=8,16 t=0.05,0.1")
    sw.add_argument("--csv", type=Path, help="write rows here instead of standard output")
    sw.add_argument("--jobs", type=int, default=1)
    return parser


def _search(args) -> SearchRange:
    if args.search_range <= 0:
        raise ValueError("search range must be positive")
    return SearchRange.symmetric(args.search_range)


def _cmd_encode(args) -> int:
    frames = load_raw_video(args.input, args.width, args.height, args.frames,
                            args.block_size, args.chroma)
    params = EncoderParams(args.q1, args.q2, args.t, _search(args), args.block_size,
                           args.epsilon_factor, args.q_intra)
    result = encode_sequence(frames, params, args.width, args.height)
    args.output.write_bytes(result.bitstream)
    out = csv.writer(sys.stdout)
    out.writerow(["frame", "type", "bits", "psnr_db"])
    for s in result.stats:
        out.writerow([s.index, "I" if s.frame_type == INTRA else "P", s.bits, repr(s.psnr)])
    return 0


def _cmd_decode(args) -> int:
    frames, headers, (width, height) = decode_sequence(args.input.read_bytes())
    write_raw_video(args.output, frames, width, height, args.chroma)
    print(f"decoded {len(frames)} frames {width}x{height}", file=sys.stderr)
    return 0


def _cmd_psnr(args) -> int:
    count = args.frames
    a = load_raw_video(args.input, args.width, args.height, count, 1, args.chroma)
    b = load_raw_video(args.reference, args.width, args.height, count, 1, args.chroma)
    out = csv.writer(sys.stdout)
    out.writerow(["frame", "psnr_db"])
    values = [psnr(x, y) for x, y in zip(a, b)]
    for i, v in enumerate(values):
        out.writerow([i, repr(v)])
    return 0


def _cmd_sweep(args) -> int:
    grid = {"q1": None, "q2": None, "t": None}
    for name, values in args.grid:
        grid[name] = values
    missing = [k for k, v in grid.items() if not v]
    if missing:
        raise ValueError(f"grid is missing values for {', '.join(missing)}")
    frames = load_raw_video(args.input, args.width, args.height, args.frames,
                            args.block_size, args.chroma)
    q_intra = args.q_intra if args.q_intra is not None else min(grid["q2"])
    rows = rd_sweep(frames, grid["q1"], grid["q2"], grid["t"], _search(args), args.block_size,
                    args.epsilon_factor, q_intra, args.jobs)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    return 0


COMMANDS = {"encode": _cmd_encode, "decode": _cmd_decode, "psnr": _cmd_psnr,
            "rd-sweep": _cmd_sweep}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except StreamError as exc:
        print(f"stream error: {exc}", file=sys.stderr)
        return EXIT_STREAM
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

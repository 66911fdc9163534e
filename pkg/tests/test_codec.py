import io

import numpy as np
import pytest

from twostage.codec import (INTER, INTRA, EncoderParams, FrameHeader, decode_block, decode_frame,
                            decode_sequence, encode_block, encode_frame, encode_sequence,
                            first_stage_basis, write_block)
from twostage.dictionary import SearchRange, build_dictionary
from twostage.entropy import StreamError
from twostage.frame_io import psnr
from twostage.sparse import SolverConfig

S8 = SearchRange.symmetric(8)


def header(q1=8.0, q2=12.0, t=0.1, frame_type=INTER, search=S8):
    return FrameHeader(q1, q2, t, search, 16, frame_type)


def panning_clip(frame, n, size=64):
    return [np.ascontiguousarray(frame[i:i + size, 2 * i:2 * i + size]) for i in range(n)]


def test_header_roundtrip():
    h = FrameHeader(7.3, 11.0, 0.137, SearchRange(-24, 23), 16, INTER)
    assert h.q1 == 7.3125 and h.t == round(0.137 * 1024) / 1024
    assert FrameHeader.unpack(h.pack()) == h


def test_header_rejects_bad_values():
    with pytest.raises(ValueError):
        FrameHeader(0.0, 4.0, 0.1)
    with pytest.raises(ValueError):
        FrameHeader(4.0, 4.0, 1.0)


def test_constant_block(carphone):
    block = np.full((16, 16), 131, np.uint8)
    for q in (1.0, 6.0, 20.0):
        h = header(q, q)
        res = encode_block(block, carphone[0], (32, 32), h)
        assert res.syntax.n_atoms == 0
        # only the DC refinement of the mean error can be non-zero
        assert not any(res.syntax.stage2[1:])
        assert np.all(res.recon == res.recon[0, 0])
        assert abs(int(res.recon[0, 0]) - 131) <= q / 2 + 0.5
        if not res.syntax.stage2[0]:
            assert res.recon[0, 0] == np.floor(res.syntax.mean_level * h.q1 + 0.5)
        _, recon = decode_block(write_block(res.syntax, h), carphone[0], (32, 32), h)
        assert np.array_equal(recon, res.recon)


def test_block_equal_to_candidate(carphone):
    ref = carphone[0]
    block = ref[35:51, 29:45].astype(np.int64)  # displacement (-3, +3) from origin (32, 32)
    h = header(q1=1.0, q2=1.0, t=0.0)
    res = encode_block(block.astype(np.uint8), ref, (32, 32), h)
    assert res.syntax.n_atoms == 1
    assert S8.displacement(res.syntax.chosen[0]) == (-3, 3)
    assert np.abs(res.recon.astype(int) - block).max() <= 1


def test_first_stage_distortion_bound(bikes):
    ref = bikes[0]
    cur = bikes[1]
    n = 256
    for q1 in (4.0, 8.0, 16.0):
        h = header(q1, q1, 0.0)
        eps = SolverConfig.from_quantizer(q1, 0.0).epsilon_sq
        for r, c in [(0, 0), (48, 64), (96, 128), (160, 160), (80, 16)]:
            blk = cur[r:r + 16, c:c + 16]
            res = encode_block(blk, ref, (r, c), h)
            d = build_dictionary(ref, (r, c), S8)
            B = first_stage_basis(d, res.syntax.chosen)
            x = blk.astype(float).ravel()
            resid = x - B @ (np.array(res.syntax.levels) * h.q1)
            resid -= resid.mean()  # the block DC belongs to the mean field, not to stage 1
            k = res.syntax.n_atoms
            assert resid @ resid <= n * eps + k * (q1 * 5 / 6) ** 2 + 1e-9


def test_block_identity_on_real_blocks(carphone, bikes):
    rng = np.random.default_rng(0)
    checked = 0
    for clip in (carphone, bikes):
        h_pix, w_pix = clip.shape[1:]
        for f in range(1, clip.shape[0]):
            ref, cur = clip[f - 1], clip[f]
            for _ in range(170):
                r = int(rng.integers(0, h_pix // 16)) * 16
                c = int(rng.integers(0, w_pix // 16)) * 16
                q1 = float(rng.choice([2, 4, 8, 16, 32]))
                q2 = float(rng.choice([2, 4, 8, 16, 32]))
                t = float(rng.choice([0.0, 0.05, 0.15, 0.3]))
                h = header(q1, q2, t)
                res = encode_block(cur[r:r + 16, c:c + 16], ref, (r, c), h)
                syntax, recon = decode_block(write_block(res.syntax, h), ref, (r, c), h)
                assert syntax == res.syntax
                assert np.array_equal(recon, res.recon)
                checked += 1
    assert checked >= 1000


def test_intra_block_is_pure_dct(carphone):
    h = header(6.0, 6.0, 0.0, INTRA)
    res = encode_block(carphone[0][:16, :16], None, (0, 0), h)
    assert res.syntax.n_atoms == 0 and len(res.syntax.stage2) == 256
    _, recon = decode_block(write_block(res.syntax, h), None, (0, 0), h)
    assert np.array_equal(recon, res.recon)


def test_static_scene_inter_much_cheaper(carphone):
    frames = [carphone[0], carphone[0]]
    res = encode_sequence(frames, EncoderParams(8.0, 8.0, 0.1, S8, q_intra=4.0))
    intra_bits, inter_bits = res.stats[0].bits, res.stats[1].bits
    assert inter_bits * 10 < intra_bits


def test_ten_frame_ippp(carphone):
    frames = panning_clip(carphone[0], 10)
    res = encode_sequence(frames, EncoderParams(8.0, 10.0, 0.1, S8))
    assert len(res.stats) == 10
    assert [s.frame_type for s in res.stats] == [INTRA] + [INTER] * 9
    decoded, headers, size = decode_sequence(res.bitstream)
    assert size == (64, 64)
    for a, b in zip(decoded, res.recons):
        assert psnr(a, b) == float("inf")
    # per-frame rates add up to the whole bitstream
    assert sum(s.bits for s in res.stats) == 8 * len(res.bitstream)


def test_unpadded_frames(bikes):
    frames = [f[:40, :50] for f in bikes[:2]]
    res = encode_sequence(frames, EncoderParams(8.0, 8.0, 0.1, S8))
    decoded, _, size = decode_sequence(res.bitstream)
    assert size == (50, 40)
    assert decoded[1].shape == (48, 64)
    assert np.array_equal(decoded[1], res.recons[1])


def test_stream_errors(carphone):
    res = encode_sequence(panning_clip(carphone[0], 2, 32), EncoderParams(8.0, 8.0, 0.1, S8))
    data = res.bitstream
    for bad in (b"XXXX" + data[4:], data[:-3], data + b"\x00", data[:10]):
        with pytest.raises(StreamError):
            decode_sequence(bad)


def test_frame_reference_mismatch(carphone):
    h = header()
    data, _, _ = encode_frame(carphone[1][:32, :32], carphone[0][:32, :32], h)
    with pytest.raises(StreamError):
        decode_frame(io.BytesIO(data), (32, 32), None, 16)
    with pytest.raises(StreamError):
        encode_frame(carphone[1][:32, :32], carphone[0][:48, :32], h)


def test_corrupted_payloads_raise_stream_error(carphone):
    rng = np.random.default_rng(3)
    res = encode_sequence(panning_clip(carphone[0], 2, 32), EncoderParams(6.0, 6.0, 0.1, S8))
    data = bytearray(res.bitstream)
    for _ in range(40):
        bad = bytearray(data)
        i = int(rng.integers(12, len(bad)))
        bad[i] ^= 1 << int(rng.integers(0, 8))
        try:
            decode_sequence(bytes(bad))
        except StreamError:
            pass


def test_pruned_atoms_have_nonzero_levels(bikes):
    h = header(24.0, 24.0, 0.0)
    for r, c in [(0, 0), (64, 64), (128, 96)]:
        res = encode_block(bikes[1][r:r + 16, c:c + 16], bikes[0], (r, c), h)
        assert all(res.syntax.levels)
        assert res.solver_atoms >= res.syntax.n_atoms


import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twostage.entropy import (ArithmeticDecoder, ArithmeticEncoder, StreamError, decode_levels,
                              decode_orders, decode_significance_map, decode_stage2_coeffs,
                              encode_levels, encode_orders, encode_significance_map,
                              encode_stage2_coeffs, plane_ones, significance_map)
from twostage.entropy.binarize import (decode_eg, decode_eg_bypass, decode_tu, deinterleave,
                                       encode_eg, encode_eg_bypass, encode_tu, interleave)


class Recorder(ArithmeticEncoder):
    """Encoder that also logs every bin as (context key or 'bypass', bit)."""

    def __init__(self):
        super().__init__()
        self.log = []

    def encode(self, bit, ctx):
        self.log.append((ctx.key, int(bool(bit))))
        super().encode(bit, ctx)

    def encode_bypass(self, bit):
        self.log.append(("bypass", int(bool(bit))))
        super().encode_bypass(bit)


def bins(log, family):
    return [b for k, b in log if k != "bypass" and k[0] == family]


def bypass(log):
    return [b for k, b in log if k == "bypass"]


def roundtrip(encode, decode):
    enc = ArithmeticEncoder()
    encode(enc)
    dec = ArithmeticDecoder(enc.finish())
    return decode(dec)


# -- engine -----------------------------------------------------------------

def test_empty_stream():
    assert ArithmeticEncoder().finish() == b""


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 5)), max_size=400))
def test_engine_roundtrip(seq):
    enc = ArithmeticEncoder()
    for bit, c in seq:
        if c == 5:
            enc.encode_bypass(bit)
        else:
            enc.encode(bit, enc.contexts[c])
    dec = ArithmeticDecoder(enc.finish())
    out = [dec.decode_bypass() if c == 5 else dec.decode(dec.contexts[c]) for _, c in seq]
    assert out == [b for b, _ in seq]


def test_engine_long_skewed_sequence():
    rng = np.random.default_rng(0)
    bits = (rng.random(200_000) < 0.03).astype(int).tolist()
    enc = ArithmeticEncoder()
    ctx = enc.contexts["x"]
    for b in bits:
        enc.encode(b, ctx)
    data = enc.finish()
    # an adaptive coder should approach the binary entropy (~0.19 bit/bin)
    assert len(data) * 8 < 0.25 * len(bits)
    dec = ArithmeticDecoder(data)
    c = dec.contexts["x"]
    assert [dec.decode(c) for _ in bits] == bits


def test_bypass_costs_one_bit():
    enc = ArithmeticEncoder()
    enc.encode_bypass_bits(0b1011001110, 10)
    assert enc.cost == 10.0
    assert len(enc.finish()) <= 2


@given(st.integers(-10_000, 10_000))
def test_interleave(d):
    assert deinterleave(interleave(d)) == d
    assert [interleave(v) for v in (0, -1, 1, -2, 2)] == [0, 1, 2, 3, 4]


@settings(max_examples=100)
@given(st.integers(0, 5000), st.integers(0, 4))
def test_binarizations(value, k):
    assert roundtrip(lambda e: encode_eg_bypass(e, value, k), lambda d: decode_eg_bypass(d, k)) == value
    assert roundtrip(lambda e: encode_eg(e, value, ("f",), k), lambda d: decode_eg(d, ("f",), k)) == value
    cap = value % 17
    v = value % (cap + 1)
    assert roundtrip(lambda e: encode_tu(e, v, cap, ("t",)), lambda d: decode_tu(d, cap, ("t",))) == v


# -- significance map -------------------------------------------------------

def test_empty_map_codes_nine_bins():
    enc = Recorder()
    encode_significance_map(enc, np.zeros((48, 48), np.uint8))
    assert enc.log == [(("top", i), 0) for i in range(9)]


def test_single_corner_atom():
    grid = significance_map([0], 48)
    enc = Recorder()
    encode_significance_map(enc, grid)
    assert bins(enc.log, "top") == [1] + [0] * 8
    # middle and bottom blocks each: count-1 = 0 (one TU bin), first position 0 as 4 bypass bits
    assert [k for k, _ in enc.log[9:]] == [("cnt", 1, 0)] + ["bypass"] * 4 + [("cnt", 2, 0)] + ["bypass"] * 4
    assert bypass(enc.log) == [0] * 8
    assert np.array_equal(roundtrip(lambda e: encode_significance_map(e, grid),
                                    lambda d: decode_significance_map(d, 48)), grid)


def test_two_ones_in_one_block():
    # scan positions 3 and 9 of the top-left bottom block: (0,3) and (2,1)
    grid = np.zeros((48, 48), np.uint8)
    grid[0, 3] = grid[2, 1] = 1
    enc = Recorder()
    encode_significance_map(enc, grid)
    bottom = [(k, b) for k, b in enc.log if k != "bypass" and k[1] == 2]
    cnt = [b for k, b in bottom if k[0] == "cnt"]
    run = [b for k, b in bottom if k[0] == "run"]
    assert cnt == [1, 0]           # count - 1 = 1
    assert bypass(enc.log)[4:] == [0, 0, 1, 1]   # first position 3
    assert run == [1] * 5 + [0]    # gap 9 - 3 - 1 = 5
    assert np.array_equal(roundtrip(lambda e: encode_significance_map(e, grid),
                                    lambda d: decode_significance_map(d, 48)), grid)


def test_full_block_run_is_implied():
    grid = np.zeros((16, 16), np.uint8)
    grid[:4, :4] = 1
    out = roundtrip(lambda e: encode_significance_map(e, grid), lambda d: decode_significance_map(d, 16))
    assert np.array_equal(out, grid)


def test_map_size_mismatch():
    with pytest.raises(ValueError):
        encode_significance_map(ArithmeticEncoder(), np.zeros((40, 40), np.uint8))
    with pytest.raises(ValueError):
        significance_map([48 * 48], 48)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([16, 32, 48]), st.data())
def test_map_roundtrip(side, data):
    chosen = data.draw(st.sets(st.integers(0, side * side - 1), max_size=40))
    grid = significance_map(sorted(chosen), side)
    out = roundtrip(lambda e: encode_significance_map(e, grid), lambda d: decode_significance_map(d, side))
    assert np.array_equal(out, grid)


def clustered_map(rng, k):
    cy, cx = rng.integers(0, 48, 2)
    pts = set()
    while len(pts) < k:
        y, x = np.clip(np.round(rng.normal((cy, cx), 2)), 0, 47).astype(int)
        pts.add(int(y) * 48 + int(x))
    return significance_map(sorted(pts), 48)


def test_map_rate_sanity():
    rng = np.random.default_rng(1)
    sizes = {k: [] for k in range(1, 9)}
    for i in range(1000):
        k = 1 + i % 8
        enc = ArithmeticEncoder()
        encode_significance_map(enc, clustered_map(rng, k))
        sizes[k].append(len(enc.finish()) * 8)
    for k, s in sizes.items():
        assert np.mean(s) < 9 + k * (np.log2(2304) + 8)
        assert np.mean(s) < 2304


# -- orders -----------------------------------------------------------------

def test_orders_k1_emits_nothing():
    enc = Recorder()
    encode_orders(enc, [0])
    assert enc.log == []


def test_orders_k3_two_planes():
    enc = Recorder()
    encode_orders(enc, [2, 0, 1])
    assert {k[1] for k, _ in enc.log} == {0, 1}


def test_orders_example():
    enc = Recorder()
    encode_orders(enc, [3, 0, 2, 1])
    # plane 1 = 1,0,1,0: runs 0 then 1, stop after two ones
    assert [b for k, b in enc.log if k[1] == 1] == [0, 1, 0]
    # plane 0 = 1,0,0,1: run 0, then a run of 2 capped at 4-1-1=2 (no terminator)
    assert [b for k, b in enc.log if k[1] == 0] == [0, 1, 1]
    assert roundtrip(lambda e: encode_orders(e, [3, 0, 2, 1]), lambda d: decode_orders(d, 4)) == [3, 0, 2, 1]


def test_orders_not_permutation():
    with pytest.raises(ValueError):
        encode_orders(ArithmeticEncoder(), [0, 0, 1])


def test_plane_counts_closed_form():
    for k in range(1, 257):
        for p in range(9):
            assert plane_ones(k, p) == sum((v >> p) & 1 for v in range(k))


# -- levels -----------------------------------------------------------------

def test_levels_single():
    enc = Recorder()
    encode_levels(enc, [5])
    assert bins(enc.log, "lvl") == []
    assert [b for k, b in enc.log if k != "bypass" and k[0] == "lvl1"] == [1, 1, 1, 1, 0]  # TU 4 (no terminator at cap) + EG0 of 0
    assert bypass(enc.log) == [0]


def test_levels_constant_run():
    enc = Recorder()
    encode_levels(enc, [3, 3, 3])
    tu = [b for k, b in enc.log if k != "bypass" and k[:2] == ("lvl", "tu")]
    # last chosen predicted from 1 -> diff 2 -> interleaved 4 (full TU), then diff 0
    assert tu == [1, 1, 1, 1, 0]
    assert [b for k, b in enc.log if k != "bypass" and k[0] == "lvl1"] == [1, 1, 0]
    assert bypass(enc.log) == [0, 0, 0]


def test_levels_signs():
    enc = Recorder()
    encode_levels(enc, [-2, 2])
    assert bypass(enc.log) == [0, 1]
    assert [b for k, b in enc.log if k != "bypass" and k[0] == "lvl1"] == [1, 0]
    assert roundtrip(lambda e: encode_levels(e, [-2, 2]), lambda d: decode_levels(d, 2)) == [-2, 2]


def test_levels_reject_zero():
    with pytest.raises(ValueError):
        encode_levels(ArithmeticEncoder(), [1, 0])


# -- stage 2 ----------------------------------------------------------------

def test_stage2_all_zero():
    enc = Recorder()
    encode_stage2_coeffs(enc, [0] * 10)
    assert enc.log == [(("cbf",), 0)]


def test_stage2_single_dc():
    enc = Recorder()
    encode_stage2_coeffs(enc, [1, 0, 0])
    assert [(k[0], b) for k, b in enc.log if k != "bypass"] == [
        ("cbf", 1), ("last", 0), ("sig", 1), ("gt1", 0)]
    assert bypass(enc.log) == [0]


def test_stage2_level_four():
    enc = Recorder()
    encode_stage2_coeffs(enc, [0, 0, 4, 0])
    assert bins(enc.log, "last") == [1, 1, 0]
    assert bins(enc.log, "sig") == [0, 0, 1]
    assert bins(enc.log, "gt1") == [1] and bins(enc.log, "gt2") == [1]
    assert bypass(enc.log) == [1, 0, 0, 0]  # EG0(1) = 1,0,0 then sign
    assert roundtrip(lambda e: encode_stage2_coeffs(e, [0, 0, 4, 0]),
                     lambda d: decode_stage2_coeffs(d, 4)) == [0, 0, 4, 0]


# -- robustness -------------------------------------------------------------

def decode_all(data, side, k, n):
    dec = ArithmeticDecoder(data)
    decode_significance_map(dec, side)
    decode_orders(dec, k)
    decode_levels(dec, k)
    decode_stage2_coeffs(dec, n)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=64), st.integers(1, 20))
def test_garbage_raises_only_stream_error(data, k):
    try:
        decode_all(data, 16, k, 64)
    except StreamError:
        pass


def test_context_isolation():
    grid = significance_map([5, 100, 700], 48)
    enc = ArithmeticEncoder()
    encode_significance_map(enc, grid)
    encode_levels(enc, [4, -1, 2])
    data = enc.finish()

    def run():
        dec = ArithmeticDecoder(data)
        return decode_significance_map(dec, 48), decode_levels(dec, 3)

    a, b = run(), run()
    assert np.array_equal(a[0], b[0]) and a[1] == b[1] == [4, -1, 2]

import subprocess
import sys
import textwrap

import numpy as np
import pytest
from scipy.fft import dctn, idctn

from multirecon.codec import (
    BitstreamError,
    InvalidCodewordError,
    MalformedHeaderError,
    ReferenceCodec,
    TruncatedPayloadError,
    quant_step,
    reference_compress,
    reference_decompress,
)
from multirecon.codec import entropy
from multirecon.codec.reference import (
    BLOCK,
    HEADER,
    block_symbols,
    dct_matrix,
    forward_blocks,
    inverse_amplification,
    inverse_blocks,
    parse_symbols,
    quantize,
    read_bitstream,
    zigzag_order,
)
from multirecon.core import Bitstream, Signal

from oracles import exp_golomb_bits


def test_quant_step_mapping():
    assert quant_step(4) == 1.0
    assert quant_step(10) == 2.0
    assert quant_step(51) == pytest.approx(2 ** (47 / 6))


def test_dct_is_orthonormal_and_matches_scipy(rng):
    c = dct_matrix()
    np.testing.assert_allclose(c @ c.T, np.eye(BLOCK), atol=1e-14)
    blocks = rng.uniform(-300, 600, (50, 8, 8))
    np.testing.assert_allclose(forward_blocks(blocks), dctn(blocks, axes=(1, 2), norm="ortho"), atol=1e-10)
    assert np.abs(inverse_blocks(forward_blocks(blocks)) - blocks).max() < 1e-12 * 600
    np.testing.assert_allclose(inverse_blocks(blocks), idctn(blocks, axes=(1, 2), norm="ortho"), atol=1e-10)


def test_zigzag_starts_like_jpeg():
    assert list(zigzag_order()[:10]) == [0, 1, 8, 16, 9, 2, 3, 10, 17, 24]
    assert sorted(zigzag_order()) == list(range(64))
    assert zigzag_order()[-1] == 63


def test_exp_golomb_bits_match_string_oracle(rng):
    values = np.concatenate([np.arange(40), rng.integers(0, 2 ** 20, 200)])
    bits = entropy.encode_ue(values)
    assert "".join(map(str, bits)) == exp_golomb_bits(values)
    np.testing.assert_array_equal(entropy.ue_lengths(values), [len(exp_golomb_bits([v])) for v in values])


def test_signed_mappings_round_trip():
    k = np.arange(-1000, 1001)
    np.testing.assert_array_equal(entropy.unsigned_to_signed(entropy.signed_to_unsigned(k)), k)
    assert list(entropy.signed_to_unsigned([0, 1, -1, 2, -2])) == [0, 1, 2, 3, 4]
    nz = k[k != 0]
    np.testing.assert_array_equal(entropy.unsigned_to_nonzero(entropy.nonzero_to_unsigned(nz)), nz)
    assert entropy.nonzero_to_unsigned([1, -1, 2]).tolist() == [0, 1, 2]


def _random_levels(rng, n_blocks):
    levels = np.zeros((n_blocks, 64), dtype=np.int64)
    density = rng.uniform(0, 1)
    mask = rng.uniform(size=levels.shape) < density
    levels[mask] = rng.integers(-3000, 3000, mask.sum())
    levels[:, 0] = rng.integers(-20000, 20000, n_blocks)
    return levels


def test_entropy_round_trip_10k_sequences(rng):
    for _ in range(10_000):
        levels = _random_levels(rng, int(rng.integers(1, 4)))
        bits = entropy.encode_ue(block_symbols(levels))
        pad = np.zeros(-bits.size % 8, dtype=np.uint8)
        symbols, used = entropy.decode_ue(np.concatenate([bits, pad]))
        assert used == bits.size
        decoded, consumed = parse_symbols(symbols, levels.shape[0])
        assert consumed == symbols.size
        np.testing.assert_array_equal(decoded, levels)


def test_constant_image_codes_only_dc():
    s = Signal(np.full((16, 24), 128.0))
    levels = quantize(s, 4)
    assert (levels[:, 0] != 0).all()
    assert not levels[:, 1:].any()
    out = reference_decompress(reference_compress(s, 4))
    assert np.abs(out.pixels - 128.0).max() <= quant_step(4) / 2


def test_round_trip_distortion_bound(rng):
    bound_gain = inverse_amplification()
    assert bound_gain == pytest.approx(np.abs(dct_matrix()).sum(axis=0).max() ** 2)
    for i in range(50):
        theta = int(rng.integers(0, 52))
        h, w = rng.integers(8, 40, 2)
        s = Signal(rng.uniform(-300, 600, (h, w)))
        out = reference_decompress(reference_compress(s, theta))
        assert out.shape == s.shape
        assert np.abs(out.pixels - s.pixels).max() <= quant_step(theta) / 2 * bound_gain + 1e-9


def test_out_of_gamut_values_survive(rng):
    s = Signal(rng.uniform(-2 * 255, 3 * 255, (16, 16)))
    out = reference_decompress(reference_compress(s, 0))
    assert out.pixels.min() < -100 and out.pixels.max() > 400
    assert np.abs(out.pixels - s.pixels).max() <= quant_step(0) / 2 * inverse_amplification()


def test_rate_decreases_with_theta(corpus):
    low = np.mean([reference_compress(x, 0).bit_length for x in corpus])
    high = np.mean([reference_compress(x, 51).bit_length for x in corpus])
    assert low > high
    means = [np.mean([reference_compress(x, q).bit_length for x in corpus[:4]]) for q in range(0, 52, 5)]
    assert all(a >= b for a, b in zip(means, means[1:]))


def test_encode_decode_encode_fixed_point(corpus):
    for x in corpus:
        for theta in (1, 16, 41):
            b = reference_compress(x, theta)
            assert reference_compress(reference_decompress(b), theta) == b


def test_bit_length_is_exact(corpus):
    b = reference_compress(corpus[3], 11)
    assert 8 * (len(b) - 1) < b.bit_length <= 8 * len(b)
    assert read_bitstream(b.data) == b
    assert ReferenceCodec().rate_of(b) == b.bit_length


def test_header_layout():
    b = reference_compress(Signal(np.zeros((16, 24))), 37)
    magic, w, h, theta, block = HEADER.unpack_from(b.data)
    assert (magic, w, h, theta, block) == (b"NCR1", 24, 16, 37, 8)
    assert b.data[4:6] == (24).to_bytes(2, "big")


def test_invalid_inputs():
    with pytest.raises(ValueError):
        reference_compress(Signal(np.zeros((7, 16))), 10)
    for theta in (-1, 52, 3.5):
        with pytest.raises(ValueError):
            reference_compress(Signal(np.zeros((8, 8))), theta)


def test_parse_errors(corpus):
    good = reference_compress(corpus[0], 20).data
    with pytest.raises(MalformedHeaderError):
        reference_decompress(b"XCR1" + good[4:])
    with pytest.raises(MalformedHeaderError):
        reference_decompress(good[:6])
    with pytest.raises(MalformedHeaderError):
        reference_decompress(good[:8] + bytes([60]) + good[9:])
    with pytest.raises(MalformedHeaderError):
        reference_decompress(good[:9] + bytes([16]) + good[10:])
    with pytest.raises(TruncatedPayloadError):
        reference_decompress(good[: len(good) // 2])
    with pytest.raises(InvalidCodewordError):
        reference_decompress(good + b"\xff")
    # a block declaring 100 AC coefficients
    bits = entropy.encode_ue([0, 100] + [0] * 200)
    with pytest.raises(InvalidCodewordError):
        reference_decompress(good[:HEADER.size] + entropy.pack_bits(bits))
    # runs that walk past the end of the block
    bits = entropy.encode_ue([0, 2, 40, 0, 40, 0])
    hdr = HEADER.pack(b"NCR1", 8, 8, 10, 8)
    with pytest.raises(InvalidCodewordError):
        reference_decompress(hdr + entropy.pack_bits(bits))
    assert issubclass(TruncatedPayloadError, BitstreamError)


def test_decoder_accepts_bitstream_or_bytes(corpus):
    b = reference_compress(corpus[1], 30)
    np.testing.assert_array_equal(reference_decompress(b).pixels, reference_decompress(b.data).pixels)


def test_determinism_across_processes(corpus_paths, tmp_path):
    script = textwrap.dedent(f"""
        import sys
        from multirecon.pgm import read_pgm
        from multirecon.codec import reference_compress
        x = read_pgm({str(corpus_paths[2])!r})
        sys.stdout.buffer.write(reference_compress(x, 6).data)
    """)
    runs = [subprocess.run([sys.executable, "-c", script], capture_output=True, check=True).stdout
            for _ in range(2)]
    assert runs[0] == runs[1]
    from multirecon.pgm import read_pgm
    assert runs[0] == reference_compress(read_pgm(corpus_paths[2]), 6).data


def test_bitstream_dataclass_equality():
    assert Bitstream(b"ab", 12) == Bitstream(b"ab", 12)
    assert Bitstream(b"ab", 12) != Bitstream(b"ab", 13)

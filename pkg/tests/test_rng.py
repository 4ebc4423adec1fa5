from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from gexpect.rng import _uniform52, normal_block, normals, philox4x32, seed_key

# Known-answer vectors for Philox4x32-10 from the Random123 distribution.
KATS = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


def test_philox_known_answers():
    for ctr, key, expect in KATS:
        assert tuple(int(v) for v in philox4x32(ctr, key)) == expect


def test_philox_vectorised_matches_scalar():
    ctrs = np.array([k[0] for k in KATS], dtype=np.uint64)
    keys = np.array([k[1] for k in KATS], dtype=np.uint64)
    out = philox4x32(ctrs, keys)
    assert [tuple(int(v) for v in row) for row in out] == [k[2] for k in KATS]


def test_seed_key_splits_64_bits():
    assert seed_key(0x0123456789ABCDEF) == (0x89ABCDEF, 0x01234567)
    assert seed_key(-1) == (0xFFFFFFFF, 0xFFFFFFFF)


def test_uniform_open_interval():
    zero = np.array([0], dtype=np.uint64)
    full = np.array([0xFFFFFFFF], dtype=np.uint64)
    assert 0 < _uniform52(zero, zero)[0] < 1e-15
    assert 1 - 1e-15 < _uniform52(full, full)[0] < 1


def test_moments():
    z = normal_block(7, np.arange(2000), 500).ravel()
    assert abs(z.mean()) < 5 * 1 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 5 * np.sqrt(2 / z.size)
    assert abs(np.mean(z**4) - 3) < 0.05
    frac = np.mean(z < -1.959963984540054)
    assert abs(frac - 0.025) < 5 * np.sqrt(0.025 * 0.975 / z.size)


def test_streams_and_seeds_differ():
    a = normal_block(1, np.arange(4), 8)
    b = normal_block(2, np.arange(4), 8)
    assert not np.any(a == b)
    assert len({tuple(r) for r in a}) == 4


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2**40), min_size=1, max_size=6),
       st.integers(0, 50), st.integers(1, 40))
def test_block_matches_pointwise(seed, streams, first, n):
    block = normal_block(seed, streams, n, first_step=first)
    steps = np.arange(first, first + n)
    point = normals(seed, np.array(streams, dtype=np.uint64)[:, None], steps[None, :])
    np.testing.assert_array_equal(block, point)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 60), st.integers(1, 59))
def test_chunking_is_invisible(seed, n, cut):
    cut = min(cut, n - 1)
    streams = np.arange(10)
    whole = normal_block(seed, streams, n)
    parts = np.hstack([normal_block(seed, streams, cut), normal_block(seed, streams, n - cut, first_step=cut)])
    np.testing.assert_array_equal(whole, parts)
    rows = np.vstack([normal_block(seed, streams[:3], n), normal_block(seed, streams[3:], n)])
    np.testing.assert_array_equal(whole, rows)

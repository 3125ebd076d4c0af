import io
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays, array_shapes

from orbitconv.tensor import (
    RING,
    TensorFormatError,
    flip,
    read_tensor,
    rot45_ring,
    rot90,
    write_tensor,
)

A = np.array([[1, 2, 3], [4, 5, 6], [7, 8, 9]], dtype=float)

spatial = arrays(np.float64, array_shapes(min_dims=2, max_dims=4, min_side=1, max_side=5),
                 elements=st.floats(-1e3, 1e3))
kernels3 = arrays(np.float64, st.tuples(st.integers(1, 3), st.just(3), st.just(3)),
                  elements=st.floats(-1e3, 1e3))


def test_rot90_ccw_convention():
    assert np.array_equal(rot90(A, 1), [[3, 6, 9], [2, 5, 8], [1, 4, 7]])


def test_rot90_maps_rc_to_w1c_r():
    t = np.arange(6.0).reshape(2, 3)
    out = rot90(t, 1)
    assert out.shape == (3, 2)
    for r in range(2):
        for c in range(3):
            assert out[3 - 1 - c, r] == t[r, c]


@pytest.mark.parametrize("turns", [0, 4, -4, 8])
def test_rot90_identity_turns(turns):
    assert np.array_equal(rot90(A, turns), A)


def test_flips():
    assert np.array_equal(flip(A, "h"), [[3, 2, 1], [6, 5, 4], [9, 8, 7]])
    assert np.array_equal(flip(A, "vertical"), [[7, 8, 9], [4, 5, 6], [1, 2, 3]])


def test_ring_rotation_example():
    assert np.array_equal(rot45_ring(A), [[2, 3, 6], [1, 5, 9], [4, 7, 8]])


def test_ring_rotation_squared_is_quarter_turn_by_enumeration():
    # every position of a 3x3 slice, each in isolation
    for r in range(3):
        for c in range(3):
            e = np.zeros((3, 3))
            e[r, c] = 1.0
            assert np.array_equal(rot45_ring(rot45_ring(e)), rot90(e, 1)), (r, c)


def test_ring_is_ccw_cycle():
    assert len(set(RING)) == 8 and (1, 1) not in RING


@pytest.mark.parametrize("bad", [np.zeros(3), np.float64(1.0)])
def test_transforms_need_two_dims(bad):
    for f in (lambda t: rot90(t, 1), lambda t: flip(t, "h"), rot45_ring):
        with pytest.raises(ValueError):
            f(bad)


def test_ring_needs_3x3():
    with pytest.raises(ValueError):
        rot45_ring(np.zeros((4, 4)))


@given(spatial)
def test_rot90_four_times_identity(t):
    assert np.array_equal(rot90(rot90(rot90(rot90(t)))), t)


@given(spatial)
def test_flip_relations(t):
    h, v = flip(t, "h"), flip(t, "v")
    assert np.array_equal(flip(h, "h"), t)
    assert np.array_equal(flip(v, "v"), t)
    assert np.array_equal(flip(h, "v"), flip(v, "h"))
    assert np.array_equal(flip(h, "v"), rot90(t, 2))


@given(kernels3)
def test_ring_group_relations(k):
    out = k
    for _ in range(8):
        out = rot45_ring(out)
    assert np.array_equal(out, k)
    assert np.array_equal(rot45_ring(rot45_ring(k)), rot90(k, 1))
    assert np.array_equal(rot45_ring(rot45_ring(k, 2), -2), k)


def _roundtrip(t, dtype="f64"):
    buf = io.BytesIO()
    write_tensor(t, buf, dtype)
    raw = buf.getvalue()
    return raw, read_tensor(io.BytesIO(raw))


def test_header_layout_scalar_shape():
    raw, back = _roundtrip(np.array([0.0]))
    # magic(4) version(1) dtype(1) ndim(2) dims(4 x 1)
    assert raw[:4] == b"EITF"
    assert struct.unpack("<BBH", raw[4:8]) == (1, 2, 1)
    assert struct.unpack("<I", raw[8:12]) == (1,)
    assert len(raw) == 12 + 8
    assert np.array_equal(back, [0.0])


def test_header_dims_2x2():
    raw, _ = _roundtrip(np.ones((2, 2)))
    assert struct.unpack("<HII", raw[6:16]) == (2, 2, 2)
    assert len(raw) - 16 == 32


def test_random_f64_bitwise(rng):
    t = rng.normal(size=(1, 1, 8, 8))
    _, back = _roundtrip(t)
    assert back.tobytes() == t.tobytes()


def test_f32_and_u8_roundtrip(rng):
    t = rng.normal(size=(3, 4))
    _, back = _roundtrip(t, "f32")
    assert np.array_equal(back, t.astype(np.float32).astype(np.float64))
    lab = rng.integers(0, 256, size=(2, 5)).astype(float)
    raw, back = _roundtrip(lab, "u8")
    assert len(raw) == 8 + 8 + 10
    assert np.array_equal(back, lab)


def test_u8_rejects_non_integers():
    with pytest.raises(TensorFormatError):
        _roundtrip(np.array([0.5]), "u8")
    with pytest.raises(TensorFormatError):
        _roundtrip(np.array([256.0]), "u8")


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: b"XXXX" + r[4:],
        lambda r: r[:4] + b"\x02" + r[5:],
        lambda r: r[:5] + b"\x09" + r[6:],
        lambda r: r[:-1],
        lambda r: r[:10],
    ],
    ids=["magic", "version", "dtype", "payload", "header"],
)
def test_corrupt_files_rejected(mutate):
    raw, _ = _roundtrip(np.arange(4.0).reshape(2, 2))
    with pytest.raises(TensorFormatError):
        read_tensor(io.BytesIO(mutate(raw)))


@given(arrays(np.float64, array_shapes(min_dims=1, max_dims=4, max_side=6),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_f64_roundtrip_property(t):
    _, back = _roundtrip(t)
    assert back.shape == t.shape
    assert back.tobytes() == t.tobytes()

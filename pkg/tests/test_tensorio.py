"""Binary tensor container round trips and malformed-input handling."""

import numpy as np
import pytest

from semcodec.errors import DataError
from semcodec.tensorio import dump_tensor, parse_tensor, read_tensor, write_tensor


@pytest.mark.parametrize("dtype", [np.float32, np.int32])
@pytest.mark.parametrize("shape", [(3,), (2, 5), (4, 3, 2), (1, 1, 1, 1)])
def test_round_trip(dtype, shape):
    rng = np.random.default_rng(0)
    arr = rng.integers(-100, 100, size=shape).astype(dtype)
    back = parse_tensor(dump_tensor(arr))
    assert back.dtype == arr.dtype
    assert back.shape == arr.shape
    assert np.array_equal(back, arr)


def test_file_round_trip(tmp_path):
    arr = np.arange(24, dtype=np.int32).reshape(2, 3, 4)
    path = tmp_path / "t.sptn"
    write_tensor(path, arr)
    assert np.array_equal(read_tensor(path), arr)


def test_non_contiguous_input():
    arr = np.arange(36, dtype=np.float32).reshape(6, 6)[::2, ::2]
    assert np.array_equal(parse_tensor(dump_tensor(arr)), arr)


def test_zero_length_axis():
    arr = np.zeros((0, 4), dtype=np.float32)
    back = parse_tensor(dump_tensor(arr))
    assert back.shape == (0, 4)


def test_unsupported_dtype():
    with pytest.raises(DataError, match="dtype"):
        dump_tensor(np.zeros(3, dtype=np.float64))


def test_bad_magic():
    with pytest.raises(DataError, match="magic"):
        parse_tensor(b"XXXX" + b"\x00" * 10)


def test_unknown_dtype_code():
    blob = bytearray(dump_tensor(np.zeros(2, dtype=np.float32)))
    blob[4] = 9
    with pytest.raises(DataError, match="dtype code"):
        parse_tensor(bytes(blob))


def test_truncated_header():
    blob = dump_tensor(np.zeros((2, 2), dtype=np.int32))
    with pytest.raises(DataError):
        parse_tensor(blob[:8])


def test_payload_size_mismatch():
    blob = dump_tensor(np.zeros(4, dtype=np.int32))
    with pytest.raises(DataError, match="payload"):
        parse_tensor(blob[:-4])
    with pytest.raises(DataError, match="payload"):
        parse_tensor(blob + b"\x00\x00\x00\x00")


def test_parse_returns_writable_copy():
    arr = np.ones((2, 2), dtype=np.int32)
    back = parse_tensor(dump_tensor(arr))
    back[0, 0] = 7  # must not raise: buffer-backed views are read-only
    assert back[0, 0] == 7

"""Bit-exact range coder over integer symbols with Gaussian models.

Probability model
-----------------
Each symbol s in the support [-128, 127] is coded under a quantized
Gaussian N(mu, sigma) with sigma clamped to at least SIGMA_MIN.  The
cumulative table has 257 entries at 16-bit precision:

    table[j] = round(2^16 * Phi((j - 128.5 - mu) / sigma)),  j = 0..256

with table[0] := 0 and table[256] := 2^16 (tail mass folds into the
boundary bins), then monotonized so every bin keeps a count of at least
one.  Symbol s occupies [table[s+128], table[s+129]).

Coder registers
---------------
Carry-counting byte-oriented range coder.  Encoder state is a 33-bit
`low`, a 32-bit `range` starting at 0xFFFFFFFF, plus a pending byte
`cache` and a counter `cache_size` (initially 0x00 / 1, which makes the
first output byte always 0x00).  When `range` drops below 2^24 the top
byte of `low` is shifted out; a carry out of bit 32 propagates into the
pending bytes.  finish() flushes with five shift-outs.  The decoder
primes a 32-bit `code` window from the first five bytes (the leading
zero byte falls off the window) and mirrors the renormalization, so a
complete segment is consumed exactly to its last byte.

Truncation is a supported state: decoding stops at the first
renormalization read past the end of the segment, and every symbol
extracted before that point is exact, because all bytes of a stream
prefix are final (carries were resolved before emission).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .errors import SymbolOutOfSupport

SIGMA_MIN = 0.11
PRECISION = 16
TOTAL = 1 << PRECISION
S_MIN, S_MAX = -128, 127
N_BINS = S_MAX - S_MIN + 1

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF
_BOUNDS = np.arange(N_BINS + 1, dtype=np.float64) + (S_MIN - 0.5)
_LANE = np.arange(N_BINS + 1, dtype=np.int32)


def quantize_cdf(mu, sigma) -> np.ndarray:
    """Quantized cumulative tables for one model or a batch.

    Scalar (mu, sigma) give a (257,) table; shape-(n,) arrays give
    (n, 257).  Tables are strictly increasing int32 with table[0] = 0
    and table[256] = 2^16.
    """
    mu_a = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sg_a = np.maximum(np.atleast_1d(np.asarray(sigma, dtype=np.float64)), SIGMA_MIN)
    if mu_a.shape != sg_a.shape or mu_a.ndim != 1:
        raise ValueError("mu and sigma must be scalars or equal-length 1-D arrays")
    x = _BOUNDS[None, :] - mu_a[:, None]
    np.divide(x, sg_a[:, None], out=x)
    # rint(2^16 * Phi(x)) saturates to 0 / 2^16 well inside +-4.75, so the
    # transcendental is only evaluated where rounding is undecided
    cdf = np.where(x >= 0.0, np.int32(TOTAL), np.int32(0))
    mid = np.abs(x) < 4.75
    cdf[mid] = np.rint(TOTAL * ndtr(x[mid])).astype(np.int32)
    cdf[:, 0] = 0
    cdf[:, -1] = TOTAL
    # forward pass: cdf[j] >= cdf[j-1] + 1, via accumulate on (cdf - j)
    cdf = np.maximum.accumulate(cdf - _LANE, axis=1) + _LANE
    # forward fill can overshoot the top anchor; re-pin before descending
    cdf[:, -1] = TOTAL
    # backward pass: cdf[j] <= cdf[j+1] - 1, anchored at cdf[256] = 2^16
    cdf = np.minimum.accumulate((cdf - _LANE)[:, ::-1], axis=1)[:, ::-1] + _LANE
    if np.isscalar(mu) or np.asarray(mu).ndim == 0:
        return cdf[0]
    return cdf


def _as_bin_indices(symbols) -> np.ndarray:
    sym = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if sym.size and (sym.min() < S_MIN or sym.max() > S_MAX):
        bad = sym[(sym < S_MIN) | (sym > S_MAX)][0]
        raise SymbolOutOfSupport(f"symbol {bad} outside [{S_MIN}, {S_MAX}]")
    return sym - S_MIN


class RangeEncoder:
    """Sequential encoder; feed (cum_lo, cum_hi) slots out of 2^16."""

    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def encode(self, cum_lo: int, cum_hi: int) -> None:
        r = self.range >> PRECISION
        self.low += r * cum_lo
        rng = r * (cum_hi - cum_lo)
        while rng < _TOP:
            self._shift_low()
            rng <<= 8
        self.range = rng

    def _shift_low(self) -> None:
        low = self.low
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            out = self.out
            out.append((self.cache + carry) & 0xFF)
            fill = (0xFF + carry) & 0xFF
            for _ in range(self.cache_size - 1):
                out.append(fill)
            self.cache = (low >> 24) & 0xFF
            self.cache_size = 0
        self.cache_size += 1
        self.low = (low << 8) & _MASK32

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    """Sequential decoder over a (possibly truncated) byte segment."""

    def __init__(self, segment: bytes):
        self.data = segment
        self.pos = 0
        self.starved = False
        self.range = _MASK32
        code = 0
        for _ in range(5):
            code = ((code << 8) | self._byte()) & _MASK32
        self.code = code

    def _byte(self) -> int:
        if self.pos >= len(self.data):
            self.starved = True
            return 0
        b = self.data[self.pos]
        self.pos += 1
        return b

    def decode(self, table: np.ndarray) -> int:
        """Extract the next bin index under a 257-entry table."""
        r = self.range >> PRECISION
        t = self.code // r
        if t >= TOTAL:
            t = TOTAL - 1
        j = int(np.searchsorted(table, t, side="right")) - 1
        self.code -= r * int(table[j])
        rng = r * int(table[j + 1] - table[j])
        while rng < _TOP:
            self.code = ((self.code << 8) | self._byte()) & _MASK32
            rng <<= 8
        self.range = rng
        return j


def encode_with_tables(symbols, tables: np.ndarray) -> bytes:
    """Encode support-range symbols under per-symbol cumulative tables."""
    idx = _as_bin_indices(symbols)
    n = idx.size
    if tables.ndim != 2 or tables.shape != (n, N_BINS + 1):
        raise ValueError(f"tables must be ({n}, {N_BINS + 1})")
    rows = np.arange(n)
    lo_list = tables[rows, idx].tolist()
    hi_list = tables[rows, idx + 1].tolist()
    enc = RangeEncoder()
    encode = enc.encode
    for lo, hi in zip(lo_list, hi_list):
        encode(lo, hi)
    return enc.finish()


def decode_with_tables(segment: bytes, tables: np.ndarray) -> tuple[np.ndarray, int]:
    """Decode up to tables.shape[0] symbols from a byte segment.

    Returns (symbols, decoded_count): entries before decoded_count are
    exact; later entries are zero-filled placeholders.
    """
    if tables.ndim != 2 or tables.shape[1] != N_BINS + 1:
        raise ValueError(f"tables must be (n, {N_BINS + 1})")
    n = tables.shape[0]
    out = np.zeros(n, dtype=np.int32)
    dec = RangeDecoder(segment)
    if dec.starved:
        return out, 0
    count = 0
    for i in range(n):
        out[i] = dec.decode(tables[i]) + S_MIN
        count = i + 1
        if dec.starved:
            break
    return out, count


def encode_symbols(symbols, mu, sigma) -> bytes:
    """Encode symbols under per-symbol Gaussian models."""
    sym = np.asarray(symbols).reshape(-1)
    return encode_with_tables(sym, _tables_for(sym.size, mu, sigma))


def decode_symbols(segment: bytes, mu, sigma) -> tuple[np.ndarray, int]:
    """Decode under the same model sequence used to encode."""
    mu_a = np.asarray(mu, dtype=np.float64).reshape(-1)
    return decode_with_tables(segment, _tables_for(mu_a.size, mu, sigma))


def ideal_bits(symbols, mu, sigma) -> float:
    """Information content under the quantized models, in bits."""
    sym = np.asarray(symbols).reshape(-1)
    return ideal_bits_tables(sym, _tables_for(sym.size, mu, sigma))


def ideal_bits_tables(symbols, tables: np.ndarray) -> float:
    idx = _as_bin_indices(symbols)
    rows = np.arange(idx.size)
    freqs = (tables[rows, idx + 1] - tables[rows, idx]).astype(np.float64)
    return float((PRECISION - np.log2(freqs)).sum())


def _tables_for(n: int, mu, sigma) -> np.ndarray:
    mu_a = np.broadcast_to(np.asarray(mu, dtype=np.float64).reshape(-1), (n,))
    sg_a = np.broadcast_to(np.asarray(sigma, dtype=np.float64).reshape(-1), (n,))
    return quantize_cdf(mu_a.copy(), sg_a.copy())

"""
Carry-less range coder over 16-bit cumulative frequency tables.

Tables are the dictionaries built by :func:`kmfv.process.entropy.build_cdf_tables`:

    cdf : int array [R, Lmax + 2], row i holds L_i + 2 increasing entries
          from 0 to 65536, entry L_i + 1 closing the escape symbol
    lengths : int array [R], number of regular symbols L_i of each row
    offsets : int array [R], value of the first regular symbol of each row

A value s coded with row i maps to index s - offsets[i].  Indices in
[0, L_i) are coded directly.  Anything else is coded as the escape symbol
L_i followed by its zigzag magnitude in bypass mode: a byte count (0 to 8)
in 16 equiprobable slots, then the little-endian bytes of the magnitude.
"""

from bisect import bisect_right

import numpy as np

PRECISION = 16
TOTAL = 1 << PRECISION
TOP = 1 << 24
BOT = 1 << 16
MASK = 0xffffffff
MAX_ESCAPE_BYTES = 8


class CorruptPayloadError(ValueError):
    """Payload cannot be decoded with the given tables."""


class RangeEncoder(object):
    """
    Encoder state, bytes are collected in ``self.out``.
    """

    def __init__(self):
        self.low = 0
        self.range = MASK
        self.out = bytearray()

    def _normalize(self):
        while True:
            if (self.low ^ (self.low + self.range)) < TOP:
                pass
            elif self.range < BOT:
                self.range = -self.low & (BOT - 1)
            else:
                break
            self.out.append((self.low >> 24) & 0xff)
            self.range = (self.range << 8) & MASK
            self.low = (self.low << 8) & MASK

    def encode(self, cum, freq):
        """
        Code the interval [cum, cum + freq) of a 65536 total.
        """
        r = self.range >> PRECISION
        self.low += cum * r
        self.range = freq * r
        self._normalize()

    def finish(self):
        """
        Flush the state and return the payload.
        """
        for _ in range(4):
            self.out.append((self.low >> 24) & 0xff)
            self.low = (self.low << 8) & MASK
        return bytes(self.out)


class RangeDecoder(object):
    """
    Decoder state over a payload.
    """

    def __init__(self, payload):
        self.payload = payload
        self.pos = 0
        self.low = 0
        self.range = MASK
        self.code = 0
        self.r = 0
        for _ in range(4):
            self.code = (self.code << 8) | self._read_byte()

    def _read_byte(self):
        if self.pos >= len(self.payload):
            raise CorruptPayloadError("payload exhausted after %d bytes" %
                                      len(self.payload))
        b = self.payload[self.pos]
        self.pos += 1
        return b

    def _normalize(self):
        while True:
            if (self.low ^ (self.low + self.range)) < TOP:
                pass
            elif self.range < BOT:
                self.range = -self.low & (BOT - 1)
            else:
                break
            self.code = ((self.code << 8) | self._read_byte()) & MASK
            self.range = (self.range << 8) & MASK
            self.low = (self.low << 8) & MASK

    def target(self):
        """
        Cumulative frequency the next symbol falls in.
        """
        self.r = self.range >> PRECISION
        v = (self.code - self.low) // self.r
        if v < 0 or v >= TOTAL:
            raise CorruptPayloadError("decoder state out of range at byte %d"
                                      % self.pos)
        return v

    def update(self, cum, freq):
        self.low += cum * self.r
        self.range = freq * self.r
        self._normalize()

    def finish(self):
        if self.pos != len(self.payload):
            raise CorruptPayloadError("%d trailing bytes in payload" %
                                      (len(self.payload) - self.pos))


def _zigzag(index, length):
    if index < 0:
        return -2 * index - 1
    return 2 * (index - length)


def _unzigzag(z, length):
    if z & 1:
        return -(z + 1) // 2
    return z // 2 + length


def _encode_escape(enc, z):
    raw = z.to_bytes(MAX_ESCAPE_BYTES, 'little').rstrip(b'\x00')
    enc.encode(len(raw) << 12, 1 << 12)
    for b in raw:
        enc.encode(b << 8, 1 << 8)


def _decode_escape(dec):
    n = dec.target() >> 12
    if n > MAX_ESCAPE_BYTES:
        raise CorruptPayloadError("bad escape length %d" % n)
    dec.update(n << 12, 1 << 12)
    z = 0
    for i in range(n):
        b = dec.target() >> 8
        dec.update(b << 8, 1 << 8)
        z |= b << (8 * i)
    return z


def encode(symbols, indexes, tables):
    """
    Range code integer symbols.

    Parameters
    ----------
    symbols : array_like of int
        Values to code.
    indexes : array_like of int
        Table row of every symbol, same size as ``symbols``.
    tables : dict
        CDF tables.

    Returns
    -------
    payload : bytes
        Coded bytes, at least 4.

    """
    symbols = np.asarray(symbols, dtype=np.int64).ravel()
    indexes = np.asarray(indexes, dtype=np.int64).ravel()
    if symbols.size != indexes.size:
        raise ValueError("symbols and indexes differ in size: %d vs %d" %
                         (symbols.size, indexes.size))
    cdf = tables["cdf"].tolist()
    lengths = tables["lengths"].tolist()
    offsets = tables["offsets"].tolist()

    enc = RangeEncoder()
    for s, i in zip(symbols.tolist(), indexes.tolist()):
        row = cdf[i]
        length = lengths[i]
        k = s - offsets[i]
        if 0 <= k < length:
            enc.encode(row[k], row[k + 1] - row[k])
        else:
            enc.encode(row[length], row[length + 1] - row[length])
            _encode_escape(enc, _zigzag(k, length))
    return enc.finish()


def decode(payload, indexes, tables):
    """
    Decode symbols coded by :func:`encode`.

    ``indexes`` gives the table row of every symbol and so the symbol
    count.  Raises CorruptPayloadError when the payload does not decode to
    exactly that many symbols.
    """
    indexes = np.asarray(indexes, dtype=np.int64).ravel()
    cdf = tables["cdf"].tolist()
    lengths = tables["lengths"].tolist()
    offsets = tables["offsets"].tolist()

    dec = RangeDecoder(payload)
    out = np.empty(indexes.size, dtype=np.int64)
    for n, i in enumerate(indexes.tolist()):
        length = lengths[i]
        row = cdf[i][:length + 2]
        v = dec.target()
        k = bisect_right(row, v) - 1
        if k > length:
            raise CorruptPayloadError("symbol beyond table at position %d"
                                      % n)
        dec.update(row[k], row[k + 1] - row[k])
        if k == length:
            k = _unzigzag(_decode_escape(dec), length)
        out[n] = k + offsets[i]
    dec.finish()
    return out


def escape_count(symbols, indexes, tables):
    """
    Number of symbols outside the regular support of their rows.
    """
    symbols = np.asarray(symbols, dtype=np.int64).ravel()
    indexes = np.asarray(indexes, dtype=np.int64).ravel()
    k = symbols - tables["offsets"][indexes]
    return int(np.count_nonzero((k < 0) | (k >= tables["lengths"][indexes])))

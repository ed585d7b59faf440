#!/usr/bin/env python3
"""Regenerates crates/core/tests/golden/*.hex from a standalone encoder.

Each file holds one full frame as lowercase hex: b"CSTR", codec wire id,
little-endian u64 bit length, then the MSB-first payload padded with zeros.
"""
import pathlib
import struct

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/golden"


class Bits:
    def __init__(self):
        self.bits = []

    def put(self, value, width):
        for i in reversed(range(width)):
            self.bits.append((value >> i) & 1)

    def put_bytes(self, data):
        for b in data:
            self.put(b, 8)

    def frame(self, wire_id):
        n = len(self.bits)
        padded = self.bits + [0] * (-n % 8)
        payload = bytes(
            int("".join(map(str, padded[i:i + 8])), 2) for i in range(0, len(padded), 8)
        )
        return b"CSTR" + bytes([wire_id]) + struct.pack("<Q", n) + payload


def leb128(v):
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def enc_leb128(values):
    s = Bits()
    for v in values:
        s.put_bytes(leb128(v))
    return s.frame(1)


def enc_tcomp32(values):
    s = Bits()
    for v in values:
        n = max(v.bit_length(), 1)
        s.put(n - 1, 5)
        s.put(v, n)
    return s.frame(3)


def enc_tdic32(values, size=4096):
    bits = size.bit_length() - 1
    table = {}
    s = Bits()
    for v in values:
        slot = ((v * 2654435761) & 0xFFFFFFFF) >> (32 - bits)
        if table.get(slot) == v:
            s.put(1, 1)
            s.put(slot, bits)
        else:
            table[slot] = v
            s.put(v, 33)
    return s.frame(4)


def enc_rle(values):
    s = Bits()
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[j] == values[i] and j - i < 1 << 16:
            j += 1
        s.put_bytes(struct.pack("<I", values[i]) + leb128(j - i))
        i = j
    return s.frame(5)


VECTORS = {
    "leb128_624485": enc_leb128([624485]),
    "tcomp32_worked": enc_tcomp32([0, 1, 3, 4, 2**32 - 1]),
    "tdic32_repeat_1000": enc_tdic32([42] * 1000),
    "rle_runs": enc_rle([7, 7, 7, 1, 2, 2] + [5] * 300),
    "rle_no_runs": enc_rle([1, 2, 3, 4]),
}

if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, frame in VECTORS.items():
        (OUT / f"{name}.hex").write_text(frame.hex() + "\n")
        print(name, len(frame), "bytes")

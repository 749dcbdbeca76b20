#!/usr/bin/env python3
"""Writes the golden wire payloads (hex, one file per message) with struct."""
import struct
from pathlib import Path

HEAD = b"CEMA" + bytes([1])


def vec(values):
    return struct.pack("<I", len(values)) + b"".join(struct.pack("<f", v) for v in values)


def client_hello():
    return HEAD + bytes([1]) + struct.pack("<IQ", 7, 0x0123456789ABCDEF)


def server_hello():
    return HEAD + bytes([2]) + struct.pack("<BQ", 1, 42)


def sample_batch():
    body = struct.pack("<QI", 3, 2)
    body += struct.pack("<Q", 10) + vec([1.0, -2.5])
    body += struct.pack("<Q", 11) + vec([0.5, 0.25])
    return HEAD + bytes([3]) + body


def sample_batch_empty():
    return HEAD + bytes([3]) + struct.pack("<QI", 9, 0)


def param_update():
    body = struct.pack("<QI", 5, 2)
    body += struct.pack("<H", 0) + vec([1.0, 2.0]) + vec([0.0, -1.0])
    body += struct.pack("<H", 1) + vec([0.5]) + vec([0.125])
    return HEAD + bytes([4]) + body


def ack_zero():
    return HEAD + bytes([5]) + struct.pack("<Q", 0)


def ack():
    return HEAD + bytes([5]) + struct.pack("<Q", 0x1122334455667788)


for name, fn in [("client_hello", client_hello), ("server_hello", server_hello),
                 ("sample_batch", sample_batch), ("sample_batch_empty", sample_batch_empty),
                 ("param_update", param_update), ("ack_zero", ack_zero), ("ack", ack)]:
    Path(__file__).with_name(name + ".hex").write_text(fn().hex() + "\n")

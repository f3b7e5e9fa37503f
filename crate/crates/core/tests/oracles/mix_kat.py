"""Known-answer value for the SHA-256 counter-mode mixer.

out_i = SHA256(u32be(i) || u32be(out_len) || u64be(len(tag)) || tag ||
               u64be(n_blocks) || { u64be(len(b)) || b }*)
"""
import hashlib
import struct


def mix(blocks, out_len, tag):
    body = struct.pack(">Q", len(tag)) + tag + struct.pack(">Q", len(blocks))
    for b in blocks:
        body += struct.pack(">Q", len(b)) + b
    out = b""
    i = 0
    while len(out) < out_len:
        out += hashlib.sha256(struct.pack(">II", i, out_len) + body).digest()
        i += 1
    return out[:out_len]


print(mix([bytes(48)], 48, b"seed").hex())
print(mix([bytes(range(48)), b"\xff" * 16], 64, b"dprand/test").hex())

"""Independent re-implementation of the hashed 3-gram reference encoder.

Used once to produce the golden vectors frozen in test_embedding.cpp. It
shares no code with the C++ implementation.
"""
import math
import sys
import unicodedata

MASK = (1 << 64) - 1


def fnv1a(data: bytes, seed: int) -> int:
    h = 0xCBF29CE484222325
    for b in seed.to_bytes(8, "little") + data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def bucket(s: str, seed: int, dim: int):
    h = finalize(fnv1a(s.encode("utf-8"), seed))
    return h % dim, (-1.0 if h >> 63 else 1.0)


def encode(text: str, dim: int, seed: int):
    text = unicodedata.normalize("NFC", text)
    # str.split() with no argument splits on Unicode White_Space-like chars;
    # restrict to the White_Space property explicitly.
    ws = {0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x20, 0x85, 0xA0, 0x1680, 0x2028, 0x2029,
          0x202F, 0x205F, 0x3000} | set(range(0x2000, 0x200B))
    tokens, cur = [], []
    for ch in text:
        if ord(ch) in ws:
            if cur:
                tokens.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        tokens.append("".join(cur))
    out = []
    for tok in tokens:
        w = "<" + tok + ">"
        v = [0.0] * dim
        for i in range(len(w) - 2):
            idx, sign = bucket(w[i:i + 3], seed, dim)
            v[idx] += sign
        n = math.sqrt(sum(x * x for x in v))
        if n == 0.0:
            idx, sign = bucket(w, seed, dim)
            v = [0.0] * dim
            v[idx] = sign
        else:
            v = [x / n for x in v]
        out.append(v)
    return out


if __name__ == "__main__":
    dim, seed = int(sys.argv[1]), int(sys.argv[2])
    text = sys.argv[3]
    for v in encode(text, dim, seed):
        print(", ".join(repr(x) for x in v))

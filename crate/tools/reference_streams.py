#!/usr/bin/env python3
"""Independent reference implementation of the deterministic embedding streams.

Prints the frozen vectors used as oracle values in the Rust test suites.
Kept deliberately separate from the Rust code: any drift between the two
implementations is a bug in one of them.
"""

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK
    return h


def mix64(x: int) -> int:
    x &= MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def stream_at(seed: int, j: int) -> int:
    """j-th output of the splitmix64 stream seeded at `seed` (0-indexed)."""
    return mix64((seed + (j + 1) * GAMMA) & MASK)


def unit_interval(u: int) -> float:
    """Map a 64-bit word to [-1, 1) using the top 53 bits."""
    return ((u >> 11) * (2.0 ** -53)) * 2.0 - 1.0


def open_unit(u: int) -> float:
    """Map a 64-bit word to (0, 1) using the top 52 bits plus a half-step.

    52 bits keep every step exactly representable; with 53 bits the largest
    word would round up to exactly 1.0.
    """
    return ((u >> 12) + 0.5) * (2.0 ** -52)


def gaussian_at(key: int, index: int) -> float:
    """Standard normal draw: Box-Muller cosine branch over words 2i, 2i+1."""
    import math

    u1 = open_unit(stream_at(key, 2 * index))
    u2 = open_unit(stream_at(key, 2 * index + 1))
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(math.tau * u2)


def token_embed(token: str, dim: int):
    h0 = fnv1a64(token.encode("utf-8"))
    return [unit_interval(stream_at(h0, j)) for j in range(dim)]


def projection(seed: int, rows: int, cols: int):
    """rows x cols matrix, row-major, entries from the stream keyed by seed."""
    return [
        [unit_interval(stream_at(seed, r * cols + c)) for c in range(cols)]
        for r in range(rows)
    ]


def encode_description(tokens, token_dim: int, embed_dim: int, seed: int):
    embeds = [token_embed(t, token_dim) for t in tokens]
    mean = [sum(e[j] for e in embeds) / len(embeds) for j in range(token_dim)]
    proj = projection(seed, token_dim, embed_dim)
    out = [sum(proj[j][k] * mean[j] for j in range(token_dim)) for k in range(embed_dim)]
    norm = sum(v * v for v in out) ** 0.5
    return [v / norm for v in out]


def adam_two_steps():
    """Two Adam steps on f(t) = t^2 from t = 1, lr = 0.1, defaults elsewhere."""
    theta, m, v = 1.0, 0.0, 0.0
    b1, b2, eps, lr = 0.9, 0.999, 1e-8, 0.1
    for step in (1, 2):
        g = 2.0 * theta
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        mhat = m / (1.0 - b1 ** step)
        vhat = v / (1.0 - b2 ** step)
        theta -= lr * mhat / (vhat ** 0.5 + eps)
        print(f"  after step {step}: theta = {theta!r}")
    return theta


if __name__ == "__main__":
    print("fnv1a64(\"jump\") =", hex(fnv1a64(b"jump")))
    print("token_embed(\"jump\", 4):")
    for val in token_embed("jump", 4):
        print(f"  {val!r}")
    print("token_embed(\"kick\", 4):")
    for val in token_embed("kick", 4):
        print(f"  {val!r}")
    print("encode_description([\"jump\", \"high\"], token_dim=4, embed_dim=3, seed=7):")
    for val in encode_description(["jump", "high"], 4, 3, 7):
        print(f"  {val!r}")
    print("encode_description([\"jump\"], token_dim=4, embed_dim=3, seed=7):")
    for val in encode_description(["jump"], 4, 3, 7):
        print(f"  {val!r}")
    print("gaussian_at(99, 0) =", repr(gaussian_at(99, 0)))
    print("gaussian_at(99, 1) =", repr(gaussian_at(99, 1)))
    print("adam two steps on theta^2:")
    adam_two_steps()

"""Seeded 64-bit mixing primitives shared by all sketches.

Every hash in this package is a deterministic function of a 64-bit seed and
a coordinate index, built from the splitmix64 finalizer.  Full k-wise
independence is approximated by this mixing; the quality of that
approximation is validated empirically by the Monte-Carlo estimator tests.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_C1 = 0x9E3779B97F4A7C15
_C2 = 0xBF58476D1CE4E5B9
_C3 = 0x94D049BB133111EB

_NC1 = np.uint64(_C1)
_NC2 = np.uint64(_C2)
_NC3 = np.uint64(_C3)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

_INV53 = float(2.0 ** -53)


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int (scalar path)."""
    z = (x + _C1) & MASK64
    z = ((z ^ (z >> 30)) * _C2) & MASK64
    z = ((z ^ (z >> 27)) * _C3) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to a uint64 array."""
    z = x + _NC1
    z = (z ^ (z >> _S30)) * _NC2
    z = (z ^ (z >> _S27)) * _NC3
    return z ^ (z >> _S31)


def derive_seed(seed: int, *tags) -> int:
    """Derive an independent 64-bit subseed from (seed, tags).

    Tags may be ints or short strings; the chain is order sensitive, so
    derive_seed(s, "a", 0) and derive_seed(s, 0, "a") differ.
    """
    z = seed & MASK64
    for tag in tags:
        if isinstance(tag, str):
            for b in tag.encode():
                z = mix64(z ^ b)
        else:
            z = mix64(z ^ (int(tag) & MASK64))
    return mix64(z)


def seed_streams(seed: int, count: int, *tags) -> np.ndarray:
    """A uint64 array of `count` independent subseeds."""
    base = derive_seed(seed, *tags)
    idx = np.arange(count, dtype=np.uint64)
    return mix64_array(idx ^ np.uint64(base))


def to_unit(x: np.ndarray) -> np.ndarray:
    """Map uint64 words to floats in [0, 1) using the top 53 bits."""
    return (x >> _S11).astype(np.float64) * _INV53


def mix64_with(seeds: np.ndarray, key: np.uint64, out: np.ndarray, tmp: np.ndarray) -> np.ndarray:
    """out = mix64(seeds ^ key) without temporaries (hot-path variant).

    `out` and `tmp` are caller-owned uint64 scratch arrays of seeds' shape.
    """
    np.bitwise_xor(seeds, key, out=out)
    np.add(out, _NC1, out=out)
    np.right_shift(out, _S30, out=tmp)
    np.bitwise_xor(out, tmp, out=out)
    np.multiply(out, _NC2, out=out)
    np.right_shift(out, _S27, out=tmp)
    np.bitwise_xor(out, tmp, out=out)
    np.multiply(out, _NC3, out=out)
    np.right_shift(out, _S31, out=tmp)
    np.bitwise_xor(out, tmp, out=out)
    return out

"""Deterministic seed derivation and per-sample random streams."""

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def child_seed(master, name, index=0):
    """Stable 64-bit seed for (master seed, experiment name, sample index)."""
    payload = struct.pack("<Q", int(master) & _MASK64) + name.encode("utf-8")
    payload += struct.pack("<Q", int(index) & _MASK64)
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


def stream(seed, index=0):
    """Counter-based generator keyed by ``seed``; ``index`` selects the counter block.

    Streams for different indices never overlap, so sample ``i`` draws the
    same numbers no matter which worker generates it or in what order.
    """
    key = int(seed) & _MASK64
    counter = [0, 0, 0, int(index) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def standard_complex(rng, size):
    """Standard complex Gaussians, E|z|^2 = 1, built from two independent reals."""
    shape = (size,) if np.ndim(size) == 0 else tuple(size)
    pairs = rng.standard_normal(shape + (2,))
    return (pairs[..., 0] + 1j * pairs[..., 1]) / np.sqrt(2.0)

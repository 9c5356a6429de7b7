"""Deterministic, platform-independent random streams.

Every stochastic entity in a run (one per link) draws from its own
counter-based Philox stream whose 128-bit key is derived from the run seed
and a stable entity label. Adding or removing an entity never perturbs the
draws of any other entity, and the same (seed, label) pair yields the same
stream on every platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Domain separation constants; changing either invalidates recorded traces.
STREAM_DOMAIN = b"qkdnetsim.stream.v1"
KEYMAT_DOMAIN = b"qkdnetsim.keymat.v1"

_MASK64 = (1 << 64) - 1


def stream_key(seed: int, label: str) -> tuple[int, int]:
    """128-bit Philox key for an entity: (seed, low 64 bits of SHA-256(label))."""
    digest = hashlib.sha256(STREAM_DOMAIN + b"\x00" + label.encode("utf-8")).digest()
    return seed & _MASK64, int.from_bytes(digest[:8], "little")


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent Generator for one entity, keyed by (seed, label)."""
    key = np.array(stream_key(seed, label), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def key_material(seed: int, label: str, index: int, nbytes: int) -> bytes:
    """Deterministic pseudorandom octets for key-store entries.

    SHA-256 in counter mode over (domain, seed, label, index). Both endpoint
    stores of a link derive identical material without sharing state.
    """
    prefix = (
        KEYMAT_DOMAIN
        + b"\x00"
        + (seed & _MASK64).to_bytes(8, "little")
        + label.encode("utf-8")
        + b"\x00"
        + index.to_bytes(8, "little")
    )
    out = bytearray()
    counter = 0
    while len(out) < nbytes:
        out += hashlib.sha256(prefix + counter.to_bytes(4, "little")).digest()
        counter += 1
    return bytes(out[:nbytes])

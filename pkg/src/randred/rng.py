"""Seeded random streams.

All randomness in the package flows through counter-based Philox generators
keyed by 64-bit seeds.  Child seeds are derived with :func:`derive_seed`,
which hashes a master seed together with an arbitrary tag tuple via BLAKE2b.
Both choices are documented so that independent implementations can
reproduce every stream exactly: Philox4x64-10 as shipped with NumPy, and
the derivation

    seed = little-endian-uint64( BLAKE2b-8( "randred.v1" || field* ) )

where each field is rendered as ``str(value)`` in UTF-8 and prefixed with
its byte length rendered the same way (so ``("ab", "c")`` and ``("a",
"bc")`` derive different seeds).
"""

import hashlib

import numpy as np

_DOMAIN = b"randred.v1"


def derive_seed(master_seed, *parts) -> int:
    """Derive a child seed from a master seed and a tuple of tag values."""
    h = hashlib.blake2b(digest_size=8)
    h.update(_DOMAIN)
    for part in (master_seed, *parts):
        data = str(part).encode("utf-8")
        h.update(str(len(data)).encode("utf-8"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


def generator(seed) -> np.random.Generator:
    """Counter-based generator for the given 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))

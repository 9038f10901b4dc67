from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str | int) -> int:
    digest = hashlib.sha256(str(name).encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'little')


def make_rng(seed: int, *names: str | int) -> np.random.Generator:
    """Counter-based (Philox) generator for `seed`, split by a name path.

    The same seed and names always give the same stream; different names
    give independent streams.
    """
    sequence = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(_name_key(n) for n in names),
    )
    return np.random.Generator(np.random.Philox(sequence))

"""Named, isolated random streams derived from one master seed.

Paired experiments (same data and noise, different subsystem under test)
need independent streams that can be re-created selectively.  A stream is
identified by a short name; the mapping master_seed -> stream is a fixed,
documented hash so results are reproducible across runs and processes.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "resolve_rng"]


def _name_words(name: str) -> list[int]:
    # First 16 bytes of SHA-256 of the stream name, as four 32-bit words.
    digest = hashlib.sha256(name.encode("utf-8")).digest()[:16]
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Return the generator for the named stream of ``master_seed``.

    The same (seed, name) pair always yields the same stream; different
    names yield statistically independent streams.
    """
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, *_name_words(name)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def resolve_rng(seed: "int | np.random.Generator") -> np.random.Generator:
    """Accept either an integer seed or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(int(seed))

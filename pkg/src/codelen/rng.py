"""Deterministic seed derivation.

Every stochastic component draws from a numpy Generator produced here, so a
run is a pure function of its named seeds.  Independent streams are derived
from a root seed plus a path of labels/indices, which keeps sender and
receiver in lockstep without sharing Generator state.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK32 = 0xFFFFFFFF


def _as_words(part) -> list[int]:
    if isinstance(part, str):
        return [zlib.crc32(part.encode("utf-8")) & _MASK32]
    if isinstance(part, (int, np.integer)):
        v = int(part)
        # SeedSequence entropy words are uint32; split and bias-shift so
        # negative seeds map to distinct streams.
        v = v + (1 << 63) if v < 0 else v + 0
        return [v & _MASK32, (v >> 32) & _MASK32, 1 if part < 0 else 0]
    raise TypeError(f"seed path parts must be int or str, got {type(part)!r}")


def seed_sequence(*path) -> np.random.SeedSequence:
    words: list[int] = []
    for part in path:
        words.extend(_as_words(part))
    return np.random.SeedSequence(words)


def derive_rng(*path) -> np.random.Generator:
    """Generator for the stream identified by ``path`` (ints and labels)."""
    return np.random.default_rng(seed_sequence(*path))


def derive_seed(*path) -> int:
    """A stable 63-bit integer sub-seed for the stream identified by ``path``."""
    state = seed_sequence(*path).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) & 0x7FFFFFFF) << 32

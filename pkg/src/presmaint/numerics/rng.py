"""Seeded, splittable random streams.

All randomness in the package flows through Philox counter-based generators
derived from an integer seed plus a tuple of stream tags. Distinct tags give
statistically independent streams, so e.g. dropout noise and feedback
sampling can be decoupled: consuming one stream never perturbs another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *tags) -> np.random.Generator:
    """Generator for the stream identified by (seed, *tags).

    Same arguments always give a generator producing the same sequence;
    different tags give independent streams.
    """
    entropy = [int(seed)] + [_tag_to_int(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

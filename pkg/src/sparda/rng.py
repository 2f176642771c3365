"""Seeded random streams.

All randomness goes through numpy's Philox4x64 counter-based generator keyed
by a ``SeedSequence`` of ``(seed, *stream_keys)``, so independent tasks (for
example permutation ``k`` of a test) get their own reproducible stream.
"""

from __future__ import annotations

import numpy as np

GENERATOR = "numpy.random.Philox (4x64-10), keyed by SeedSequence(seed, *keys)"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF,
                                 *(int(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))

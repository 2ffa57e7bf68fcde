"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's counter-based Philox bit generator.  The version string is written
into every serialized report so a reader knows which stream produced it.
"""
from __future__ import annotations

import numpy as np

GENERATOR_NAME = "Philox4x64-10"
GENERATOR_VERSION = f"numpy-{np.__version__}/{GENERATOR_NAME}"


def make_rng(seed):
    """Return a ``numpy.random.Generator`` over Philox keyed by ``seed``.

    ``seed`` may be an int or a sequence of ints (hashed by SeedSequence).
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def derive_seed(*words):
    """Deterministically fold integer words into a single 63-bit seed."""
    ss = np.random.SeedSequence([int(w) & 0xFFFFFFFFFFFFFFFF for w in words])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

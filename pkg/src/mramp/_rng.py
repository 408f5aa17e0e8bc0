"""Keyed random streams.

Every random draw in the package comes from a counter-based Philox stream
keyed by ``(seed, purpose)``, so the measurement matrix, the signal, the
noise and the divergence probes are mutually independent and reproducible
no matter in which order (or in which worker) they are requested.
"""

import zlib

import numpy as np


def _tag(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def keyed_rng(seed, *purpose):
    """Return a ``numpy.random.Generator`` for ``(seed, *purpose)``.

    ``purpose`` items may be strings or non-negative integers.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag(p) for p in purpose]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *purpose):
    """Derive a 63-bit child seed, e.g. for a sweep cell or a trial."""
    return int(keyed_rng(seed, "derive", *purpose).integers(0, 2**63 - 1))

"""Named sub-stream seed derivation.

All randomness in an experiment flows from one top-level integer seed.
Sub-streams are derived as ``SeedSequence([seed, h])`` where ``h`` is the
first 8 bytes of ``sha256(label)`` interpreted as an unsigned integer, so
the mapping is stable across runs, platforms and processes.
"""

import hashlib

import numpy as np


def _label_entropy(label):
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def seed_sequence(seed, *labels):
    """SeedSequence for a named sub-stream of ``seed``."""
    entropy = [int(seed)] + [_label_entropy(lab) for lab in labels]
    return np.random.SeedSequence(entropy)


def stream(seed, *labels):
    """A ``numpy.random.Generator`` for a named sub-stream of ``seed``."""
    return np.random.default_rng(seed_sequence(seed, *labels))

"""Deterministic named substreams derived from one master seed.

Every source of randomness (replications, folds, test draws) hashes its name
onto the master seed so that paired designs share training draws exactly and
parallel runs reproduce the single-job reference bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(master: int, *keys) -> int:
    """Stable 63-bit seed for the substream named by ``keys``."""
    tag = repr((int(master),) + tuple(keys)).encode("utf-8")
    digest = hashlib.sha256(tag).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def substream(master: int, *keys) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, *keys))

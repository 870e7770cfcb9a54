"""Keyed, counter-based random streams.

Every random draw in remlab comes from a Philox generator whose 128-bit key
is derived from ``(root seed, purpose string, index...)`` with BLAKE2b.  Two
consequences:

* independent purposes never share a stream, and
* a value indexed by a counter (e.g. the thinning uniform of configuration
  rank ``r``) does not depend on the order in which it is generated, so
  results are independent of how work is split across threads.
"""
import hashlib

import numpy as np

_DOUBLE_SCALE = 2.0 ** -53


def derive_key(seed, purpose, *index):
    """Return a 128-bit integer key for ``(seed, purpose, *index)``."""
    payload = "|".join([str(int(seed)), str(purpose)] + [str(int(i)) for i in index])
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def generator(seed, purpose, *index):
    """A ``numpy.random.Generator`` on its own keyed Philox stream."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, purpose, *index)))


def uniforms_at(key, start, count):
    """Uniforms on [0, 1) for counters ``start, ..., start + count - 1``.

    The value at counter ``r`` is the ``r``-th 64-bit Philox output for ``key``
    mapped to 53 bits.  ``start`` must be a multiple of 4 (one Philox block).
    """
    if start % 4:
        raise ValueError("start must be a multiple of 4")
    bg = np.random.Philox(key=key)
    if start:
        bg.advance(start // 4)
    raw = bg.random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE

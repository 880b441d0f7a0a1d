"""Named, reproducible PRNG substreams.

All randomness in the library flows from a single integer seed through named
substreams, so adding a consumer to one stream can never shift the draws seen
by another.  Streams are numpy ``Generator`` objects over PCG64, derived via
``SeedSequence(seed, spawn_key=(stream_id, *extra))``.
"""

from __future__ import annotations

import numpy as np

# Fixed stream ids; never renumber, only append.
_STREAMS = {
    "datagen": 0,
    "solver": 1,
    "permutations": 2,
    "split": 3,
    "reduction": 4,
    "oracle": 5,
    "trial": 6,
}


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return the named PRNG substream for ``seed``.

    ``extra`` integers (e.g. a trial index) fork the stream further; the same
    ``(seed, name, extra)`` triple always yields the same generator state.
    """
    try:
        sid = _STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown PRNG stream {name!r}; known: {sorted(_STREAMS)}") from None
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(sid, *map(int, extra)))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Coerce a seed / generator / None into a Generator (None -> fresh seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        rng = 0
    return substream(int(rng), "solver")

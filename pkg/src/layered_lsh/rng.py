"""Deterministic stream-split randomness.

Every random draw in the package comes from a Philox counter-based bit
generator keyed by ``SeedSequence(seed, spawn_key=(stream_tag, *path))``.
The stream tags below partition the key space so that independent parts of
a run (hash rows, the outer hash, per-query offsets, dataset generation)
never share a stream, and so that any consumer holding the global seed can
regenerate a substream locally.  Reducers rely on this: query offsets are
never shipped over the simulated network, they are re-derived from
``(seed, query_id)``.

Gaussian variates use numpy's ziggurat sampler on top of the Philox
stream; uniforms are half-open as numpy documents them.  Given the same
seed, path, and numpy build, draws are identical across platforms and
across repeated calls.
"""

from __future__ import annotations

import numpy as np

# Stream tags. Values are arbitrary but frozen; changing them changes every
# derived dataset and hash family.
STREAM_INNER_ROW = 1
STREAM_OUTER = 2
STREAM_OFFSETS = 3
STREAM_DATA = 4
STREAM_QUERY = 5
STREAM_MAPPING = 6


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for one (seed, path) substream.

    Args:
        seed: global 64-bit unsigned run seed.
        path: stream tag followed by entity indices, e.g.
            ``(STREAM_OFFSETS, query_id)``. Entries must be non-negative.
    """
    ss = np.random.SeedSequence(seed, spawn_key=path)
    return np.random.Generator(np.random.Philox(ss))

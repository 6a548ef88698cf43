import numpy as np

ALGORITHM = 'PCG64'
"""The bit generator used for all substreams."""

VERSION = 1
"""Bumped whenever the derivation of substreams changes."""


def substream(seed: int, index: int) -> np.random.Generator:
    """Return the random generator for trajectory ``index`` of a run seeded
    with ``seed``.

    Substreams are derived with :py:class:`numpy.random.SeedSequence` spawn
    keys, so trajectory ``i`` sees the same numbers no matter how many workers
    a farm uses or in which order trajectories are scheduled."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(sequence))


def describe() -> dict:
    return {'algorithm': ALGORITHM, 'version': VERSION}

"""Hierarchical, schedule-independent random seeding.

Every random draw in an experiment descends from a single master seed
through a tree of `numpy.random.SeedSequence` spawn keys, so results do
not depend on how work is distributed across processes.  The fixed realms
keep realization randomness, trajectory randomness and shot randomness in
disjoint streams even when they share an index.
"""

from numpy.random import Generator, PCG64, SeedSequence

REALM_REALIZATION = 0
REALM_TRAJECTORY = 1
REALM_SHOT = 2
REALM_CALIBRATION = 3


def seed_sequence(master_seed: int, *path: int) -> SeedSequence:
    """Seed sequence for node `path` of the seed tree under `master_seed`."""
    return SeedSequence(entropy=master_seed, spawn_key=tuple(path))


def rng_at(master_seed: int, *path: int) -> Generator:
    """Deterministic generator for node `path` of the seed tree."""
    return Generator(PCG64(seed_sequence(master_seed, *path)))

"""Seeded random streams.

Every stochastic routine in the package draws from a PCG64 generator keyed
by (master seed, trial index, role). Roles keep the independent sources
inside one trial (path bits, scenery cells, auxiliary draws) on separate
streams, so adding draws to one source never shifts another. Trials are
embarrassingly parallel: stream (s, i, r) never collides with (s, j, r)
for i != j.
"""

from __future__ import annotations

import numpy as np

# Role ids. Fixed integers, never reordered: the stream key is part of the
# reproducibility contract.
SCENERY = 0
PATH = 1
EXTENSION = 2
W1_EXTEND = 3
Q_FORWARD = 4
Q_BACKWARD = 5
PARTNER_PATH = 6
FLIPS = 7
AUX = 8


def stream(seed: int, trial: int = 0, role: int = 0) -> np.random.Generator:
    """Return the generator for (seed, trial, role)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, trial, role))))


def streams(seed: int, trial: int, roles: tuple[int, ...]) -> list[np.random.Generator]:
    return [stream(seed, trial, r) for r in roles]

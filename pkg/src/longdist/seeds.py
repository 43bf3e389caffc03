"""Sub-seed derivation.

Every random stream is derived from one user seed plus a fixed role tag, via
``numpy.random.SeedSequence([seed, tag])``. Re-running one stage with the same
seed reproduces that stage's stream regardless of what ran before it.
"""

import numpy as np

DATA = 1
INIT = 2
SHUFFLE = 3
SAMPLE = 4


def rng_for(seed: int, role: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), role]))

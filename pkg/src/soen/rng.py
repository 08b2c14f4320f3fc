"""Counter-based random streams keyed by event identity.

Each draw site gets its own Philox stream: the key is the run seed and the
counter's upper three words are the event identifiers, leaving the lowest
word free to advance. Draws therefore do not depend on processing order.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def event_generator(seed: int, *ids: int) -> np.random.Generator:
    if len(ids) > 3:
        raise ValueError("at most three event identifiers fit in the counter")
    words = [0] + [int(i) & _MASK64 for i in ids] + [0] * (3 - len(ids))
    counter = np.array(words, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64, counter=counter))


def binomial_sampler(seed: int, src: int, time_ps: int):
    """Per-pulse photon sampler: one Bernoulli trial per allocated photon."""

    def sample(allocated: int, efficiency: float, index: int) -> int:
        if allocated == 0:
            return 0
        return int(event_generator(seed, time_ps, src + 1, index).binomial(allocated, efficiency))

    return sample

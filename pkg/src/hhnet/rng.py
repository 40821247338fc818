"""Counter-based random streams.

Every draw is a pure function of (seed, kind, entity_id, counter), so
independent entities (synapses, neurons, the topology builder, the stimulus
builder) own independent streams whose state is just an integer counter.
This is what makes runs reproducible regardless of evaluation order or
thread count, and makes RNG state trivially serializable.

The hash is three rounds of the splitmix64 finalizer, one per key
component.  The same algorithm is implemented three times: with plain
Python ints (masked to 64 bits), with numpy uint64 arrays, and inside the
numba kernels (see _kernels.py); the test suite pins all three to each
other.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Stream kinds (entity-kind key of a stream)
KIND_CONNECTIVITY = 1
KIND_RECEPTOR_INIT = 2
KIND_DELAY = 3
KIND_STIM_SELECT = 4
KIND_STIM_ONSET = 5
KIND_SYNAPSE = 6


def _splitmix(z: int) -> int:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def hash_u64(seed: int, kind: int, entity_id: int, counter: int) -> int:
    """64-bit hash of a (seed, kind, entity, counter) tuple."""
    z = _splitmix((seed & _MASK) + kind)
    z = _splitmix((z + entity_id) & _MASK)
    z = _splitmix((z + counter) & _MASK)
    return z


def uniform(seed: int, kind: int, entity_id: int, counter: int) -> float:
    """Uniform draw in [0, 1). Consumes one counter value."""
    return (hash_u64(seed, kind, entity_id, counter) >> 11) * 2.0**-53


def normal(seed: int, kind: int, entity_id: int, counter: int) -> float:
    """Standard normal draw (Box-Muller). Consumes two counter values."""
    h1 = hash_u64(seed, kind, entity_id, counter)
    h2 = hash_u64(seed, kind, entity_id, counter + 1)
    u1 = ((h1 >> 11) + 1) * 2.0**-53  # in (0, 1], log-safe
    u2 = (h2 >> 11) * 2.0**-53
    return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))


# -- vectorized variants (numpy uint64, identical bit streams) --------------


def _splitmix_np(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def hash_u64_np(seed: int, kind: int, entity_ids: np.ndarray, counter: int) -> np.ndarray:
    ids = np.asarray(entity_ids, dtype=np.uint64)
    z = np.full(ids.shape, _splitmix((seed & _MASK) + kind), dtype=np.uint64)
    z = _splitmix_np(z + ids)
    z = _splitmix_np(z + np.uint64(counter & _MASK))
    return z


def uniform_np(seed: int, kind: int, entity_ids: np.ndarray, counter: int) -> np.ndarray:
    return (hash_u64_np(seed, kind, entity_ids, counter) >> np.uint64(11)) * 2.0**-53


def normal_np(seed: int, kind: int, entity_ids: np.ndarray, counter: int) -> np.ndarray:
    h1 = hash_u64_np(seed, kind, entity_ids, counter)
    h2 = hash_u64_np(seed, kind, entity_ids, counter + 1)
    u1 = ((h1 >> np.uint64(11)) + np.uint64(1)) * 2.0**-53
    u2 = (h2 >> np.uint64(11)) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

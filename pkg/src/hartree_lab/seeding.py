"""Per-sample seed derivation for reproducible parallel ensembles."""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns ``(output, next_state)``."""
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), state


def derive_seed(master: int, index: int) -> int:
    """SplitMix64 output for the state ``master ^ (index * GOLDEN)`` (mod 2^64)."""
    if index < 0:
        raise ValueError("index must be nonnegative")
    state = (int(master) & MASK64) ^ ((int(index) * GOLDEN) & MASK64)
    return splitmix64(state)[0]

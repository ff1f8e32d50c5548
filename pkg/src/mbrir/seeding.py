"""Stable 64-bit seed derivation (SplitMix64 finaliser)."""

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix_seed(master: int, index: int) -> int:
    """Seed for item ``index`` of a batch; independent of evaluation order."""
    return splitmix64(splitmix64(master & _MASK) ^ (index & _MASK))

"""Seeded random number generation on splitmix64.

Every stochastic choice in the workbench (map sampling, robot placement,
tree expansion, rollout policies, child seed derivation) goes through the
splitmix64 generator defined here.  The algorithm is three lines of 64-bit
arithmetic, so any language can reproduce a seed's exact stream:

    state  = (state + 0x9E3779B97F4A7C15) mod 2^64
    z      = state
    z      = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z      = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z ^ (z >> 31)

Derived seeds mix a sequence of integer components into a single 64-bit
value with :func:`mix64`: start from the base value and fold each component
with one splitmix output step (see the implementation, it is the published
derivation for child seeds).
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step, returning (new_state, output)."""
    state = (state + _GAMMA) & MASK64
    return state, _mix(state)


def mix64(base: int, *components: int) -> int:
    """Fold integer components into a derived 64-bit seed.

    Defined as: h = base; for each component c: h = mix(h + GAMMA + c).
    Negative components are reduced mod 2^64 first.
    """
    h = base & MASK64
    for c in components:
        h = _mix((h + _GAMMA + (c & MASK64)) & MASK64)
    return h


class SplitMix64:
    """Stateful generator over the splitmix64 sequence for one seed."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix64_next(self.state)
        return out

    def random(self) -> float:
        """Float in [0, 1) using the top 53 bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Integer in [0, n). Plain modulo; bias is negligible for small n
        and the formula must stay trivially portable."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return self.next_u64() % n

    def shuffle_prefix(self, items: list, k: int) -> list:
        """Partial Fisher-Yates: after the call, items[:k] is a uniform
        sample without replacement (items is modified in place)."""
        n = len(items)
        if k > n:
            raise ValueError("sample size exceeds population")
        for i in range(k):
            j = i + self.randrange(n - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

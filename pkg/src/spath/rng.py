"""Portable pseudo-random generator.

xorshift64* seeded through splitmix64. Both are fully specified by the
constants below, so any implementation reproduces the same stream:

    splitmix64:  z += 0x9E3779B97F4A7C15
                 z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB
                 z ^= z >> 31
    xorshift64*: x ^= x >> 12; x ^= x << 25; x ^= x >> 27
                 out = x * 0x2545F4914F6CDD1D

``random()`` uses the top 53 bits of the output.
"""

_MASK = (1 << 64) - 1


def splitmix64(z: int) -> tuple[int, int]:
    """Return ``(next_state, output)``."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    x = z
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return z, x ^ (x >> 31)


def derive_seed(*parts: int) -> int:
    """Combine integers into one 64-bit seed (order-sensitive)."""
    state = 0x5EED
    out = 0
    for p in parts:
        state, out = splitmix64(state ^ (int(p) & _MASK))
        state = out
    return out


class XorShift64Star:
    __slots__ = ("_x",)

    def __init__(self, seed: int = 0):
        _, x = splitmix64(int(seed) & _MASK)
        self._x = x or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._x
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._x = x
        return (x * 0x2545F4914F6CDD1D) & _MASK

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK - (_MASK + 1) % n
        while True:
            v = self.next_u64()
            if v <= limit:
                return v % n

    def getstate(self) -> int:
        return self._x

"""Deterministic per-purpose random streams based on splitmix64.

Every random draw in a run comes from a stream keyed by (master seed,
purpose, epoch), so replay is exact, draws are platform-independent, and
inserting or removing an event early in a run does not shift later draws.
The same arithmetic is reimplemented in the compiled fast path, which is
what keeps the two execution paths bit-identical.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1

# stream purposes
PICK = 1
JSTAR = 2
DELTA = 3
SCHED = 4


def mix64(z: int) -> int:
    """splitmix64 finalizer."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, purpose: int, epoch: int) -> int:
    s = mix64(master_seed & MASK64)
    s = mix64(s ^ ((purpose * 0xD1B54A32D192ED03) & MASK64))
    return mix64(s ^ ((epoch * 0x8BB84B93962EACC9) & MASK64))


class SplitMix:
    """Sequential splitmix64 generator over a derived stream seed."""

    __slots__ = ("state",)

    def __init__(self, master_seed: int, purpose: int, epoch: int):
        self.state = stream_seed(master_seed, purpose, epoch)

    def next64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def randrange(self, n: int) -> int:
        """Uniform-enough draw in [0, n); modulo bias is irrelevant here."""
        return self.next64() % n

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.randrange(hi - lo + 1)

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def sample(self, population, k: int) -> list:
        """First k elements of a partial Fisher-Yates shuffle of `population`.

        The caller passes the population in a canonical (sorted) order so
        the draw depends only on the stream, not on set iteration order.
        """
        pool = list(population)
        for i in range(k):
            j = i + self.randrange(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

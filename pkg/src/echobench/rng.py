"""Reproducible random numbers: splitmix64-seeded xoshiro256++.

Every stochastic component of the workbench draws from a Xoshiro256pp
instance so that runs are bit-identical across platforms and can be
matched by reimplementations in other languages. Draw order is part of
the reproducibility contract: callers must not reorder draws.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(x: int) -> int:
    """One splitmix64 output for seed ``x`` (advances the seed once)."""
    z = (x + _SPLITMIX_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Streaming splitmix64, used only to expand seeds."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _SPLITMIX_GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def derive_run_seed(base_seed: int, model_index: int, run_index: int) -> int:
    """Per-run seed: base_seed XOR splitmix64(model_index * 2^40 + run_index)."""
    return (base_seed ^ splitmix64_mix((model_index << 40) + run_index)) & MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    """xoshiro256++ 1.0 (Blackman & Vigna), state filled by splitmix64."""

    __slots__ = ("s0", "s1", "s2", "s3", "_spare_normal")

    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self.s0 = sm.next_u64()
        self.s1 = sm.next_u64()
        self.s2 = sm.next_u64()
        self.s3 = sm.next_u64()
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        v = int(self.random() * n)
        return v if v < n else n - 1

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def normal(self, mu: float = 0.0, sd: float = 1.0) -> float:
        """Gaussian draw via Box-Muller; pairs are cached for determinism."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return mu + sd * z
        u1 = self.random()
        while u1 <= 0.0:
            u1 = self.random()
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = r * math.sin(theta)
        return mu + sd * r * math.cos(theta)

    def categorical(self, probs) -> int:
        """Index sampled from a normalized probability vector."""
        u = self.random()
        acc = 0.0
        last = 0
        for i, p in enumerate(probs):
            acc += p
            last = i
            if u < acc:
                return i
        return last  # guard against rounding leaving acc slightly below 1

    def dirichlet_flat(self, k: int) -> np.ndarray:
        """Uniform draw from the (k-1)-simplex via normalized Exp(1) draws."""
        g = np.empty(k, dtype=np.float64)
        for i in range(k):
            u = self.random()
            while u >= 1.0 or u <= 0.0:
                u = self.random()
            g[i] = -math.log(1.0 - u)
        return g / g.sum()

    def uniform_matrix(self, rows: int, cols: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
        """Row-major matrix of uniform draws (row-major draw order)."""
        out = np.empty((rows, cols), dtype=np.float64)
        span = hi - lo
        flat = out.reshape(-1)
        for i in range(rows * cols):
            flat[i] = lo + span * self.random()
        return out

    def bernoulli_matrix(self, rows: int, cols: int, p: float) -> np.ndarray:
        """Row-major 0/1 matrix with entries 1 at probability p."""
        out = np.empty((rows, cols), dtype=np.float64)
        flat = out.reshape(-1)
        for i in range(rows * cols):
            flat[i] = 1.0 if self.random() < p else 0.0
        return out

    def normal_matrix(self, rows: int, cols: int, sd: float) -> np.ndarray:
        out = np.empty((rows, cols), dtype=np.float64)
        flat = out.reshape(-1)
        for i in range(rows * cols):
            flat[i] = self.normal(0.0, sd)
        return out

    def split(self, tag: int) -> "Xoshiro256pp":
        """Independent stream derived from this stream's next output and a tag."""
        return Xoshiro256pp(splitmix64_mix(self.next_u64() ^ tag))

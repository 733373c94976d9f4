"""Prime-modulus multiplicative congruential skip generator.

The skip sequence s_k = a*s_{k-1} mod q runs over Z_q^* with q prime and a
a primitive root, so it has full period q-1. The multiplier is restricted
to a*a <= q, which lets a*s mod q be evaluated with two sub-modulus
products (Schrage-style decomposition) -- every intermediate stays below q
and therefore fits in an unsigned 64-bit word, which is what makes the
numpy vector kernel exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numtheory

# Largest prime below 2^63, the production skip modulus.
Q_DEFAULT = (1 << 63) - 25

# Distinct prime factors of Q_DEFAULT - 1 = 2 * 3^4 * 17 * 23 * 319279 * 456065899,
# pinned so primitive-root checks at the default modulus need no factoring.
# Regression-tested against factor64.
Q_DEFAULT_FACTORS = (2, 3, 17, 23, 319279, 456065899)

# Shipped multipliers: odd candidates drawn once from (2^31, isqrt(Q_DEFAULT)],
# kept iff a*a <= q and a is a primitive root mod Q_DEFAULT. Verified in CI;
# statistical acceptance of generator output gates the set as a whole.
MULTIPLIER_TABLE = (
    2358014131,
    3027930091,
    2663770345,
    2989232495,
    2966714411,
    2517859571,
    2584241481,
    2831318399,
    3001167565,
    2425226767,
    3003776879,
    2548386679,
    2416530305,
    2983799827,
    2861425803,
    2203334683,
)

# Deliberately poor primitive roots mod Q_DEFAULT, usable only with
# allow_weak=True (resilience testing).
WEAK_MULTIPLIERS = (3, 6, 7, 10, 11)


@dataclass(frozen=True)
class SkipParams:
    """Fixed skip-generator constants: modulus q, multiplier a, and the
    precomputed pair q1 = q // a, q2 = q % a."""

    q: int
    a: int
    q1: int
    q2: int

    @classmethod
    def create(cls, a: int, q: int = Q_DEFAULT, allow_weak: bool = False) -> "SkipParams":
        if not numtheory.is_prime64(q):
            raise ValueError(f"skip modulus {q} is not prime")
        if not 1 <= a < q:
            raise ValueError(f"multiplier {a} outside [1, q)")
        if a * a > q:
            raise ValueError(f"multiplier {a} violates a*a <= q")
        if q == Q_DEFAULT:
            factors = Q_DEFAULT_FACTORS
            if a < (1 << 31) and not allow_weak:
                raise ValueError(
                    f"multiplier {a} below 2^31: weak multipliers need allow_weak=True"
                )
        else:
            factors = numtheory.factor64(q - 1).distinct_primes()
        if not numtheory.is_primitive_root(a, q, factors):
            raise ValueError(f"{a} is not a primitive root mod {q}")
        return cls(q=q, a=a, q1=q // a, q2=q % a)


@dataclass
class SkipState:
    """Current skip value s in Z_q^*."""

    s: int


def next_skip(state: SkipState, params: SkipParams) -> int:
    """Advance s to a*s mod q via the two-word decomposition; return new s.

    s1 = a*(s mod q1) and s2 = q2*(s div q1) are each < q, so the update
    needs only one conditional add to stay nonnegative.
    """
    s = state.s
    s1 = params.a * (s % params.q1)
    s2 = params.q2 * (s // params.q1)
    s = s1 - s2
    if s < 0:
        s += params.q
    state.s = s
    return s


def next_skip_array(s: np.ndarray, params: SkipParams) -> np.ndarray:
    """Vector form of next_skip on a uint64 array (elementwise identical)."""
    a = np.uint64(params.a)
    q1 = np.uint64(params.q1)
    q2 = np.uint64(params.q2)
    hi, lo = np.divmod(s, q1)
    s1 = a * lo
    s2 = q2 * hi
    return np.where(s1 >= s2, s1 - s2, s1 + np.uint64(params.q) - s2)


def skip_power(params: SkipParams, k: int) -> int:
    """a^k mod q (jump-ahead factor for k steps of the skip recurrence)."""
    return numtheory.powmod(params.a, k, params.q)


def lane_offset_seeds(params: SkipParams, s0: int, mv: int) -> list[int]:
    """Initial skips for mv lanes, spread across the skip period.

    Lane g starts at s0 * a^(g * floor((q-1)/mv)) mod q, so consecutive
    lanes are separated by about (q-1)/mv positions of the skip sequence.
    """
    if mv < 1:
        raise ValueError("lane count must be >= 1")
    if not 1 <= s0 <= params.q - 1:
        raise ValueError(f"s0={s0} outside Z_q^*")
    stride = (params.q - 1) // mv
    return [
        s0 * skip_power(params, g * stride) % params.q
        for g in range(mv)
    ]


def default_skip_params(index: int = 0, allow_weak: bool = False) -> SkipParams:
    """SkipParams for a shipped multiplier (index into MULTIPLIER_TABLE)."""
    return SkipParams.create(MULTIPLIER_TABLE[index % len(MULTIPLIER_TABLE)],
                             allow_weak=allow_weak)

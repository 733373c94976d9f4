"""Deterministic derivation of per-stream parameters.

Each (master_seed, stream_id) key is mapped through an affine-power
permutation of a combined index space onto a safe prime p1, which then
fixes its partner p2 (the safe prime nearest q/p1 within the one-in-10^6
tolerance) and a skip multiplier from the shipped table. The map is a
bijection modulo the prime-sized p1 ordinal space, so any run of up to
~1.29 million consecutive stream ids is guaranteed collision-free in p1
and hence in the modulus n.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass

import numpy as np

from . import numtheory, rsacore
from .skipgen import MULTIPLIER_TABLE, Q_DEFAULT, SkipParams

DEFAULT_MASTER_SEED = 0x243F6A8885A308D3  # arbitrary published constant
DEFAULT_TOLERANCE = 1e-6

SQRT_Q = 3037000499  # isqrt(Q_DEFAULT)

# p1 is drawn from (2^31, isqrt(q)], p2 lands near q/p1 in (isqrt(q), 2^32).
P1_WINDOW = ((1 << 31) + 1, SQRT_Q + 1)

# Safe-prime counts of the two windows, established once by the segmented
# sieve (the census test re-derives them; their sum is the full
# [2^31, 2^32] census of 3,060,794).
N_P1_WINDOW = 1_291_847
N_P2_WINDOW = 1_768_947

# Index-space radices: the largest primes not exceeding the window counts.
# Prime radices make x -> x^EPSILON a bijection mod K_P1, which is what
# gives consecutive stream ids distinct p1 ordinals.
K_P1 = 1_291_831
K_P2 = 1_768_937

# Spreading stride and mixing exponent for the affine-power map, fixed
# against the shipped table sizes: gcd(SIGMA, index space) = 1 and
# gcd(EPSILON, phi(index space)) = 1, re-checked at first derivation.
SIGMA = 35_705_744_587
EPSILON = 7


class NotFound(LookupError):
    """No qualifying safe prime exists in the requested range/window."""


class DerivationExhausted(RuntimeError):
    """No valid parameter set within the bounded ordinal advance."""


@dataclass(frozen=True)
class StreamKey:
    """Master seed (time-stamp analogue) plus stream identifier."""

    master_seed: int
    stream_id: int


# --------------------------------------------------------------------------
# segmented sieve

_SEGMENT = 1 << 24


@functools.lru_cache(maxsize=1)
def _base_odd_primes() -> np.ndarray:
    """Odd primes below 2^16, enough to sieve any window below 2^32."""
    limit = 1 << 16
    mask = np.ones(limit, dtype=bool)
    mask[:2] = False
    for i in range(2, 257):
        if mask[i]:
            mask[i * i :: i] = False
    return np.flatnonzero(mask)[1:].astype(np.int64)


def _odd_prime_mask(lo: int, hi: int) -> tuple[int, np.ndarray]:
    """(first_odd, mask) where mask[i] == is_prime(first_odd + 2i), covering
    [lo, hi). Requires 3 <= lo and hi <= 2^32."""
    lo_odd = lo | 1
    count = max(0, (hi - lo_odd + 1) // 2)
    mask = np.ones(count, dtype=bool)
    if count == 0:
        return lo_odd, mask
    for p in _base_odd_primes():
        p = int(p)
        if p * p >= hi:
            break
        start = max(p * p, (lo_odd + p - 1) // p * p)
        if start % 2 == 0:
            start += p
        if start < hi:
            mask[(start - lo_odd) // 2 :: p] = False
    return lo_odd, mask


def safe_primes_in(lo: int, hi: int) -> np.ndarray:
    """Sorted safe primes in [lo, hi) (hi <= 2^32), via two sieve passes:
    one for p, one for (p-1)/2."""
    lo = max(lo, 2)
    if hi > (1 << 32):
        raise ValueError("sieve windows are limited to 2^32")
    if lo >= hi:
        return np.empty(0, dtype=np.uint64)
    small = [p for p in (5, 7) if lo <= p < hi]
    if hi <= 11:
        return np.asarray(small, dtype=np.uint64)
    body_lo = max(lo, 11)
    # candidates are p = 3 (mod 4) so that (p-1)/2 is odd
    first = body_lo + (3 - body_lo) % 4
    if first >= hi:
        return np.asarray(small, dtype=np.uint64)
    p_lo_odd, pmask = _odd_prime_mask(first, hi)
    cand_idx = np.arange(0, len(pmask), 2)
    p_cand = first + 4 * np.arange(len(cand_idx), dtype=np.int64)
    s_first = (first - 1) // 2
    s_lo_odd, smask = _odd_prime_mask(s_first, (int(p_cand[-1]) - 1) // 2 + 2)
    ok = pmask[cand_idx] & smask[: len(cand_idx)]
    return np.concatenate([
        np.asarray(small, dtype=np.uint64),
        p_cand[ok].astype(np.uint64),
    ])


def nth_safe_prime_in(lo: int, hi: int, k: int) -> int:
    """The k-th (0-based, ascending) safe prime >= lo; NotFound if fewer
    than k+1 safe primes exist below hi."""
    if lo >= hi:
        raise ValueError("empty range")
    if k < 0:
        raise ValueError("ordinal must be >= 0")
    if hi <= (1 << 32):
        seen = 0
        for start in range(lo, hi, _SEGMENT):
            arr = safe_primes_in(start, min(start + _SEGMENT, hi))
            if seen + len(arr) > k:
                return int(arr[k - seen])
            seen += len(arr)
        raise NotFound(f"fewer than {k + 1} safe primes in [{lo}, {hi})")
    # beyond the sieve window: direct scan (slow path, kept for generality)
    seen = 0
    p = lo
    while p < hi:
        if numtheory.is_safe_prime(p):
            if seen == k:
                return p
            seen += 1
        p += 1
    raise NotFound(f"fewer than {k + 1} safe primes in [{lo}, {hi})")


class _P1Ordinals:
    """Lazily extended sorted table of the p1-window safe primes.

    Segments are sieved on demand and appended under a lock; lookups by
    ordinal are O(1) once the prefix containing the ordinal exists.
    """

    def __init__(self, lo: int, hi: int) -> None:
        self.lo = lo
        self.hi = hi
        self._next = lo
        self._chunks: list[np.ndarray] = []
        self._flat: np.ndarray = np.empty(0, dtype=np.uint64)
        self._lock = threading.Lock()

    def nth(self, k: int) -> int:
        if k < len(self._flat):
            return int(self._flat[k])
        with self._lock:
            while k >= len(self._flat) and self._next < self.hi:
                end = min(self._next + _SEGMENT, self.hi)
                self._chunks.append(safe_primes_in(self._next, end))
                self._next = end
                self._flat = np.concatenate(self._chunks)
        if k >= len(self._flat):
            raise NotFound(f"ordinal {k} beyond the p1 window")
        return int(self._flat[k])


_P1_TABLE = _P1Ordinals(*P1_WINDOW)


# --------------------------------------------------------------------------
# pair search

def find_pair(p1: int, q: int = Q_DEFAULT, tol: float = DEFAULT_TOLERANCE) -> tuple[int, int]:
    """Partner safe prime for p1: the p2 nearest floor(q/p1) (smaller first
    on ties) with |p1*p2 - q| <= tol*q, p2 != p1, and 2^31 < p2 < 2^32.

    Raises NotFound when no candidate lies in the tolerance window. Only
    residues 11 mod 12 are tested; every safe prime above 7 has that form.
    """
    if not (1 << 31) < p1 < (1 << 32) or not numtheory.is_safe_prime(p1):
        raise ValueError(f"p1={p1} is not a 32-bit safe prime")
    target = q // p1
    bound = tol * q
    lo = target - (target - 11) % 12
    hi = lo + 12
    while True:
        lo_ok = lo > (1 << 31) and abs(p1 * lo - q) <= bound
        hi_ok = hi < (1 << 32) and abs(p1 * hi - q) <= bound
        if not lo_ok and not hi_ok:
            raise NotFound(f"no safe-prime partner for p1={p1} within {tol} of q")
        # nearer side first; the smaller candidate wins a distance tie
        if lo_ok and (not hi_ok or target - lo <= hi - target):
            p2, lo = lo, lo - 12
        else:
            p2, hi = hi, hi + 12
        if p2 != p1 and numtheory.is_safe_prime(p2):
            return p1, p2


# --------------------------------------------------------------------------
# derivation

@functools.lru_cache(maxsize=8)
def _index_space(n_a: int) -> int:
    """Combined index-space size; validates the published constants for
    this table size (errors loudly on a bad configuration)."""
    space = K_P1 * K_P2 * n_a
    if not numtheory.is_prime64(K_P1) or not numtheory.is_prime64(K_P2):
        raise RuntimeError("index radices must be prime")
    if math.gcd(SIGMA, space) != 1:
        raise RuntimeError("SIGMA shares a factor with the index space")
    phi = 1
    for p, mult in numtheory.factor64(space).factors:
        phi *= (p - 1) * p ** (mult - 1)
    if math.gcd(EPSILON, phi) != 1:
        raise RuntimeError("EPSILON shares a factor with phi(index space)")
    return space


def stream_indices(key: StreamKey, n_a: int = len(MULTIPLIER_TABLE)) -> tuple[int, int]:
    """(p1 ordinal, multiplier index) for a stream key.

    beta = (t + id*SIGMA)^EPSILON mod (K_P1*K_P2*n_a); the low radix digit
    selects p1 and the high digit selects the multiplier.
    """
    space = _index_space(n_a)
    beta = pow((key.master_seed + key.stream_id * SIGMA) % space, EPSILON, space)
    return beta % K_P1, beta // (K_P1 * K_P2) % n_a


def derive_stream_params(key: StreamKey, e: int = rsacore.DEFAULT_EXPONENT,
                         multiplier_table: tuple[int, ...] = MULTIPLIER_TABLE,
                         skip_mode: str = rsacore.SKIP_LCG,
                         skip_const: int = 0,
                         multiplier: int | None = None) -> rsacore.GeneratorParams:
    """GeneratorParams for a stream key: pure, platform-stable, and
    collision-free in (p1, p2) over consecutive id ranges.

    multiplier overrides the table choice (interstream testing wants a
    common multiplier across streams). Raises DerivationExhausted if no
    valid pair emerges within the bounded ordinal advance.
    """
    if not multiplier_table:
        raise ValueError("multiplier table must be non-empty")
    ordinal, a_index = stream_indices(key, len(multiplier_table))
    a = multiplier if multiplier is not None else multiplier_table[a_index]
    skip = SkipParams.create(a)
    for step in range(256):
        p1 = _P1_TABLE.nth((ordinal + step) % K_P1)
        try:
            p1, p2 = find_pair(p1)
            return rsacore.make_params(p1, p2, e, skip,
                                       skip_mode=skip_mode, skip_const=skip_const)
        except (NotFound, rsacore.InvalidParams):
            continue
    raise DerivationExhausted(f"no valid parameters near ordinal {ordinal}")

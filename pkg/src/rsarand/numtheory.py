"""Exact 64-bit modular arithmetic, primality, factoring, primitive roots.

Everything here is a pure function on plain Python integers, so the
arithmetic is exact for any operand size; the 64-bit naming reflects the
intended domain (and the deterministic primality witnesses are only valid
below 2^64).
"""

from __future__ import annotations

from dataclasses import dataclass


class NotInvertible(ValueError):
    """Raised when a modular inverse does not exist (gcd != 1)."""


def _sieve(limit: int) -> list[int]:
    mask = bytearray([1]) * limit
    mask[0:2] = b"\x00\x00"
    for i in range(2, int(limit**0.5) + 1):
        if mask[i]:
            mask[i * i :: i] = bytearray(len(range(i * i, limit, i)))
    return [i for i in range(limit) if mask[i]]

SMALL_PRIMES = tuple(_sieve(100))

# Deterministic Miller-Rabin witness sets: the twelve smallest prime bases
# decide primality for all n < 2^64, the five smallest for n < 2^32.
MR_BASES_64 = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
MR_BASES_32 = (2, 3, 5, 7, 11)


def mulmod(x: int, y: int, m: int) -> int:
    """(x*y) mod m, exact for any operands (no 64-bit overflow concerns)."""
    return (x * y) % m


def powmod(b: int, e: int, m: int) -> int:
    """b**e mod m by square-and-multiply; b**0 is 1 mod m."""
    return pow(b, e, m)


def modinv(a: int, m: int) -> int:
    """Inverse of a mod m via the extended Euclidean algorithm.

    Raises NotInvertible when gcd(a, m) != 1.
    """
    r0, r1 = m, a % m
    x0, x1 = 0, 1
    while r1:
        qt = r0 // r1
        r0, r1 = r1, r0 - qt * r1
        x0, x1 = x1, x0 - qt * x1
    if r0 != 1:
        raise NotInvertible(f"{a} has no inverse mod {m} (gcd={r0})")
    return x0 % m


def miller_rabin_base(n: int, g: int) -> bool:
    """Strong probable prime test of odd n >= 3 to base g in [2, n-2].

    Writes n-1 = 2^u * t with t odd and checks g^t = 1 (mod n) or
    g^(2^j t) = n-1 (mod n) for some 0 <= j < u.
    """
    t = n - 1
    u = 0
    while t % 2 == 0:
        t //= 2
        u += 1
    x = pow(g, t, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(u - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_prime64(n: int) -> bool:
    """Exact primality verdict for any n < 2^64."""
    if n < 2:
        return False
    for p in SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if n < 10201:  # no prime factor below 101, so composite would need two
        return True
    bases = MR_BASES_32 if n < (1 << 32) else MR_BASES_64
    return all(miller_rabin_base(n, g) for g in bases)


def is_safe_prime(p: int) -> bool:
    """True iff p and (p-1)/2 are both prime."""
    return p > 4 and is_prime64(p) and is_prime64((p - 1) // 2)


@dataclass(frozen=True)
class Factorization:
    """Complete prime factorization: value = prod(p**k for p, k in factors)."""

    value: int
    factors: tuple[tuple[int, int], ...]

    def distinct_primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)


def _rho_brent(n: int) -> int:
    """Nontrivial factor of odd composite n (Brent cycle, batched gcd).

    Deterministic: retries with incremented polynomial constant until a
    proper factor appears, so it terminates for every 64-bit composite.
    """
    from math import gcd

    c = 1
    while True:
        y, r, q = 2, 1, 1
        g = 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(128, r - k)):
                    y = (y * y + c) % n
                    q = q * (x - y) % n
                g = gcd(q, n)
                k += 128
            r *= 2
        if g == n:
            # backtrack one step at a time from the last batch
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = gcd(x - ys, n)
        if g != n:
            return g
        c += 1


def factor64(n: int) -> Factorization:
    """Prime factorization of n >= 2; trial division then Pollard rho."""
    if n < 2:
        raise ValueError("factor64 requires n >= 2")
    value = n
    counts: dict[int, int] = {}
    for p in SMALL_PRIMES:
        while n % p == 0:
            counts[p] = counts.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if is_prime64(m):
            counts[m] = counts.get(m, 0) + 1
            continue
        f = _rho_brent(m)
        stack.append(f)
        stack.append(m // f)
    factors = tuple(sorted(counts.items()))
    return Factorization(value=value, factors=factors)


def is_primitive_root(a: int, p: int, p1_factors: tuple[int, ...] | None = None) -> bool:
    """True iff a generates the full multiplicative group mod prime p.

    a is a primitive root iff a^((p-1)/f) != 1 for every distinct prime f
    dividing p-1. Callers that already know the factorization of p-1 can
    pass the distinct primes to skip factoring.
    """
    if not 1 <= a < p:
        return False
    if p == 2:
        return True
    if a == 1:
        return False
    if p1_factors is None:
        p1_factors = factor64(p - 1).distinct_primes()
    return all(pow(a, (p - 1) // f, p) != 1 for f in p1_factors)

"""Lane-vectorized generation.

A VectorState advances Mv lanes in lockstep with one shared parameter set;
block k emits lane outputs in order gamma = 0..Mv-1, and the flattened
block sequence is the stream's output order. In lcg mode lane gamma is an
ordinary scalar stream whose initial skip is offset gamma*floor((q-1)/Mv)
skip-steps ahead, so the flattened output is exactly the documented
interleave of Mv scalar generators. In unit/const modes the lanes instead
partition the counter sequence (lane gamma takes messages m0 + (k*Mv +
gamma + 1)*v), which makes the flattened output identical to the scalar
stream itself.

All lane arithmetic is uint64 numpy; every intermediate is provably below
2^64 (32-bit primes for the residue math, the Schrage decomposition for
the skip update).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import skipgen
from .rsacore import (MAX_BELOW_ONE, SKIP_CONST, SKIP_LCG, SKIP_UNIT,
                      GeneratorParams, InvalidSeed, validate_params)

_U64 = np.uint64


@dataclass
class VectorState:
    """Mv lanes of (m1, m2, s) residues sharing one GeneratorParams."""

    params: GeneratorParams
    mv: int
    m1: np.ndarray
    m2: np.ndarray
    s: np.ndarray
    draws: int = 0
    _pending: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=_U64))


def init_vector(params: GeneratorParams, m0: int = 0, s0: int = 1,
                mv: int = 1) -> VectorState:
    """VectorState seeded like the scalar init, with lane offsets applied."""
    validate_params(params)
    if mv < 1:
        raise ValueError("lane count must be >= 1")
    if m0 < 0 or s0 < 0:
        raise InvalidSeed("seeds must be nonnegative")
    p1, p2, n = params.p1, params.p2, params.n
    if params.skip_mode == SKIP_LCG:
        s0 = s0 % params.skip.q
        if s0 == 0:
            raise InvalidSeed(f"s0={s0} is divisible by q")
        seeds = skipgen.lane_offset_seeds(params.skip, s0, mv)
        m1 = np.full(mv, m0 % p1, dtype=_U64)
        m2 = np.full(mv, m0 % p2, dtype=_U64)
        s = np.array(seeds, dtype=_U64)
    else:
        v = 1 if params.skip_mode == SKIP_UNIT else params.skip_const
        # lane g holds message m0 + (g+1-mv)*v and steps by mv*v, so the
        # interleaved blocks replay the scalar counter sequence exactly
        lane_m = [(m0 + (g + 1 - mv) * v) % n for g in range(mv)]
        m1 = np.array([m % p1 for m in lane_m], dtype=_U64)
        m2 = np.array([m % p2 for m in lane_m], dtype=_U64)
        s = np.full(mv, mv * v % n, dtype=_U64)
    return VectorState(params=params, mv=mv, m1=m1, m2=m2, s=s)


def _pow_lanes(base: np.ndarray, e: int, p: np.uint64) -> np.ndarray:
    """base**e mod p elementwise by square-and-multiply (operands < 2^32,
    so products are exact in uint64)."""
    result: np.ndarray | None = None
    b = base
    while e:
        if e & 1:
            result = b.copy() if result is None else result * b % p
        e >>= 1
        if e:
            b = b * b % p
    assert result is not None
    return result


def next_block_raw(state: VectorState) -> np.ndarray:
    """Advance every lane one step; return the Mv raw ciphertexts."""
    params = state.params
    if params.skip_mode == SKIP_LCG:
        state.s = skipgen.next_skip_array(state.s, params.skip)
    p1 = _U64(params.p1)
    p2 = _U64(params.p2)
    m1 = state.m1 = (state.m1 + state.s) % p1
    m2 = state.m2 = (state.m2 + state.s) % p2
    c1 = _pow_lanes(m1, params.e, p1)
    c2 = _pow_lanes(m2, params.e, p2)
    d = (c1 + p1 - c2 % p1) % p1
    state.draws += state.mv
    return d * _U64(params.p2inv) % p1 * p2 + c2


def floats_from_raw(raw: np.ndarray, params: GeneratorParams) -> np.ndarray:
    """IEEE mapping c -> c/n as doubles, clamped below 1.0; elementwise
    identical to the scalar next_f64."""
    r = raw.astype(np.float64) / params.n_float
    return np.minimum(r, MAX_BELOW_ONE)


def next_block(state: VectorState) -> np.ndarray:
    """Advance one step; return the Mv doubles in lane order."""
    return floats_from_raw(next_block_raw(state), state.params)


def take_raw(state: VectorState, count: int) -> np.ndarray:
    """Exactly count raw values in stream order; partial blocks are
    buffered so consecutive takes are seamless."""
    if count < 0:
        raise ValueError("count must be >= 0")
    parts = []
    have = 0
    if len(state._pending):
        head = state._pending[:count]
        state._pending = state._pending[len(head):]
        parts.append(head)
        have = len(head)
    while have < count:
        block = next_block_raw(state)
        need = count - have
        if len(block) > need:
            parts.append(block[:need])
            state._pending = block[need:]
            have = count
        else:
            parts.append(block)
            have += len(block)
    if not parts:
        return np.empty(0, dtype=_U64)
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def take_floats(state: VectorState, count: int) -> np.ndarray:
    """Exactly count doubles in stream order."""
    return floats_from_raw(take_raw(state, count), state.params)

"""Single-stream generator core.

A stream adds a pseudorandom skip to a message counter mod n = p1*p2 and
emits the modular exponential c = m^e mod n of each message. The message
is held as a residue pair (m1, m2) mod the two safe primes so that every
operation, including the exponentiation, fits comfortably in 64-bit
arithmetic; the ciphertext is recombined with Garner's formula. Floating
point outputs are c converted to double divided by n converted to double,
clamped below 1.0, which is bit-identical to the vectorized path.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

from . import numtheory
from .skipgen import Q_DEFAULT, SkipParams, default_skip_params, next_skip

DEFAULT_EXPONENT = 9
MAX_EXPONENT = 257

SKIP_LCG = "lcg"
SKIP_UNIT = "unit"
SKIP_CONST = "const"
SKIP_MODES = (SKIP_LCG, SKIP_UNIT, SKIP_CONST)

# Largest double below 1.0; returned when c/n rounds up to 1.0.
MAX_BELOW_ONE = math.nextafter(1.0, 0.0)

SNAPSHOT_HEADER = "rsarand-snapshot-v1"
PARAMS_HEADER = "rsarand-params-v1"

_PARAM_FIELDS = ("p1", "p2", "n", "e", "q", "a", "q1", "q2", "p2inv", "b",
                 "skip_mode", "skip_const", "test_mode")
_STATE_FIELDS = ("m1", "m2", "s", "draws")


class InvalidParams(ValueError):
    """A generator-parameter invariant is violated (message names it)."""


class InvalidSeed(ValueError):
    """Seed skip s0 is congruent to 0 mod q."""


class UnsupportedSkipMode(RuntimeError):
    """Operation defined only for the lcg skip mode."""


class MalformedSnapshot(ValueError):
    """Snapshot text is missing fields or violates an invariant."""


@dataclass(frozen=True)
class GeneratorParams:
    """Fixed per-stream constants.

    p1 < p2 is not required, but p2inv is always the inverse of p2 mod p1.
    b = q(q-1)/2 mod n is the message offset accumulated by one full skip
    period. test_mode marks parameter sets exempt from the production size
    constraints (miniature instances, weak multipliers, degenerate e).
    """

    p1: int
    p2: int
    n: int
    e: int
    skip: SkipParams
    p2inv: int
    b: int
    skip_mode: str = SKIP_LCG
    skip_const: int = 0
    test_mode: bool = False
    n_float: float = 0.0


@dataclass
class GeneratorState:
    """Mutable stream state: message residues, current skip, draw count."""

    m1: int
    m2: int
    s: int
    draws: int = 0


def make_params(p1: int, p2: int, e: int = DEFAULT_EXPONENT,
                skip: SkipParams | None = None,
                skip_mode: str = SKIP_LCG, skip_const: int = 0,
                test_mode: bool = False) -> GeneratorParams:
    """Build and validate GeneratorParams; raises InvalidParams."""
    if skip is None:
        skip = default_skip_params()
    if p1 == p2:
        raise InvalidParams("p1 == p2")
    n = p1 * p2
    params = GeneratorParams(
        p1=p1, p2=p2, n=n, e=e, skip=skip,
        p2inv=_safe_inverse(p2, p1),
        b=skip.q * (skip.q - 1) // 2 % n,
        skip_mode=skip_mode, skip_const=skip_const,
        test_mode=test_mode, n_float=float(n),
    )
    validate_params(params)
    return params


def _safe_inverse(a: int, m: int) -> int:
    try:
        return numtheory.modinv(a, m)
    except numtheory.NotInvertible as exc:
        raise InvalidParams(f"p2 not invertible mod p1: {exc}") from exc


def validate_params(params: GeneratorParams) -> None:
    """Check every GeneratorParams invariant; raises InvalidParams naming
    the first violated one."""
    p1, p2, n, e = params.p1, params.p2, params.n, params.e
    skip = params.skip

    def fail(msg: str) -> None:
        raise InvalidParams(msg)

    if p1 == p2:
        fail("p1 == p2")
    if n != p1 * p2:
        fail("n != p1*p2")
    if not numtheory.is_safe_prime(p1):
        fail(f"p1={p1} is not a safe prime")
    if not numtheory.is_safe_prime(p2):
        fail(f"p2={p2} is not a safe prime")
    if e < 1 or e % 2 == 0:
        fail(f"exponent e={e} must be odd and positive")
    if e > MAX_EXPONENT:
        fail(f"exponent e={e} above {MAX_EXPONENT}")
    if not numtheory.is_prime64(skip.q):
        fail(f"q={skip.q} is not prime")
    if skip.a * skip.a > skip.q:
        fail("multiplier violates a*a <= q")
    if skip.q1 != skip.q // skip.a or skip.q2 != skip.q % skip.a:
        fail("inconsistent Schrage constants q1/q2")
    if not numtheory.is_primitive_root(skip.a, skip.q, _root_factors(skip.q)):
        fail(f"a={skip.a} is not a primitive root mod q")
    if math.gcd(n, skip.q) != 1:
        fail("gcd(n, q) != 1")
    if math.gcd(n, skip.q - 1) != 1:
        fail("gcd(n, q-1) != 1")
    if params.b != skip.q * (skip.q - 1) // 2 % n:
        fail("inconsistent period offset b")
    if params.b == 0:
        fail("period offset b is zero")
    if params.p2inv <= 0 or params.p2inv >= p1 or p2 * params.p2inv % p1 != 1:
        fail("p2inv is not the inverse of p2 mod p1")
    if params.skip_mode not in SKIP_MODES:
        fail(f"unknown skip mode {params.skip_mode!r}")
    if params.skip_mode == SKIP_CONST:
        if not 0 <= params.skip_const < n:
            fail("constant skip outside [0, n)")
    elif params.skip_const != 0:
        fail("skip_const must be 0 outside const mode")
    if params.n_float != float(n):
        fail("inconsistent cached n_float")

    if not params.test_mode:
        # test mode keeps the structural checks above but relaxes sizes,
        # the n ~ q constraint, e range, and exponent/totient coprimality
        # (the small worked examples need e=3 against phi = 60)
        if not (1 << 31) < p1 < (1 << 32):
            fail(f"p1={p1} outside (2^31, 2^32)")
        if not (1 << 31) < p2 < (1 << 32):
            fail(f"p2={p2} outside (2^31, 2^32)")
        if e < 3:
            fail("production exponent must be >= 3")
        if math.gcd(e, (p1 - 1) * (p2 - 1)) != 1:
            fail(f"gcd(e, (p1-1)(p2-1)) != 1 for e={e}")
        if skip.a < (1 << 31):
            fail(f"weak multiplier a={skip.a} requires test_mode")
        if abs(n - skip.q) > 1e-6 * skip.q:
            fail("|n - q| exceeds one part in 10^6")


def _root_factors(q: int) -> tuple[int, ...] | None:
    from .skipgen import Q_DEFAULT_FACTORS
    return Q_DEFAULT_FACTORS if q == Q_DEFAULT else None


def init(params: GeneratorParams, m0: int = 0, s0: int = 1) -> GeneratorState:
    """Fresh stream state from message seed m0 and skip seed s0.

    Default seeds (0, 1) reproduce the reference initialization. In const
    mode the skip register holds the constant and s0 is ignored.
    """
    validate_params(params)
    if m0 < 0 or s0 < 0:
        raise InvalidSeed("seeds must be nonnegative")
    if params.skip_mode == SKIP_CONST:
        s = params.skip_const
    else:
        s = s0 % params.skip.q
        if s == 0:
            raise InvalidSeed(f"s0={s0} is divisible by q")
    return GeneratorState(m1=m0 % params.p1, m2=m0 % params.p2, s=s)


def _garner(c1: int, c2: int, p1: int, p2: int, p2inv: int) -> int:
    """Recombine residues: (((c1-c2) * p2inv) mod p1) * p2 + c2, with the
    difference kept nonnegative."""
    return (c1 + p1 - c2 % p1) % p1 * p2inv % p1 * p2 + c2


def next_raw(state: GeneratorState, params: GeneratorParams) -> int:
    """Advance one step and return the raw ciphertext c in [0, n)."""
    if params.skip_mode == SKIP_LCG:
        s = next_skip(state, params.skip)
    elif params.skip_mode == SKIP_UNIT:
        s = state.s = 1
    else:
        s = state.s
    m1 = state.m1 = (state.m1 + s) % params.p1
    m2 = state.m2 = (state.m2 + s) % params.p2
    c1 = pow(m1, params.e, params.p1)
    c2 = pow(m2, params.e, params.p2)
    state.draws += 1
    return _garner(c1, c2, params.p1, params.p2, params.p2inv)


def next_f64(state: GeneratorState, params: GeneratorParams) -> float:
    """Next double in [0, 1): c and n converted to double, divided, and
    clamped to the largest double below 1.0 if the quotient rounds up."""
    r = next_raw(state, params) / params.n_float
    return r if r < 1.0 else MAX_BELOW_ONE


def take_raws(state: GeneratorState, params: GeneratorParams, count: int) -> list[int]:
    """count sequential raw draws (loop-hoisted next_raw for test oracles)."""
    if params.skip_mode != SKIP_LCG:
        return [next_raw(state, params) for _ in range(count)]
    sk = params.skip
    a, q, q1, q2 = sk.a, sk.q, sk.q1, sk.q2
    p1, p2, e, p2inv = params.p1, params.p2, params.e, params.p2inv
    m1, m2, s = state.m1, state.m2, state.s
    out = []
    append = out.append
    for _ in range(count):
        s1 = a * (s % q1)
        s2 = q2 * (s // q1)
        s = s1 - s2
        if s < 0:
            s += q
        m1 = (m1 + s) % p1
        m2 = (m2 + s) % p2
        c2 = pow(m2, e, p2)
        append((pow(m1, e, p1) + p1 - c2 % p1) % p1 * p2inv % p1 * p2 + c2)
    state.m1, state.m2, state.s = m1, m2, s
    state.draws += count
    return out


def take_floats(state: GeneratorState, params: GeneratorParams, count: int) -> list[float]:
    """count sequential next_f64 draws."""
    nf = params.n_float
    return [min(c / nf, MAX_BELOW_ONE) for c in take_raws(state, params, count)]


def decrypt(c: int, params: GeneratorParams) -> int:
    """Invert the exponentiation: c^d mod n with d = e^-1 mod (p1-1)(p2-1).

    Validation hook only; never on the generation path.
    """
    d = numtheory.modinv(params.e, (params.p1 - 1) * (params.p2 - 1))
    return pow(c, d, params.n)


def jump_periods(state: GeneratorState, params: GeneratorParams, u: int) -> GeneratorState:
    """Advance u full skip periods, i.e. u*(q-1) draws, in O(1).

    One period leaves the skip unchanged and adds b to the message, so the
    jump adds u*b. Only meaningful for the lcg mode; unit/const jumps are
    the trivial closed form m += k*skip and are not routed through here.
    """
    if params.skip_mode != SKIP_LCG:
        raise UnsupportedSkipMode(f"jump_periods undefined for {params.skip_mode} mode")
    ub = u * params.b
    state.m1 = (state.m1 + ub) % params.p1
    state.m2 = (state.m2 + ub) % params.p2
    state.draws += u * (params.skip.q - 1)
    return state


@dataclass(frozen=True)
class StreamSnapshot:
    """Complete restartable image of a stream: params plus state."""

    params: GeneratorParams
    m1: int
    m2: int
    s: int
    draws: int

    def to_text(self) -> str:
        lines = [SNAPSHOT_HEADER]
        lines.extend(params_lines(self.params))
        for key in _STATE_FIELDS:
            lines.append(f"{key}={getattr(self, key):x}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StreamSnapshot":
        fields = _parse_kv(text, SNAPSHOT_HEADER,
                           set(_PARAM_FIELDS) | set(_STATE_FIELDS))
        params = _params_from_fields(fields)
        num = functools.partial(_hex_field, fields)
        return cls(params=params, m1=num("m1"), m2=num("m2"), s=num("s"),
                   draws=num("draws"))


def _parse_kv(text: str, header: str, expected: set[str]) -> dict[str, str]:
    body = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not body or body[0] != header:
        raise MalformedSnapshot(f"missing or unknown header (want {header!r})")
    fields: dict[str, str] = {}
    for line in body[1:]:
        key, sep, value = line.partition("=")
        if not sep or key in fields:
            raise MalformedSnapshot(f"bad line {line!r}")
        fields[key] = value
    if set(fields) != expected:
        missing = expected - set(fields)
        extra = set(fields) - expected
        raise MalformedSnapshot(f"missing={sorted(missing)} unknown={sorted(extra)}")
    return fields


def _hex_field(fields: dict[str, str], key: str) -> int:
    try:
        return int(fields[key], 16)
    except ValueError as exc:
        raise MalformedSnapshot(f"field {key} is not hex: {fields[key]!r}") from exc


def _params_from_fields(fields: dict[str, str]) -> GeneratorParams:
    num = functools.partial(_hex_field, fields)
    skip = SkipParams(q=num("q"), a=num("a"), q1=num("q1"), q2=num("q2"))
    return GeneratorParams(
        p1=num("p1"), p2=num("p2"), n=num("n"), e=num("e"), skip=skip,
        p2inv=num("p2inv"), b=num("b"), skip_mode=fields["skip_mode"],
        skip_const=num("skip_const"), test_mode=bool(num("test_mode")),
        n_float=float(num("n")),
    )


def params_lines(params: GeneratorParams) -> list[str]:
    """key=value lines for the parameter block (lowercase hex values)."""
    values = {
        "p1": params.p1, "p2": params.p2, "n": params.n, "e": params.e,
        "q": params.skip.q, "a": params.skip.a,
        "q1": params.skip.q1, "q2": params.skip.q2,
        "p2inv": params.p2inv, "b": params.b,
        "skip_const": params.skip_const, "test_mode": int(params.test_mode),
    }
    lines = []
    for key in _PARAM_FIELDS:
        if key == "skip_mode":
            lines.append(f"skip_mode={params.skip_mode}")
        else:
            lines.append(f"{key}={values[key]:x}")
    return lines


def params_to_text(params: GeneratorParams) -> str:
    """Standalone parameter export (snapshot format, params subset)."""
    return "\n".join([PARAMS_HEADER, *params_lines(params)]) + "\n"


def params_from_text(text: str) -> GeneratorParams:
    """Parse a parameter export and re-validate every invariant."""
    fields = _parse_kv(text, PARAMS_HEADER, set(_PARAM_FIELDS))
    params = _params_from_fields(fields)
    try:
        validate_params(params)
    except InvalidParams as exc:
        raise MalformedSnapshot(f"exported params invalid: {exc}") from exc
    return params


def snapshot(state: GeneratorState, params: GeneratorParams) -> StreamSnapshot:
    return StreamSnapshot(params=params, m1=state.m1, m2=state.m2,
                          s=state.s, draws=state.draws)


def restore(snap: StreamSnapshot | str) -> tuple[GeneratorParams, GeneratorState]:
    """Rebuild (params, state) from a snapshot, re-validating everything.

    Continuation after restore is bit-identical to the original stream.
    """
    if isinstance(snap, str):
        snap = StreamSnapshot.from_text(snap)
    params = snap.params
    try:
        validate_params(params)
    except InvalidParams as exc:
        raise MalformedSnapshot(f"snapshot params invalid: {exc}") from exc
    if not 0 <= snap.m1 < params.p1:
        raise MalformedSnapshot("m1 outside [0, p1)")
    if not 0 <= snap.m2 < params.p2:
        raise MalformedSnapshot("m2 outside [0, p2)")
    if params.skip_mode == SKIP_CONST:
        if snap.s != params.skip_const:
            raise MalformedSnapshot("const-mode skip register mismatch")
    elif not 1 <= snap.s < params.skip.q:
        raise MalformedSnapshot("skip outside [1, q)")
    if snap.draws < 0:
        raise MalformedSnapshot("negative draw count")
    state = GeneratorState(m1=snap.m1, m2=snap.m2, s=snap.s, draws=snap.draws)
    return params, state

"""Command-line surface: parameter derivation, stream generation, the
statistical battery, throughput benchmarking, and self-tests.

Note on raw64 output: it emits the raw ciphertexts c in [0, n) as
little-endian 64-bit words. n is within one part in 10^6 of 2^63, so the
top bit is almost always zero; external test suites should consume the
f64le format or extract low bits rather than treat raw64 as uniform
64-bit words.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import numtheory, paramfactory, rsacore, skipgen, stats, vecgen

DEFAULT_TEST_BUDGET = 10_000_000
DEFAULT_BENCH_COUNT = 1_000_000_000
DEFAULT_TEST_LANES = 4096
DEFAULT_BENCH_LANES = 65536


def _int_arg(value: str) -> int:
    return int(value, 0)


def _odd_exponent(value: str) -> int:
    e = int(value, 0)
    if e < 3 or e > rsacore.MAX_EXPONENT or e % 2 == 0:
        raise argparse.ArgumentTypeError(
            f"exponent must be odd and within [3, {rsacore.MAX_EXPONENT}]")
    return e


def _skip_mode_arg(value: str) -> tuple[str, int]:
    if value == "lcg":
        return (rsacore.SKIP_LCG, 0)
    if value == "unit":
        return (rsacore.SKIP_UNIT, 0)
    if value.startswith("const:"):
        return (rsacore.SKIP_CONST, int(value[6:], 0))
    raise argparse.ArgumentTypeError("skip mode must be lcg, unit, or const:<value>")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RSARAND_SEED")
    if env is not None:
        return int(env, 0)
    return paramfactory.DEFAULT_MASTER_SEED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsarand",
        description="Parallel pseudorandom streams from a non-cryptographic "
                    "exponentiation cipher.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_stream_args(p):
        p.add_argument("--seed", type=_int_arg, default=None,
                       help="master seed (default: $RSARAND_SEED or the built-in constant)")
        p.add_argument("--stream", type=_int_arg, default=0, help="stream identifier")
        p.add_argument("--exp", type=_odd_exponent, default=rsacore.DEFAULT_EXPONENT,
                       help="encryption exponent (odd, 3..257; default 9)")

    p = sub.add_parser("params", help="derive and print stream parameters")
    add_stream_args(p)

    p = sub.add_parser("gen", help="generate pseudorandom output")
    add_stream_args(p)
    p.add_argument("--lanes", type=_int_arg, default=64, help="vector lane count (default 64)")
    p.add_argument("--count", type=_int_arg, default=1024, help="number of values")
    p.add_argument("--format", choices=("raw64", "f64le", "text"), default="f64le")
    p.add_argument("--skip-mode", type=_skip_mode_arg, default=(rsacore.SKIP_LCG, 0),
                   metavar="{lcg|unit|const:<v>}")
    p.add_argument("--params-file", default=None,
                   help="load parameters from a `rsarand params` export instead of deriving")
    p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("test", help="run the chi-squared battery")
    add_stream_args(p)
    p.add_argument("--lanes", type=_int_arg, default=DEFAULT_TEST_LANES)
    p.add_argument("--count", type=_int_arg, default=DEFAULT_TEST_BUDGET,
                   help="per-test sample budget")
    p.add_argument("--tests", default=None,
                   help="comma-separated test names (suffix _low for low-bit views)")
    p.add_argument("--interleave", type=_int_arg, default=1,
                   help="number of round-robin interleaved streams M_p")
    p.add_argument("--skip-mode", type=_skip_mode_arg, default=(rsacore.SKIP_LCG, 0),
                   metavar="{lcg|unit|const:<v>}")
    p.add_argument("--json", action="store_true", help="machine-readable records")

    p = sub.add_parser("bench", help="measure generation throughput")
    add_stream_args(p)
    p.add_argument("--lanes", type=_int_arg, default=DEFAULT_BENCH_LANES)
    p.add_argument("--count", type=_int_arg, default=DEFAULT_BENCH_COUNT)

    sub.add_parser("selftest", help="run the built-in verification suites")

    return parser


# --------------------------------------------------------------------------
# commands

def cmd_params(args) -> int:
    key = paramfactory.StreamKey(_resolve_seed(args), args.stream)
    params = paramfactory.derive_stream_params(key, e=args.exp)
    sys.stdout.write(rsacore.params_to_text(params))
    return 0


def _load_params(args) -> rsacore.GeneratorParams:
    if getattr(args, "params_file", None):
        with open(args.params_file, "r", encoding="ascii") as fh:
            return rsacore.params_from_text(fh.read())
    mode, const = getattr(args, "skip_mode", (rsacore.SKIP_LCG, 0))
    key = paramfactory.StreamKey(_resolve_seed(args), args.stream)
    return paramfactory.derive_stream_params(key, e=args.exp,
                                             skip_mode=mode, skip_const=const)


def cmd_gen(args) -> int:
    params = _load_params(args)
    state = vecgen.init_vector(params, mv=args.lanes)
    out = open(args.out, "wb") if args.out else sys.stdout.buffer
    try:
        remaining = args.count
        while remaining > 0:
            chunk = min(remaining, 1 << 22)
            if args.format == "raw64":
                out.write(vecgen.take_raw(state, chunk).astype("<u8").tobytes())
            elif args.format == "f64le":
                out.write(vecgen.take_floats(state, chunk).astype("<f8").tobytes())
            else:
                values = vecgen.take_floats(state, chunk)
                out.write("".join(f"{v!r}\n" for v in values.tolist()).encode("ascii"))
            remaining -= chunk
        out.flush()
    finally:
        if args.out:
            out.close()
    return 0


def _battery_source_factory(args, params_list):
    def make_source(selector: str) -> stats.BitSource:
        streams = [vecgen.init_vector(p, m0=0, s0=1, mv=args.lanes)
                   for p in params_list]
        return stats.BitSource(streams, selector)
    return make_source


def cmd_test(args) -> int:
    seed = _resolve_seed(args)
    mode, const = args.skip_mode
    if args.interleave < 1:
        raise SystemExit("--interleave must be >= 1")
    # interstream protocol: distinct prime pairs, one common multiplier,
    # seeds m0=0 s0=1 in every stream
    first = paramfactory.derive_stream_params(
        paramfactory.StreamKey(seed, args.stream), e=args.exp,
        skip_mode=mode, skip_const=const)
    params_list = [first]
    for j in range(1, args.interleave):
        params_list.append(paramfactory.derive_stream_params(
            paramfactory.StreamKey(seed, args.stream + j), e=args.exp,
            skip_mode=mode, skip_const=const, multiplier=first.skip.a))
    tests = args.tests.split(",") if args.tests else None
    report = stats.run_battery(_battery_source_factory(args, params_list),
                               budget=args.count, tests=tests)
    if args.json:
        for r in report.reports:
            sys.stdout.write(json.dumps(r.record()) + "\n")
    else:
        for line in report.lines():
            sys.stdout.write(line + "\n")
    return 0 if report.all_pass else 1


def bench_throughput(params: rsacore.GeneratorParams, lanes: int, count: int) -> float:
    """Values per second generating `count` doubles (warm-up excluded)."""
    state = vecgen.init_vector(params, mv=lanes)
    for _ in range(3):  # warm-up
        vecgen.next_block(state)
    done = 0
    start = time.perf_counter()
    while done < count:
        chunk = min(count - done, 1 << 22)
        vecgen.take_floats(state, chunk)
        done += chunk
    return count / (time.perf_counter() - start)


def cmd_bench(args) -> int:
    params = _load_params(args)
    rate = bench_throughput(params, args.lanes, args.count)
    sys.stdout.write(
        f"e={args.exp} lanes={args.lanes} threads=1 count={args.count} "
        f"rate={rate:.3e} values/s\n")
    return 0


# --------------------------------------------------------------------------
# selftest suites

def _suite_primality() -> None:
    limit = 100_000
    mask = bytearray([1]) * limit
    mask[0:2] = b"\x00\x00"
    for i in range(2, int(limit**0.5) + 1):
        if mask[i]:
            mask[i * i :: i] = bytearray(len(range(i * i, limit, i)))
    for n in range(2, limit):
        assert numtheory.is_prime64(n) == bool(mask[n]), n
    assert numtheory.is_prime64((1 << 63) - 25)
    assert not numtheory.is_prime64(3215031751)  # strong pseudoprime to 2,3,5,7


def _miniature_params() -> rsacore.GeneratorParams:
    skip = skipgen.SkipParams.create(2, q=13, allow_weak=True)
    return rsacore.make_params(11, 23, e=3, skip=skip, test_mode=True)


def _suite_miniature_period() -> None:
    params = _miniature_params()
    state = rsacore.init(params)
    start = (state.m1, state.m2, state.s)
    period = 12 * 253
    seen = {}
    for k in range(1, period + 1):
        c = rsacore.next_raw(state, params)
        seen[c] = seen.get(c, 0) + 1
        if (state.m1, state.m2, state.s) == start:
            assert k == period, f"state recurred early at {k}"
    assert (state.m1, state.m2, state.s) == start
    assert all(v == 12 for v in seen.values())
    assert len(seen) == 253


def _suite_bijectivity() -> None:
    n, e, d = 253, 3, 147
    images = {pow(m, e, n) for m in range(n)}
    assert len(images) == n
    for m in range(n):
        assert pow(pow(m, e, n), d, n) == m


def _suite_crt_equivalence() -> None:
    key = paramfactory.StreamKey(paramfactory.DEFAULT_MASTER_SEED, 0)
    params = paramfactory.derive_stream_params(key)
    state = rsacore.init(params)
    m = 0
    sk = params.skip
    s = 1
    for _ in range(10_000):
        s = numtheory.mulmod(sk.a, s, sk.q)
        m = (m + s) % params.n
        assert rsacore.next_raw(state, params) == pow(m, params.e, params.n)


def _suite_schrage() -> None:
    sk = skipgen.SkipParams.create(2, q=13, allow_weak=True)
    for s0 in range(1, 13):
        st = skipgen.SkipState(s0)
        assert skipgen.next_skip(st, sk) == numtheory.mulmod(2, s0, 13)
    sk = skipgen.default_skip_params()
    rng = np.random.default_rng(7)
    values = rng.integers(1, sk.q, size=10_000, dtype=np.uint64)
    vec = skipgen.next_skip_array(values, sk)
    for s, v in zip(values.tolist(), vec.tolist()):
        st = skipgen.SkipState(s)
        assert skipgen.next_skip(st, sk) == v == numtheory.mulmod(sk.a, s, sk.q)


SELFTEST_SUITES = (
    ("primality", _suite_primality),
    ("miniature-period", _suite_miniature_period),
    ("bijectivity", _suite_bijectivity),
    ("crt-equivalence", _suite_crt_equivalence),
    ("schrage-equivalence", _suite_schrage),
)


def cmd_selftest(args=None) -> int:
    failed = []
    for name, suite in SELFTEST_SUITES:
        try:
            suite()
        except Exception as exc:  # report and continue
            failed.append(name)
            sys.stdout.write(f"{name}: FAIL ({exc})\n")
        else:
            sys.stdout.write(f"{name}: ok\n")
    if failed:
        sys.stdout.write(f"selftest FAILED: {', '.join(failed)}\n")
        return 1
    sys.stdout.write("selftest passed\n")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"params": cmd_params, "gen": cmd_gen, "test": cmd_test,
                "bench": cmd_bench, "selftest": cmd_selftest}
    try:
        return handlers[args.command](args)
    except BrokenPipeError:
        return 0
    except (rsacore.InvalidParams, rsacore.MalformedSnapshot,
            stats.InsufficientSamples, paramfactory.DerivationExhausted) as exc:
        sys.stderr.write(f"rsarand: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

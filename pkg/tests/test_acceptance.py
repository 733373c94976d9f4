"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v`. Criterion 6 (the exhaustive
prime census) is excluded from default runs; select it with `-m census`.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from rsarand import (cli, numtheory, paramfactory, rsacore, skipgen, stats,
                     vecgen)

SEED = paramfactory.DEFAULT_MASTER_SEED

# first four doubles of (default seed, stream 0, e=9), scalar order;
# generated once by this implementation and frozen
REGRESSION_F64 = [
    float.fromhex("0x1.632029fcb38aap-2"),
    float.fromhex("0x1.8c1bb5abc799ep-3"),
    float.fromhex("0x1.d95e8281a84e2p-1"),
    float.fromhex("0x1.ba4dd92014aafp-1"),
]
REGRESSION_RAW = [3198687466090183645, 1783912959308574348,
                  8527461190466845143, 7967842367115529255]


def _stream_params(stream_id=0, e=9, **kw):
    return paramfactory.derive_stream_params(
        paramfactory.StreamKey(SEED, stream_id), e=e, **kw)


def _battery_factory(params_list, lanes):
    def make_source(selector):
        return stats.BitSource(
            [vecgen.init_vector(p, m0=0, s0=1, mv=lanes) for p in params_list],
            selector)
    return make_source


def test_c01_miniature_full_period(miniature_params):
    started = time.time()
    params = miniature_params
    state = rsacore.init(params)
    period = 12 * 253
    counts = np.zeros(253, dtype=np.int64)
    recurrence = None
    for k in range(1, period + 1):
        counts[rsacore.next_raw(state, params)] += 1
        if recurrence is None and (state.m1, state.m2, state.s) == (0, 0, 1):
            recurrence = k
    assert recurrence == period, "state recurred at the wrong step"
    assert (counts == 12).all(), "some ciphertext did not appear exactly q-1 times"
    elapsed = time.time() - started
    assert elapsed < 1.0
    print(f"\nACCEPTANCE 1 miniature period P={period}, uniform x12 "
          f"[{elapsed:.2f}s] PASS")


def test_c02_bijectivity_and_decryption(miniature_params):
    started = time.time()
    n, e = 253, 3
    d = numtheory.modinv(e, 220)
    assert d == 147
    seen = set()
    for m in range(n):
        c = pow(m, e, n)
        seen.add(c)
        assert pow(c, d, n) == m
        assert rsacore.decrypt(c, miniature_params) == m
    assert len(seen) == n
    elapsed = time.time() - started
    assert elapsed < 1.0
    print(f"\nACCEPTANCE 2 bijectivity + round-trip over Z_253 "
          f"[{elapsed:.2f}s] PASS")


def test_c03_crt_garner_shadow_oracle(production_params):
    started = time.time()
    params = production_params
    state = rsacore.init(params)
    raws = rsacore.take_raws(state, params, 1_000_000)
    a, q, n, e = params.skip.a, params.skip.q, params.n, params.e
    m, s = 0, 1
    for c in raws:
        s = a * s % q
        m = (m + s) % n
        assert c == pow(m, e, n)
    elapsed = time.time() - started
    assert elapsed < 30.0
    print(f"\nACCEPTANCE 3 CRT/Garner == direct exponentiation, 10^6 draws "
          f"[{elapsed:.1f}s] PASS")


def test_c04_schrage_equivalence():
    started = time.time()
    q = skipgen.Q_DEFAULT
    rng = np.random.default_rng(2024)
    for a in skipgen.MULTIPLIER_TABLE:
        params = skipgen.SkipParams.create(a)
        values = rng.integers(1, q, size=1_000_000, dtype=np.uint64)
        vec = skipgen.next_skip_array(values, params)
        expect = [a * s % q for s in values.tolist()]
        assert vec.tolist() == expect
        # the scalar operation agrees with its vector form
        for s, v in zip(values[:200].tolist(), vec[:200].tolist()):
            assert skipgen.next_skip(skipgen.SkipState(s), params) == v
    mini = skipgen.SkipParams.create(2, q=13, allow_weak=True)
    for s in range(1, 13):
        assert skipgen.next_skip(skipgen.SkipState(s), mini) == 2 * s % 13
    elapsed = time.time() - started
    assert elapsed < 10.0
    print(f"\nACCEPTANCE 4 Schrage == mulmod, 10^6 states x "
          f"{len(skipgen.MULTIPLIER_TABLE)} multipliers + exhaustive q=13 "
          f"[{elapsed:.1f}s] PASS")


def test_c05_primality():
    started = time.time()
    limit = 1_000_000
    mask = bytearray([1]) * limit
    mask[0:2] = b"\x00\x00"
    for i in range(2, int(limit**0.5) + 1):
        if mask[i]:
            mask[i * i :: i] = bytearray(len(range(i * i, limit, i)))
    for n in range(2, limit):
        assert numtheory.is_prime64(n) == bool(mask[n]), n
    assert numtheory.is_prime64((1 << 63) - 25)
    assert not numtheory.is_prime64(3215031751)
    elapsed = time.time() - started
    assert elapsed < 30.0
    print(f"\nACCEPTANCE 5 is_prime64 == trial division on [2, 10^6] "
          f"[{elapsed:.1f}s] PASS")


@pytest.mark.census
def test_c06_safe_prime_census():
    started = time.time()
    lo, hi = 1 << 31, 1 << 32  # endpoints are powers of two, not primes
    seg = 1 << 24
    primes = 0
    safes = 0
    for start in range(lo, hi, seg):
        end = min(start + seg, hi)
        _, mask = paramfactory._odd_prime_mask(start, end)
        primes += int(mask.sum())
        safes += len(paramfactory.safe_primes_in(start, end))
    assert primes == 98_182_656
    assert safes == 3_060_794
    print(f"\nACCEPTANCE 6 census: {primes} primes, {safes} safe primes in "
          f"[2^31, 2^32] [{time.time()-started:.0f}s] PASS")


def test_c07_battery_production_stream(production_params):
    started = time.time()
    report = stats.run_battery(_battery_factory([production_params], 65536),
                               budget=100_000_000)
    assert not report.errors, report.errors
    failed = [r.name for r in report.reports if not r.pass_1e6]
    assert not failed, f"tests outside 1e-6 bounds: {failed}"
    n = len(report.reports)
    mean = n * 2 * stats.P_WARN
    sigma = math.sqrt(n * 2 * stats.P_WARN * (1 - 2 * stats.P_WARN))
    assert report.n_outside_warn <= mean + 3 * sigma
    print(f"\nACCEPTANCE 7 battery e=9 @ 10^8/test: {n} tests pass, "
          f"{report.n_outside_warn} outside 1e-3 (allowed {mean + 3*sigma:.2f}) "
          f"[{time.time()-started:.0f}s] PASS")


def test_c08_interstream():
    started = time.time()
    first = _stream_params(0, e=3)
    params_list = [first] + [
        _stream_params(j, e=3, multiplier=first.skip.a) for j in range(1, 32)]
    assert len({(p.p1, p.p2) for p in params_list}) == 32
    assert len({p.skip.a for p in params_list}) == 1
    report = stats.run_battery(
        _battery_factory(params_list, 2048), budget=10_000_000,
        tests=["frequency", "serial_d2", "serial_d3",
               "collision_top20", "collision_msb20"])
    assert not report.errors, report.errors
    failed = [r.name for r in report.reports if not r.pass_1e6]
    assert not failed, failed
    print(f"\nACCEPTANCE 8 interstream M_p=32, e=3, common a, round-robin: "
          f"{[r.name for r in report.reports]} pass [{time.time()-started:.0f}s] PASS")


@pytest.mark.parametrize("mv", [1, 2, 8, 64])
def test_c09_vector_scalar_identity(production_params, mv):
    started = time.time()
    blocks = 100_000
    vstate = vecgen.init_vector(production_params, mv=mv)
    got = vecgen.take_floats(vstate, blocks * mv)
    seeds = skipgen.lane_offset_seeds(production_params.skip, 1, mv)
    lanes = []
    for s0 in seeds:
        st = rsacore.init(production_params, 0, s0)
        lanes.append(rsacore.take_floats(st, production_params, blocks))
    expect = np.array(lanes).T.reshape(-1)
    assert np.array_equal(got, expect), "vector and scalar outputs diverge"
    print(f"\nACCEPTANCE 9 vector == scalar interleave, Mv={mv}, "
          f"10^5 blocks bit-exact [{time.time()-started:.0f}s] PASS")


def test_c10_reproducibility(tmp_path, production_params):
    started = time.time()
    argv = [sys.executable, "-m", "rsarand.cli", "gen", "--seed", str(SEED),
            "--stream", "0", "--count", "4096", "--format", "raw64"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and len(a) == 8 * 4096

    # snapshot / restore continuation
    state = rsacore.init(production_params)
    rsacore.take_raws(state, production_params, 1234)
    snap = rsacore.snapshot(state, production_params).to_text()
    expect = rsacore.take_raws(state, production_params, 100)
    params2, state2 = rsacore.restore(snap)
    assert rsacore.take_raws(state2, params2, 100) == expect

    # pinned regression vector (scalar ordering = one lane)
    st = rsacore.init(production_params)
    assert rsacore.take_raws(st, production_params, 4) == REGRESSION_RAW
    st = rsacore.init(production_params)
    assert rsacore.take_floats(st, production_params, 4) == REGRESSION_F64
    print(f"\nACCEPTANCE 10 byte-identical reruns, snapshot restore, pinned "
          f"4-value vector [{time.time()-started:.0f}s] PASS")


def test_c11_weakened_modes(production_params):
    started = time.time()
    unit9 = rsacore.make_params(production_params.p1, production_params.p2, 9,
                                production_params.skip,
                                skip_mode=rsacore.SKIP_UNIT)
    report = stats.run_battery(_battery_factory([unit9], 65536),
                               budget=10_000_000)
    assert not report.errors, report.errors
    failed = [r.name for r in report.reports if not r.pass_1e6]
    assert not failed, f"unit skip with e=9 should pass: {failed}"

    unit1 = rsacore.make_params(production_params.p1, production_params.p2, 1,
                                production_params.skip,
                                skip_mode=rsacore.SKIP_UNIT, test_mode=True)
    weak = stats.run_battery(_battery_factory([unit1], 65536),
                             budget=10_000_000,
                             tests=["frequency", "serial_d2", "max_of_t"])
    assert not weak.all_pass, "identity cipher on a counter must fail"
    print(f"\nACCEPTANCE 11 unit skip: e=9 passes battery, e=1 fails "
          f"[{time.time()-started:.0f}s] PASS")


def test_c12_throughput(production_params):
    started = time.time()
    rates = {}
    for e in (3, 9, 17):
        params = _stream_params(0, e=e)
        rates[e] = max(cli.bench_throughput(params, 65536, 20_000_000)
                       for _ in range(2))
    for e, rate in rates.items():
        assert rate >= 1e7, f"e={e}: {rate:.2e} values/s below 10^7"
    print(f"\nACCEPTANCE 12 throughput single-thread "
          + " ".join(f"e={e}: {r/1e6:.1f}M/s" for e, r in rates.items())
          + " (paper context: 1.25-1.72e8/s on 24 cores) "
          f"[{time.time()-started:.0f}s] PASS")

"""Built-in chi-squared randomness battery.

Classic frequency / serial / poker / collision / gaps / max-of-t /
permutation tests plus a Fourier-coefficient normality test, each reduced
to a Pearson chi-square statistic with an exact upper-tail p-value. Tests
consume uniform variates from a BitSource, which can expose the leading
bits (the IEEE doubles themselves), the 32 least significant bits of the
raw ciphertexts, or a round-robin interleave of several streams.

Binning convention: a variate u in [0, 1) falls in cell floor(u*B) of B
equiprobable cells; the float product is clipped to B-1 so that values
within one ulp of 1.0 cannot escape the top cell.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import vecgen
from .vecgen import VectorState

P_FAIL = 1e-6   # rejection bound: any p outside (1e-6, 1-1e-6) fails
P_WARN = 1e-3   # reporting bound: outliers expected at rate 1/1000 per side

DEFAULT_BUDGET = 100_000_000

_CHUNK = 1 << 22
_U64 = np.uint64


class InsufficientSamples(ValueError):
    """The sample budget cannot support a valid chi-square layout."""


class TieDetected(RuntimeError):
    """Two values in one permutation tuple compared equal."""


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float


@dataclass(frozen=True)
class TestReport:
    name: str
    params: dict
    samples: int
    result: ChiSquareResult

    @property
    def pass_1e3(self) -> bool:
        return P_WARN < self.result.p_value < 1.0 - P_WARN

    @property
    def pass_1e6(self) -> bool:
        return P_FAIL < self.result.p_value < 1.0 - P_FAIL

    def line(self) -> str:
        extra = " ".join(f"{k}={v}" for k, v in self.params.items())
        verdict = "pass" if self.pass_1e6 else "FAIL"
        return (f"{self.name:<20} n={self.samples:<11} chi2={self.result.statistic:<12.2f} "
                f"dof={self.result.dof:<8} p={self.result.p_value:<12.6g} {verdict} {extra}")

    def record(self) -> dict:
        return {"name": self.name, "params": self.params, "samples": self.samples,
                "statistic": self.result.statistic, "dof": self.result.dof,
                "p": self.result.p_value}


def chi2_pvalue(statistic: float, dof: int) -> float:
    """Upper-tail chi-square p-value Q(dof/2, statistic/2)."""
    if statistic < 0 or dof < 1:
        raise ValueError("need statistic >= 0 and dof >= 1")
    return float(special.gammaincc(dof / 2.0, statistic / 2.0))


# --------------------------------------------------------------------------
# sources

class BitSource:
    """Single-consumer variate source.

    selector 'float_leading' yields the stream doubles, 'raw_low_bits'
    yields the low 32 bits of the raw ciphertexts scaled to [0, 1), and
    'raw_word' yields the raw 64-bit ciphertexts. Several streams are
    interleaved round-robin by draw index (stream 0 first).
    """

    SELECTORS = ("float_leading", "raw_low_bits", "raw_word")

    def __init__(self, streams: Sequence[VectorState],
                 selector: str = "float_leading") -> None:
        if selector not in self.SELECTORS:
            raise ValueError(f"unknown selector {selector!r}")
        if not streams:
            raise ValueError("need at least one stream")
        self.streams = list(streams)
        self.selector = selector
        self._buffer: np.ndarray | None = None

    def _view(self, raw: np.ndarray, state: VectorState) -> np.ndarray:
        if self.selector == "float_leading":
            return vecgen.floats_from_raw(raw, state.params)
        if self.selector == "raw_low_bits":
            low = (raw & _U64(0xFFFFFFFF)).astype(np.float64)
            return low / float(1 << 32)
        return raw

    def take(self, count: int) -> np.ndarray:
        k = len(self.streams)
        if k == 1:
            return self._view(vecgen.take_raw(self.streams[0], count), self.streams[0])
        parts = []
        have = 0
        if self._buffer is not None and len(self._buffer):
            head = self._buffer[:count]
            self._buffer = self._buffer[len(head):]
            parts.append(head)
            have = len(head)
        if have < count:
            rounds = -(-(count - have) // k)
            views = [self._view(vecgen.take_raw(st, rounds), st) for st in self.streams]
            flat = np.stack(views).T.reshape(-1)
            need = count - have
            parts.append(flat[:need])
            self._buffer = flat[need:]
        return parts[0] if len(parts) == 1 else np.concatenate(parts)


class UniformSource:
    """Ideal-uniform reference source (numpy PCG64); battery calibration."""

    def __init__(self, seed: int = 0) -> None:
        self._gen = np.random.default_rng(seed)

    def take(self, count: int) -> np.ndarray:
        return self._gen.random(count)


class ArraySource:
    """Cycles over a fixed array; degenerate-pattern testing aid."""

    def __init__(self, values) -> None:
        self._values = np.asarray(values, dtype=np.float64)
        self._pos = 0

    def take(self, count: int) -> np.ndarray:
        reps = -(-(self._pos + count) // len(self._values))
        tiled = np.tile(self._values, reps)
        out = tiled[self._pos : self._pos + count]
        self._pos = (self._pos + count) % len(self._values)
        return out


def _chunks(source, total: int, multiple: int = 1):
    """Yield arrays totalling exactly `total` values, each chunk length a
    multiple of `multiple` (total must already be such a multiple)."""
    step = _CHUNK - _CHUNK % multiple
    remaining = total
    while remaining:
        k = min(step, remaining)
        yield source.take(k)
        remaining -= k


# --------------------------------------------------------------------------
# chi-square plumbing

def _bin_uniform(values: np.ndarray, bins: int) -> np.ndarray:
    idx = (values * bins).astype(np.int64)
    return np.minimum(idx, bins - 1)


def _uniform_report(name: str, params: dict, samples: int,
                    counts: np.ndarray, observations: int) -> TestReport:
    expected = observations / len(counts)
    stat = float(((counts - expected) ** 2).sum() / expected)
    dof = len(counts) - 1
    return TestReport(name, params, samples, _result(stat, dof))


def _result(stat: float, dof: int) -> ChiSquareResult:
    return ChiSquareResult(statistic=stat, dof=dof, p_value=chi2_pvalue(stat, dof))


def _merge_small(counts: np.ndarray, expected: np.ndarray,
                 min_expected: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Merge adjacent cells until every expected count reaches the minimum
    (standard chi-square validity rule); preserves cell order."""
    out_c: list[float] = []
    out_e: list[float] = []
    acc_c = acc_e = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= min_expected:
            out_c.append(acc_c)
            out_e.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0.0:
        if out_e:
            out_c[-1] += acc_c
            out_e[-1] += acc_e
        else:
            out_c.append(acc_c)
            out_e.append(acc_e)
    return np.asarray(out_c), np.asarray(out_e)


def _tailed_report(name: str, params: dict, samples: int, counts: np.ndarray,
                   expected: np.ndarray) -> TestReport:
    counts_m, expected_m = _merge_small(counts, expected)
    if len(counts_m) < 2:
        raise InsufficientSamples(f"{name}: fewer than 2 cells after merging")
    stat = float(((counts_m - expected_m) ** 2 / expected_m).sum())
    return TestReport(name, params, samples, _result(stat, len(counts_m) - 1))


# --------------------------------------------------------------------------
# the tests

FREQ_BINS = 1 << 20

def freq_test(source, samples: int = DEFAULT_BUDGET) -> TestReport:
    """One-dimensional frequency test: histogram into 2^20 equiprobable
    cells against the uniform expectation."""
    if samples < FREQ_BINS:
        raise InsufficientSamples("frequency: need at least one expected count per cell")
    counts = np.zeros(FREQ_BINS, dtype=np.int64)
    for chunk in _chunks(source, samples):
        counts += np.bincount(_bin_uniform(chunk, FREQ_BINS), minlength=FREQ_BINS)
    return _uniform_report("frequency", {}, samples, counts, samples)


SERIAL_AXIS_BINS = {2: 1024, 3: 100, 4: 32, 5: 16, 6: 10}

def serial_test(source, d: int, samples: int = DEFAULT_BUDGET) -> TestReport:
    """Serial test in d dimensions: non-overlapping d-tuples binned into a
    d-dimensional histogram (2^20 total cells for d in {2,4,5}, 10^6 for
    d in {3,6})."""
    if d not in SERIAL_AXIS_BINS:
        raise ValueError(f"serial dimension must be one of {sorted(SERIAL_AXIS_BINS)}")
    axis = SERIAL_AXIS_BINS[d]
    cells = axis ** d
    tuples = samples // d
    if tuples < cells:
        raise InsufficientSamples(f"serial d={d}: need at least {cells} tuples")
    used = tuples * d
    counts = np.zeros(cells, dtype=np.int64)
    for chunk in _chunks(source, used, multiple=d):
        digits = _bin_uniform(chunk, axis).reshape(-1, d)
        idx = digits[:, 0].copy()
        for col in range(1, d):
            idx *= axis
            idx += digits[:, col]
        counts += np.bincount(idx, minlength=cells)
    return _uniform_report(f"serial_d{d}", {"d": d, "axis_bins": axis},
                           used, counts, tuples)


# Stirling numbers of the second kind S(5, d): ways to split 5 cards into
# d nonempty groups of equal denomination.
_STIRLING2_5 = (1, 15, 25, 10, 1)

def poker_probabilities(denominations: int = 16) -> np.ndarray:
    """Exact P(hand of 5 has d distinct denominations), d = 1..5."""
    total = denominations ** 5
    probs = []
    for d in range(1, 6):
        falling = math.perm(denominations, d)
        probs.append(falling * _STIRLING2_5[d - 1] / total)
    return np.asarray(probs)


def poker_test(source, samples: int = DEFAULT_BUDGET) -> TestReport:
    """Poker test: hands of 5 cards with 16 denominations (top 4 bits),
    classified by the number of distinct denominations."""
    hands = samples // 5
    if hands < 100:
        raise InsufficientSamples("poker: need at least 100 hands")
    used = hands * 5
    counts = np.zeros(5, dtype=np.int64)
    for chunk in _chunks(source, used, multiple=5):
        cards = np.sort(_bin_uniform(chunk, 16).reshape(-1, 5), axis=1)
        distinct = (np.diff(cards, axis=1) != 0).sum(axis=1) + 1
        counts += np.bincount(distinct - 1, minlength=5)
    expected = poker_probabilities() * hands
    return _tailed_report("poker", {"cards": 5, "denominations": 16},
                          used, counts, expected)


COLLISION_BALLS = 1 << 14
COLLISION_URNS = 1 << 20

@functools.lru_cache(maxsize=4)
def collision_distribution(balls: int = COLLISION_BALLS,
                           urns: int = COLLISION_URNS) -> np.ndarray:
    """Exact distribution of the number of collisions when `balls` balls
    land uniformly in `urns` urns, by the occupancy recurrence."""
    occ = np.zeros(balls + 1)
    occ[0] = 1.0
    stay = np.arange(balls + 1) / urns          # P(ball hits occupied urn)
    grow = 1.0 - np.arange(balls + 1) / urns    # P(ball opens a new urn)
    for _ in range(balls):
        nxt = occ * stay
        nxt[1:] += occ[:-1] * grow[:-1]
        occ = nxt
    # collisions = balls - occupied
    return occ[::-1][: balls]


def collision_test(source, variant: str = "top20bits", trials: int = 1024) -> TestReport:
    """Collision test: 2^14 balls into 2^20 urns per trial; the histogram
    of collision counts over trials is compared to the exact distribution.

    variant 'top20bits' forms each urn index from one variate; variant
    'msb_of_20' packs the leading bits of 20 sequential variates.
    """
    if variant not in ("top20bits", "msb_of_20"):
        raise ValueError(f"unknown collision variant {variant!r}")
    if trials < 16:
        raise InsufficientSamples("collision: need at least 16 trials")
    per_trial = COLLISION_BALLS * (20 if variant == "msb_of_20" else 1)
    observed = np.zeros(COLLISION_BALLS, dtype=np.int64)
    for _ in range(trials):
        chunk = source.take(per_trial)
        if variant == "top20bits":
            urns = _bin_uniform(chunk, COLLISION_URNS)
        else:
            bits = (chunk > 0.5).astype(np.int64).reshape(-1, 20)
            urns = bits @ (1 << np.arange(20, dtype=np.int64))
        collisions = COLLISION_BALLS - len(np.unique(urns))
        observed[collisions] += 1
    expected = collision_distribution() * trials
    return _tailed_report(f"collision_{'top20' if variant == 'top20bits' else 'msb20'}",
                          {"variant": variant, "trials": trials},
                          trials * per_trial, observed, expected)


def gaps_test(source, samples: int = DEFAULT_BUDGET) -> TestReport:
    """Gaps test: lengths of runs of 0s (r <= 0.5) and 1s (r > 0.5) pooled
    against the geometric law P(len = k) = 2^-k. The final (censored) run
    is dropped."""
    if samples < 1000:
        raise InsufficientSamples("gaps: need at least 1000 values")
    cap = 63
    # slot k-1 counts runs of length k; the last slot pools lengths > cap
    counts = np.zeros(cap + 1, dtype=np.int64)
    run_len = 0
    run_bit = False
    for chunk in _chunks(source, samples):
        bits = chunk > 0.5
        edges = np.flatnonzero(np.diff(bits))
        if len(edges) == 0:
            if run_len and bits[0] != run_bit:
                counts[min(run_len, cap + 1) - 1] += 1
                run_len = 0
            run_len += len(bits)
            run_bit = bool(bits[-1])
            continue
        first = int(edges[0]) + 1
        if run_len and bits[0] == run_bit:
            counts[min(run_len + first, cap + 1) - 1] += 1
        else:
            if run_len:
                counts[min(run_len, cap + 1) - 1] += 1
            counts[min(first, cap + 1) - 1] += 1
        middle = np.diff(edges)
        if len(middle):
            counts += np.bincount(np.minimum(middle, cap + 1) - 1,
                                  minlength=cap + 1)
        run_len = len(bits) - int(edges[-1]) - 1
        run_bit = bool(bits[-1])
    total_runs = int(counts.sum())
    if total_runs < 100:
        raise InsufficientSamples("gaps: fewer than 100 complete runs")
    probs = np.ldexp(1.0, -np.arange(1, cap + 2))
    probs[-1] = np.ldexp(1.0, -cap)  # pooled tail: P(len > cap) = 2^-cap
    return _tailed_report("gaps", {}, samples, counts, probs * total_runs)


def max_of_t_test(source, t: int = 32, samples: int = DEFAULT_BUDGET,
                  bins: int = 128) -> TestReport:
    """Max-of-t test: the maximum of t successive values has CDF x^t;
    binned into `bins` equiprobable cells via that CDF."""
    tuples = samples // t
    if tuples < bins:
        raise InsufficientSamples(f"max_of_t: need at least {bins} tuples")
    used = tuples * t
    counts = np.zeros(bins, dtype=np.int64)
    for chunk in _chunks(source, used, multiple=t):
        peak = chunk.reshape(-1, t).max(axis=1)
        counts += np.bincount(_bin_uniform(peak ** t, bins), minlength=bins)
    return _uniform_report("max_of_t", {"t": t, "bins": bins}, used, counts, tuples)


def permutation_test(source, t: int = 10, samples: int = DEFAULT_BUDGET) -> TestReport:
    """Permutation test: the ordering pattern (Lehmer rank) of each
    non-overlapping t-tuple against the uniform law on t! patterns.

    Raises TieDetected on exactly equal values within a tuple rather than
    silently breaking the tie.
    """
    tfact = math.factorial(t)
    if samples < 100 * tfact:
        raise InsufficientSamples(f"permutation t={t}: need at least {100 * tfact} samples")
    tuples = samples // t
    used = tuples * t
    counts = np.zeros(tfact, dtype=np.int64)
    for chunk in _chunks(source, used, multiple=t):
        rows = chunk.reshape(-1, t)
        if (np.diff(np.sort(rows, axis=1), axis=1) == 0).any():
            raise TieDetected("duplicate values in a permutation tuple")
        ranks = np.zeros(len(rows), dtype=np.int64)
        for i in range(t - 1):
            ranks *= t - i
            ranks += (rows[:, i + 1:] < rows[:, i : i + 1]).sum(axis=1)
        counts += np.bincount(ranks, minlength=tfact)
    return _uniform_report("permutation", {"t": t}, used, counts, tuples)


FOURIER_M = 1 << 20
_FOURIER_BINS = 64

@functools.lru_cache(maxsize=1)
def _normal_edges(bins: int = _FOURIER_BINS) -> np.ndarray:
    sigma = math.sqrt(1.0 / 12.0)
    return special.ndtri(np.arange(1, bins) / bins) * sigma


def fourier_test(source, samples: int = 2 * FOURIER_M, m: int = FOURIER_M) -> TestReport:
    """Fourier test: transform blocks of m complex points built from value
    pairs (r_2j - 0.5) + i(r_2j+1 - 0.5); real and imaginary coefficient
    parts are binned into 64 equiprobable cells of the normal law with
    variance 1/12 and pooled into one chi-square (127 dof).

    Uses the forward transform with 1/sqrt(m) normalization; the exponent
    sign convention only permutes/conjugates coefficients and does not
    affect the statistic's distribution.
    """
    if m & (m - 1):
        raise ValueError("m must be a power of two")
    blocks = samples // (2 * m)
    if blocks < 1:
        raise InsufficientSamples(f"fourier: need at least {2 * m} samples")
    edges = _normal_edges()
    counts = np.zeros(2 * _FOURIER_BINS, dtype=np.int64)
    for _ in range(blocks):
        z = source.take(2 * m)
        x = (z[0::2] - 0.5) + 1j * (z[1::2] - 0.5)
        coeff = np.fft.fft(x) / math.sqrt(m)
        counts[:_FOURIER_BINS] += np.bincount(
            np.searchsorted(edges, coeff.real), minlength=_FOURIER_BINS)
        counts[_FOURIER_BINS:] += np.bincount(
            np.searchsorted(edges, coeff.imag), minlength=_FOURIER_BINS)
    return _uniform_report("fourier", {"m": m, "blocks": blocks},
                           blocks * 2 * m, counts, blocks * 2 * m)


# --------------------------------------------------------------------------
# battery

CORE_TESTS = ("frequency", "serial_d2", "serial_d3", "serial_d4", "serial_d5",
              "serial_d6", "poker", "collision_top20", "collision_msb20",
              "gaps", "max_of_t", "permutation", "fourier")

# Low-bit reruns: the frequency, serial, poker, collision and gaps tests
# applied to the 32 least significant ciphertext bits.
LOW_BIT_TESTS = ("frequency", "serial_d2", "serial_d3", "serial_d4",
                 "serial_d5", "serial_d6", "poker", "collision_top20",
                 "collision_msb20", "gaps")


def permutation_t_for_budget(budget: int) -> int:
    """Largest tuple length t <= 10 whose validity floor 100*t! fits."""
    for t in range(10, 2, -1):
        if 100 * math.factorial(t) <= budget:
            return t
    raise InsufficientSamples("budget below the t=3 permutation floor")


def _run_named(name: str, source, budget: int) -> TestReport:
    if name == "frequency":
        return freq_test(source, budget)
    if name.startswith("serial_d"):
        return serial_test(source, int(name[-1]), budget)
    if name == "poker":
        return poker_test(source, budget)
    if name == "collision_top20":
        return collision_test(source, "top20bits",
                              min(1024, budget // COLLISION_BALLS))
    if name == "collision_msb20":
        return collision_test(source, "msb_of_20",
                              min(1024, budget // (20 * COLLISION_BALLS)))
    if name == "gaps":
        return gaps_test(source, budget)
    if name == "max_of_t":
        return max_of_t_test(source, samples=budget)
    if name == "permutation":
        return permutation_test(source, permutation_t_for_budget(budget), budget)
    if name == "fourier":
        return fourier_test(source, budget)
    raise ValueError(f"unknown test {name!r}")


@dataclass
class BatteryReport:
    reports: list[TestReport] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(r.pass_1e6 for r in self.reports)

    @property
    def n_outside_warn(self) -> int:
        return sum(not r.pass_1e3 for r in self.reports)

    @property
    def warn_rate_consistent(self) -> bool:
        """Is the count of p-values beyond the 1e-3 bounds within 3 sigma
        of its binomial expectation (2e-3 per test)?"""
        n = len(self.reports)
        mean = n * 2 * P_WARN
        sigma = math.sqrt(n * 2 * P_WARN * (1 - 2 * P_WARN))
        return self.n_outside_warn <= mean + 3 * sigma

    def lines(self) -> list[str]:
        out = [r.line() for r in self.reports]
        out.extend(f"{name:<20} SKIPPED ({reason})" for name, reason in self.errors)
        out.append(f"battery: {len(self.reports)} tests, "
                   f"{sum(r.pass_1e6 for r in self.reports)} pass at 1e-6, "
                   f"{self.n_outside_warn} outside 1e-3 bounds "
                   f"({'consistent' if self.warn_rate_consistent else 'HIGH'} "
                   f"vs expected rate 1/1000 per side)")
        return out


def run_battery(make_source: Callable[[str], "BitSource"],
                budget: int = DEFAULT_BUDGET,
                tests: Sequence[str] | None = None,
                include_low_bits: bool = True) -> BatteryReport:
    """Run the battery, one fresh identically-seeded source per test.

    make_source(selector) must return a fresh BitSource-compatible object.
    With tests=None every core test runs, plus the low-bit reruns when
    include_low_bits is set; otherwise exactly the named tests run (a
    '_low' suffix selects the low-bit view). A test whose validity floor
    exceeds the budget (or whose input degenerates, e.g. a constant stream
    never completes a run) is surfaced in `errors` instead of aborting the
    rest of the battery.
    """
    if tests is None:
        names = list(CORE_TESTS)
        if include_low_bits:
            names += [f"{t}_low" for t in LOW_BIT_TESTS]
    else:
        names = list(tests)
    report = BatteryReport()
    for name in names:
        base = name.removesuffix("_low")
        selector = "raw_low_bits" if name.endswith("_low") else "float_leading"
        try:
            result = _run_named(base, make_source(selector), budget)
        except InsufficientSamples as exc:
            report.errors.append((name, str(exc)))
            continue
        if name.endswith("_low"):
            result = TestReport(name=f"{result.name}_low", params=result.params,
                                samples=result.samples, result=result.result)
        report.reports.append(result)
    return report

"""rsarand: scalable parallel pseudorandom streams from a non-cryptographic
exponentiation cipher, with built-in statistical verification."""

from .numtheory import (Factorization, NotInvertible, factor64, is_prime64,
                        is_primitive_root, is_safe_prime, miller_rabin_base,
                        modinv, mulmod, powmod)
from .paramfactory import (DEFAULT_MASTER_SEED, DerivationExhausted, NotFound,
                           StreamKey, derive_stream_params, find_pair,
                           nth_safe_prime_in)
from .rsacore import (DEFAULT_EXPONENT, GeneratorParams, GeneratorState,
                      InvalidParams, InvalidSeed, MalformedSnapshot,
                      StreamSnapshot, UnsupportedSkipMode, decrypt, init,
                      jump_periods, make_params, next_f64, next_raw, restore,
                      snapshot)
from .skipgen import (MULTIPLIER_TABLE, Q_DEFAULT, SkipParams, SkipState,
                      lane_offset_seeds, next_skip, skip_power)
from .stats import (BitSource, ChiSquareResult, InsufficientSamples,
                    TestReport, TieDetected, chi2_pvalue, run_battery)
from .vecgen import VectorState, init_vector, next_block, take_floats, take_raw

__version__ = "0.1.0"

import pytest

from rsarand import paramfactory, rsacore, skipgen


@pytest.fixture(scope="session")
def production_params():
    """Stream 0 of the default master seed (shared; derivation sieves a
    window prefix on first use)."""
    key = paramfactory.StreamKey(paramfactory.DEFAULT_MASTER_SEED, 0)
    return paramfactory.derive_stream_params(key)


@pytest.fixture(scope="session")
def miniature_params():
    """q=13, a=2, n=11*23=253, e=3: every invariant brute-forceable."""
    skip = skipgen.SkipParams.create(2, q=13, allow_weak=True)
    return rsacore.make_params(11, 23, e=3, skip=skip, test_mode=True)


@pytest.fixture(scope="session")
def tiny_params():
    """p1=7, p2=11 with unit skip (the worked CRT example)."""
    skip = skipgen.SkipParams.create(2, q=13, allow_weak=True)
    return rsacore.make_params(7, 11, e=3, skip=skip,
                               skip_mode=rsacore.SKIP_UNIT, test_mode=True)

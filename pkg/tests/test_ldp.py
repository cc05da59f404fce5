import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dprtfl.errors import InvalidConfigError
from dprtfl.ldp import PrivacySpec, clip_delta, noise_sigma, privatize
from dprtfl.model import l2_norm

SIGMA_C1_EPS1 = 4.8448052626053894  # mpmath: sqrt(2 ln(1.25e5)) at 50 digits


def mp_sigma(c, eps, delta):
    with mpmath.workdps(50):
        return float(mpmath.mpf(c) * mpmath.sqrt(2 * mpmath.log(mpmath.mpf(1.25) / mpmath.mpf(delta))) / mpmath.mpf(eps))


def test_clip_examples():
    assert clip_delta([3.0, 4.0], 10.0).tolist() == [3.0, 4.0]
    np.testing.assert_allclose(clip_delta([3.0, 4.0], 2.5), [1.4999997000000600, 1.9999996000000800], rtol=1e-15)
    assert not np.any(clip_delta(np.zeros(5), 1.0))


def test_clip_rejects_bad_bound():
    with pytest.raises(InvalidConfigError):
        clip_delta([1.0], 0.0)


@given(arrays(np.float64, st.integers(1, 64), elements=st.floats(-1e8, 1e8)), st.floats(1e-3, 1e3))
def test_clip_norm_bound(d, c):
    assert l2_norm(clip_delta(d, c)) <= c * (1 + 1e-9)


def test_sigma_examples():
    assert noise_sigma(PrivacySpec(1.0, 1e-5, 1.0)) == pytest.approx(SIGMA_C1_EPS1, rel=1e-14)
    assert noise_sigma(PrivacySpec(1.0, 1e-5, 1.0)) == pytest.approx(mp_sigma(1, 1, "1e-5"), rel=1e-14)
    assert noise_sigma(PrivacySpec(1.0, 1e-5, 1.0, enabled=False)) == 0.0
    assert noise_sigma(PrivacySpec(1.0, 1e-5, 2.0)) == 2 * noise_sigma(PrivacySpec(1.0, 1e-5, 1.0))


@pytest.mark.parametrize("kwargs", [
    dict(epsilon=0.0), dict(epsilon=-1.0), dict(delta=0.0), dict(delta=1.0), dict(clip_bound=0.0),
])
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidConfigError):
        PrivacySpec(**kwargs)


def test_sigma_monotonicity():
    eps = [0.05, 0.1, 0.5, 1.0, 2.0, 10.0]
    s = [noise_sigma(PrivacySpec(e, 1e-5, 1.0)) for e in eps]
    assert all(a > b for a, b in zip(s, s[1:]))
    deltas = [1e-2, 1e-3, 1e-5, 1e-8]
    s = [noise_sigma(PrivacySpec(1.0, d, 1.0)) for d in deltas]
    assert all(a < b for a, b in zip(s, s[1:]))


def test_disabled_privatize_is_exact_clipping(rng):
    d = rng.normal(size=50) * 3
    out, report = privatize(d, PrivacySpec(1.0, 1e-5, 1.0, enabled=False), rng_seed=5)
    assert out.tobytes() == clip_delta(d, 1.0).tobytes()
    assert report.sigma == 0.0 and report.clipped
    assert report.pre_clip_norm == pytest.approx(np.linalg.norm(d))


def test_noise_replays_seeded_draws():
    spec = PrivacySpec(1.0, 1e-5, 1.0)
    out, report = privatize(np.zeros(8), spec, rng_seed=2024)
    draws = np.random.Generator(np.random.PCG64(2024)).standard_normal(8)
    assert out.tobytes() == (SIGMA_C1_EPS1 * draws).tobytes() or np.allclose(out, report.sigma * draws, rtol=0, atol=0)
    assert not report.clipped


def test_noise_moments_match_sigma():
    n = 100_000
    out, report = privatize(np.zeros(n), PrivacySpec(1.0, 1e-5, 1.0), rng_seed=77)
    assert abs(out.std() / report.sigma - 1) < 0.02
    assert abs(out.mean()) < 3 * report.sigma / math.sqrt(n)

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srpt_ht.distributions import deterministic, exponential
from srpt_ht.errors import InvalidLevels
from srpt_ht.paths import reflect_array
from srpt_ht.reference import (
    LimitParams,
    biased_walk_hit,
    biased_walk_mc,
    limit_field_sample,
    rbm_sample,
    sigma_squared,
    summarize,
    summary_json,
    terminal_ensemble,
)

MEAN_ABS_NORMAL = math.sqrt(2 / math.pi)
# discrete-monitoring shift of the running minimum: -zeta(1/2) / sqrt(2 pi)
BGK_BETA = 0.5825971579390106


def hit_oracle(j, l):
    """Solve h_k = h_{k+1}/3 + 2 h_{k-1}/3 on 1 < k < l with h_1 = 0, h_l = 1."""
    n = l
    A = np.zeros((n, n))
    b = np.zeros(n)
    A[0, 0] = 1.0
    A[n - 1, n - 1] = 1.0
    b[n - 1] = 1.0
    for k in range(1, n - 1):
        A[k, k] = 1.0
        A[k, k + 1] = -1 / 3
        A[k, k - 1] = -2 / 3
    return np.linalg.solve(A, b)[j - 1]


def test_sigma_squared_examples():
    assert sigma_squared(1.0, 1.0, 1.0) == 2.0
    assert sigma_squared(2.0, 0.5, 0.5) == 1.0
    assert sigma_squared(1.7, 3 * 0.4, 3 * 0.9) == pytest.approx(9 * sigma_squared(1.7, 0.4, 0.9), rel=1e-14)
    with pytest.raises(ValueError):
        sigma_squared(0.0, 1.0, 1.0)


def test_limit_params_from_laws():
    p = LimitParams.from_laws(exponential(1.0), exponential(1.0), kappa=-0.5)
    assert p.sigma**2 == pytest.approx(2.0) and p.lam == 1.0 and p.kappa == -0.5
    q = LimitParams.from_laws(deterministic(1.0), exponential(2.0), kappa=0.0)
    assert q.sigma**2 == pytest.approx(2.0 * 0.25)


def test_degenerate_rbm():
    g = rbm_sample(LimitParams(0.0, -1.0, 1.0, w0=1.0), 3.0, 300, np.random.default_rng(0))
    assert np.allclose(g.values, np.maximum(1 - g.times, 0), atol=1e-12)


def test_rbm_nonnegative_and_shape():
    rng = np.random.default_rng(1)
    for _ in range(50):
        g = rbm_sample(LimitParams(1.0, 0.0, 1.0), 1.0, 500, rng)
        assert g.values.size == 501 and np.all(g.values >= 0)


def test_rbm_mean_terminal_value():
    n_steps, n_paths = 1024, 40_000
    x = terminal_ensemble(LimitParams(1.0, 0.0, 1.0), 1.0, n_steps, n_paths, np.random.default_rng(2))
    se = x.std() / math.sqrt(n_paths)
    want = MEAN_ABS_NORMAL - BGK_BETA / math.sqrt(n_steps)
    assert abs(x.mean() - want) <= 3.5 * se
    assert np.all(x >= 0)


def test_terminal_ensemble_matches_grid_reflection():
    p = LimitParams(1.3, -0.4, 1.0, w0=0.2)
    fast = terminal_ensemble(p, 2.0, 64, 300, np.random.default_rng(3), chunk=7)
    rng = np.random.default_rng(3)
    w0 = np.full(300, 0.2)
    xi = rng.standard_normal((300, 64))
    dt = 2.0 / 64
    x = np.concatenate((w0[:, None], w0[:, None] + np.cumsum(1.3 * math.sqrt(dt) * xi - 0.4 * dt, axis=1)), axis=1)
    slow = reflect_array(x, axis=1)[:, -1]
    assert np.allclose(fast, slow, atol=1e-12)
    assert np.array_equal(fast, terminal_ensemble(p, 2.0, 64, 300, np.random.default_rng(3), chunk=300))


def test_terminal_ensemble_fields():
    p = LimitParams(1.0, -0.5, 1.0)
    zero = terminal_ensemble(p, 1.0, 32, 100, np.random.default_rng(4), a=0.5)
    assert np.all(zero == 0)
    a2 = terminal_ensemble(p, 1.0, 32, 100, np.random.default_rng(4), a=2.0)
    full = terminal_ensemble(p, 1.0, 32, 100, np.random.default_rng(4))
    a1 = terminal_ensemble(p, 1.0, 32, 100, np.random.default_rng(4), a=1.0)
    assert np.array_equal(a2, full)
    assert np.all(a1 <= full + 1e-12)


def test_exponential_w0():
    p = LimitParams(0.0, 0.0, 1.0, w0=2.0, w0_kind="exponential")
    x = terminal_ensemble(p, 1.0, 4, 20_000, np.random.default_rng(5))
    assert x.mean() == pytest.approx(2.0, rel=0.05)


def test_limit_field_regimes():
    p = LimitParams(1.0, -0.3, 1.0)
    z = limit_field_sample(p, 0.5, 1.0, 256, np.random.default_rng(6))
    assert np.all(z.values == 0)
    a2 = limit_field_sample(p, 2.0, 1.0, 256, np.random.default_rng(6))
    w = rbm_sample(p, 1.0, 256, np.random.default_rng(6))
    assert np.array_equal(a2.values, w.values)
    rng = np.random.default_rng(7)
    for _ in range(50):
        state = rng.bit_generator.state
        one = limit_field_sample(p, 1.0, 1.0, 256, rng)
        rng.bit_generator.state = state
        two = limit_field_sample(p, 2.0, 1.0, 256, rng)
        assert np.all(one.values <= two.values + 1e-12)


def test_negative_drift_dominated():
    rng = np.random.default_rng(8)
    for kappa in (-0.1, -1.0, -3.0):
        for _ in range(20):
            state = rng.bit_generator.state
            low = rbm_sample(LimitParams(1.0, kappa, 1.0), 1.0, 200, rng)
            rng.bit_generator.state = state
            zero = rbm_sample(LimitParams(1.0, 0.0, 1.0), 1.0, 200, rng)
            assert np.all(low.values <= zero.values + 1e-12)


def test_grid_refinement_stability():
    # coupled refinement: each coarse increment is the sum of two fine ones
    n_fine, n_paths, chunk = 2**13, 20_000, 1000
    rng = np.random.default_rng(9)
    dt = 1.0 / n_fine
    coarse, fine = [], []
    for _ in range(n_paths // chunk):
        inc = rng.standard_normal((chunk, n_fine)) * math.sqrt(dt)
        for step, out in ((inc, fine), (inc[:, 0::2] + inc[:, 1::2], coarse)):
            x = np.concatenate((np.zeros((chunk, 1)), np.cumsum(step, axis=1)), axis=1)
            out.append(reflect_array(x, axis=1)[:, -1])
    coarse, fine = np.concatenate(coarse), np.concatenate(fine)
    se = fine.std() / math.sqrt(n_paths)
    assert abs(coarse.mean() - fine.mean()) < 2 * se
    assert np.all(coarse <= fine + 1e-12)  # the finer grid sees a lower minimum


def test_summary():
    s = summarize(np.arange(11.0))
    assert s["mean"] == 5.0 and s["quantiles"]["0.5"] == 5.0 and s["n"] == 11
    assert set(json.loads(summary_json([1.0, 2.0]))) == {"n", "mean", "var", "quantiles"}


# -- biased walk -------------------------------------------------------------------


def test_walk_exact_values():
    assert biased_walk_hit(2, 3) == Fraction(1, 3)
    assert biased_walk_hit(3, 4) == Fraction(3, 7)
    assert biased_walk_hit(5, 5) == 1
    assert biased_walk_hit(1, 6) == 0
    for j, l in [(2, 3), (3, 4), (2, 5), (4, 9), (7, 12)]:
        assert float(biased_walk_hit(j, l)) == pytest.approx(hit_oracle(j, l), abs=1e-12)


@pytest.mark.parametrize("j,l", [(0, 3), (4, 3), (1, 1), (2.0, 3)])
def test_walk_invalid_levels(j, l):
    with pytest.raises(InvalidLevels):
        biased_walk_hit(j, l)


@given(st.integers(2, 40), st.integers(2, 40))
def test_walk_monotone(j, l):
    if j >= l:
        return
    assert biased_walk_hit(j, l) < biased_walk_hit(j + 1, l)
    assert biased_walk_hit(j, l + 1) < biased_walk_hit(j, l)


@pytest.mark.parametrize("j,l", [(2, 3), (3, 4), (2, 5)])
def test_walk_monte_carlo(j, l):
    est = biased_walk_mc(j, l, 100_000, np.random.default_rng(100 * j + l))
    assert est.within(float(biased_walk_hit(j, l)), 3.0)


def test_walk_mc_boundaries():
    rng = np.random.default_rng(0)
    assert biased_walk_mc(1, 5, 1000, rng).estimate == 0.0
    assert biased_walk_mc(5, 5, 1000, rng).estimate == 1.0

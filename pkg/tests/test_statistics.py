"""Test statistics, p-values, and the asymptotic pair covariances.

The covariance tests compare the vectorized implementations against slow
scalar oracles written directly from the entrywise formulas, plus an
analytic cross-check routing the Gaussian case through the fourth-moment
formula with exact Gaussian moments.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from corrgraph import (
    CorrelationMatrix,
    DegenerateInputError,
    SampleMatrix,
    SingularityError,
    StatKind,
    StatVector,
    flat_to_pair,
    fourth_moments,
    isserlis_fourth_moments,
    num_pairs,
    omega_gaussian,
    omega_general,
    p_values,
    statistic,
)

ALL_KINDS = list(StatKind)


def random_pd_correlation(p, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(p + 3, p))
    w = g.T @ g
    d = np.sqrt(np.diag(w))
    c = w / np.outer(d, d)
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(c)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

class TestStatistics:
    @pytest.fixture()
    def samples(self):
        rng = np.random.default_rng(100)
        return SampleMatrix(rng.normal(size=(37, 4)))

    def test_scalar_oracles(self, samples):
        n, p = samples.n, samples.p
        corr = np.corrcoef(samples.data, rowvar=False)
        for flat in range(num_pairs(p)):
            i, j = flat_to_pair(flat, p)
            r = corr[i - 1, j - 1]
            expected = {
                StatKind.EMPIRICAL: math.sqrt(n) * r,
                StatKind.STUDENT: math.sqrt(n - 2) * r / math.sqrt(1 - r * r),
                StatKind.FISHER: math.sqrt(n - 3) * 0.5 * math.log((1 + r) / (1 - r)),
            }
            for kind, want in expected.items():
                got = statistic(samples, kind).values[flat]
                assert got == pytest.approx(want, rel=1e-12)

    def test_second_order_oracle(self, samples):
        n = samples.n
        x = samples.data - samples.data.mean(axis=0)
        x = x / x.std(axis=0)
        got = statistic(samples, StatKind.SECOND_ORDER).values
        for flat in range(samples.m):
            i, j = flat_to_pair(flat, samples.p)
            z = x[:, i - 1] * x[:, j - 1]
            want = math.sqrt(n) * z.mean() / z.std()
            assert got[flat] == pytest.approx(want, rel=1e-12)

    def test_kind_accepts_string(self, samples):
        assert np.array_equal(
            statistic(samples, "fisher").values, statistic(samples, StatKind.FISHER).values
        )

    def test_small_n_raises(self):
        s = SampleMatrix(np.random.default_rng(0).normal(size=(3, 3)))
        for kind in ALL_KINDS:
            with pytest.raises(ValueError):
                statistic(s, kind)

    def test_unit_correlation_saturates_finite(self):
        rng = np.random.default_rng(5)
        col = rng.normal(size=25)
        s = SampleMatrix(np.column_stack([col, 3.0 * col, rng.normal(size=25)]))
        # At the clip 1 - 1e-12 Student blows up like 1/sqrt(eps), Fisher
        # like log(1/eps): both huge and finite, with underflowing p-values.
        for kind, bound in ((StatKind.STUDENT, 1e4), (StatKind.FISHER, 50.0)):
            t = statistic(s, kind).values
            assert np.all(np.isfinite(t))
            assert abs(t[0]) > bound
            assert p_values(statistic(s, kind)).values[0] == 0.0

    @settings(max_examples=30)
    @given(st.integers(0, 2**31), st.floats(0.1, 10.0), st.floats(-5.0, 5.0))
    def test_affine_invariance(self, seed, scale, shift):
        rng = np.random.default_rng(seed)
        data = rng.normal(size=(20, 3))
        moved = data * scale + shift
        for kind in ALL_KINDS:
            a = statistic(SampleMatrix(data), kind).values
            b = statistic(SampleMatrix(moved), kind).values
            assert np.allclose(a, b, atol=1e-8)


class TestPValues:
    def test_formula(self):
        t = np.array([-2.5, 0.0, 1.0, 3.3])
        sv = StatVector(kind=StatKind.EMPIRICAL, values=t, n=50)
        want = 2.0 * norm.sf(np.abs(t))
        assert np.allclose(p_values(sv).values, want, rtol=1e-12)

    @given(st.lists(st.floats(-30.0, 30.0), min_size=1, max_size=20))
    def test_sign_symmetry_and_range(self, values):
        t = np.asarray(values)
        p_pos = p_values(StatVector(StatKind.EMPIRICAL, t, 10)).values
        p_neg = p_values(StatVector(StatKind.EMPIRICAL, -t, 10)).values
        assert np.array_equal(p_pos, p_neg)
        assert np.all((p_pos >= 0.0) & (p_pos <= 1.0))

    @given(st.floats(0.0, 20.0), st.floats(0.0, 20.0))
    def test_monotone_in_magnitude(self, a, b):
        lo, hi = sorted([a, b])
        p = p_values(StatVector(StatKind.EMPIRICAL, np.array([lo, hi]), 10)).values
        assert p[0] >= p[1]


# ---------------------------------------------------------------------------
# scalar covariance oracles
# ---------------------------------------------------------------------------

def oracle_omega_empirical(gamma, a, b, c, d):
    """Entry of the empirical-statistic covariance, 0-based pair (a,b),(c,d)."""
    r = lambda x, y: gamma[x, y]
    if (a, b) == (c, d):
        return (1.0 - r(a, b) ** 2) ** 2
    shared = {a, b} & {c, d}
    if len(shared) == 1:
        s = shared.pop()
        x = ({a, b} - {s}).pop()
        y = ({c, d} - {s}).pop()
        r1, r2, rxy = r(a, b), r(c, d), r(x, y)
        return -0.5 * r1 * r2 * (1 - r1**2 - r2**2 - rxy**2) + rxy * (1 - r1**2 - r2**2)
    i, j, k, l = a, b, c, d
    return (
        0.5 * r(i, j) * r(k, l) * (r(i, k) ** 2 + r(i, l) ** 2 + r(j, k) ** 2 + r(j, l) ** 2)
        + r(i, k) * r(j, l)
        + r(i, l) * r(j, k)
        - r(i, k) * r(j, k) * r(k, l)
        - r(i, j) * r(i, k) * r(i, l)
        - r(i, j) * r(j, k) * r(j, l)
        - r(i, l) * r(j, l) * r(k, l)
    )


def oracle_omega(gamma, kind):
    p = gamma.shape[0]
    pairs = list(itertools.combinations(range(p), 2))
    m = len(pairs)
    out = np.empty((m, m))
    for u, (a, b) in enumerate(pairs):
        for v, (c, d) in enumerate(pairs):
            if kind is StatKind.SECOND_ORDER:
                r = lambda x, y: gamma[x, y]
                num = r(a, c) * r(b, d) + r(a, d) * r(b, c)
                out[u, v] = num / math.sqrt((1 + r(a, b) ** 2) * (1 + r(c, d) ** 2))
                continue
            w = oracle_omega_empirical(gamma, a, b, c, d)
            if kind is StatKind.STUDENT:
                w /= ((1 - gamma[a, b] ** 2) * (1 - gamma[c, d] ** 2)) ** 1.5
            elif kind is StatKind.FISHER:
                w /= (1 - gamma[a, b] ** 2) * (1 - gamma[c, d] ** 2)
            out[u, v] = w
    return out


class TestOmegaGaussian:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    @pytest.mark.parametrize("seed,p", [(0, 3), (1, 4), (2, 6)])
    def test_matches_scalar_oracle(self, kind, seed, p):
        gamma = random_pd_correlation(p, seed)
        got = omega_gaussian(gamma, kind).values
        want = oracle_omega(gamma.values, kind)
        assert np.allclose(got, want, atol=1e-12)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    @pytest.mark.parametrize("p", [3, 10])
    def test_identity_collapses_to_identity(self, kind, p):
        got = omega_gaussian(CorrelationMatrix(np.eye(p)), kind).values
        assert np.allclose(got, np.eye(num_pairs(p)), atol=1e-14)

    def test_hand_values_single_nonzero_correlation(self):
        # p = 3, rho_12 = 0.2, others 0.
        g = np.eye(3)
        g[0, 1] = g[1, 0] = 0.2
        gamma = CorrelationMatrix(g)
        emp = omega_gaussian(gamma, StatKind.EMPIRICAL).values
        assert emp[0, 0] == pytest.approx((1 - 0.04) ** 2)
        # pairs (1,3) and (2,3) share variable 3; formula gives rho_12 * 1.
        assert emp[1, 2] == pytest.approx(0.2)
        so = omega_gaussian(gamma, StatKind.SECOND_ORDER).values
        assert np.allclose(np.diag(so), 1.0, atol=1e-15)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_symmetric_unit_like_diagonal(self, kind):
        gamma = random_pd_correlation(5, 7)
        om = omega_gaussian(gamma, kind).values
        assert np.allclose(om, om.T, atol=1e-12)
        if kind is StatKind.SECOND_ORDER:
            assert np.allclose(np.diag(om), 1.0, atol=1e-14)

    def test_unit_correlation_rejected_for_rescaled_kinds(self):
        g = np.eye(3)
        g[0, 1] = g[1, 0] = 1.0
        gamma = CorrelationMatrix(g)
        for kind in (StatKind.STUDENT, StatKind.FISHER):
            with pytest.raises(SingularityError):
                omega_gaussian(gamma, kind)
        omega_gaussian(gamma, StatKind.EMPIRICAL)  # fine


class TestFourthMomentRoute:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_gaussian_moments_reproduce_closed_form(self, kind):
        gamma = random_pd_correlation(5, 42)
        via_moments = omega_general(isserlis_fourth_moments(gamma), kind).values
        closed = omega_gaussian(gamma, kind).values
        assert np.allclose(via_moments, closed, atol=1e-10)

    def test_sample_moments_match_bruteforce(self):
        rng = np.random.default_rng(9)
        s = SampleMatrix(rng.normal(size=(12, 3)))
        fm = fourth_moments(s)
        x = (s.data - s.data.mean(0)) / s.data.std(0)
        for idx in itertools.product(range(3), repeat=4):
            want = np.mean(x[:, idx[0]] * x[:, idx[1]] * x[:, idx[2]] * x[:, idx[3]])
            assert fm.tensor[idx] == pytest.approx(want, rel=1e-10)

    def test_tensor_symmetry(self):
        fm = isserlis_fourth_moments(random_pd_correlation(4, 3))
        t = fm.tensor
        assert np.allclose(t, np.transpose(t, (1, 0, 2, 3)))
        assert np.allclose(t, np.transpose(t, (2, 3, 0, 1)))
        assert np.allclose(t, np.transpose(t, (0, 1, 3, 2)))

    def test_plugin_close_to_truth_large_n(self):
        gamma = random_pd_correlation(4, 11)
        rng = np.random.default_rng(12)
        factor = np.linalg.cholesky(gamma.values)
        data = SampleMatrix(rng.standard_normal((40000, 4)) @ factor.T)
        plug = omega_general(fourth_moments(data), StatKind.EMPIRICAL).values
        truth = omega_gaussian(gamma, StatKind.EMPIRICAL).values
        assert np.max(np.abs(plug - truth)) < 0.1


def test_second_order_degenerate_pair_raises():
    # Two balanced +-1 columns make Z constant: theta = 0 for that pair.
    rng = np.random.default_rng(21)
    signs = np.array([1.0] * 15 + [-1.0] * 15)
    rng.shuffle(signs)
    data = np.column_stack([signs, -signs, rng.normal(size=30)])
    with pytest.raises(DegenerateInputError):
        statistic(SampleMatrix(data), StatKind.SECOND_ORDER)

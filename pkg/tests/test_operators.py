"""Operator statistics tests.

Oracles used here: explicit dense inverse for the proxy solve, a naive
double-loop trace for the unconditional statistic, the three-term trace
expansion for the conditional statistic, and eigendecomposition for the
epsilon-limit behavior.
"""

import numpy as np
import pytest

from faircocco.errors import DataError
from faircocco.kernels import GramMatrix, KernelConfig, center, extended_gram, gram, kernel_config_for
from faircocco.operators import (
    FairnessStatistic,
    ProxyMatrix,
    faircocco_score,
    proxy,
    stat_conditional,
    stat_unconditional,
)

EPS = 1e-4


def make_centered(data, bandwidth=None):
    cfg = kernel_config_for(data) if bandwidth is None else KernelConfig(bandwidth)
    return center(gram(np.asarray(data, dtype=float), cfg))


def proxy_oracle(gbar: np.ndarray, eps: float) -> np.ndarray:
    n = gbar.shape[0]
    return gbar @ np.linalg.inv(gbar + eps * n * np.eye(n))


class TestProxy:
    def test_zero_gram_gives_zero_proxy(self):
        gbar = GramMatrix(np.zeros((3, 3)), True, KernelConfig(1.0))
        r = proxy(gbar, EPS)
        np.testing.assert_array_equal(r.r, np.zeros((3, 3)))
        assert r.degenerate

    def test_rank_one_spectral_form(self):
        c = 0.35
        gbar = GramMatrix(c * np.array([[1.0, -1.0], [-1.0, 1.0]]), True, KernelConfig(1.0))
        r = proxy(gbar, EPS)
        coeff = 2 * c / (2 * c + 2 * EPS)
        expected = coeff * np.array([[0.5, -0.5], [-0.5, 0.5]])
        np.testing.assert_allclose(r.r, expected, atol=1e-12)

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(5, 5))
        gbar_entries = proxy_oracle_input = a @ a.T
        gbar_entries = gbar_entries - gbar_entries.mean(0) - gbar_entries.mean(1)[:, None] + gbar_entries.mean()
        g = GramMatrix(gbar_entries, True, KernelConfig(1.0))
        r = proxy(g, EPS)
        np.testing.assert_allclose(r.r, proxy_oracle(gbar_entries, EPS), atol=1e-8)

    def test_eigenvalues_in_unit_interval(self):
        rng = np.random.default_rng(8)
        gbar = make_centered(rng.normal(size=(30, 2)))
        eigs = np.linalg.eigvalsh(proxy(gbar, EPS).r)
        assert eigs.min() >= -1e-10
        assert eigs.max() < 1.0

    def test_eigenvalues_approach_one_as_epsilon_shrinks(self):
        # spectral oracle: each proxy eigenvalue is g_i / (g_i + eps N)
        rng = np.random.default_rng(9)
        gbar = make_centered(rng.normal(size=(8, 3)))
        gram_eigs = np.linalg.eigvalsh(gbar.entries)
        positive = gram_eigs[gram_eigs > 1e-10]
        for eps in (1e-2, 1e-5, 1e-9):
            r_eigs = np.sort(np.linalg.eigvalsh(proxy(gbar, eps).r))[-positive.size:]
            expected = np.sort(positive / (positive + eps * gbar.n))
            np.testing.assert_allclose(r_eigs, expected, atol=1e-7)
        assert np.sort(np.linalg.eigvalsh(proxy(gbar, 1e-12).r))[-positive.size:].min() > 0.999

    def test_requires_centered_input(self):
        with pytest.raises(DataError):
            proxy(GramMatrix(np.eye(3), False, KernelConfig(1.0)), EPS)

    def test_rejects_nonpositive_epsilon(self):
        gbar = GramMatrix(np.zeros((2, 2)), True, KernelConfig(1.0))
        with pytest.raises(DataError):
            proxy(gbar, 0.0)


class TestStatistics:
    def test_zero_operand(self):
        rng = np.random.default_rng(1)
        r1 = proxy(make_centered(rng.normal(size=(6, 1))), EPS)
        r0 = ProxyMatrix(np.zeros((6, 6)), EPS, 6)
        assert stat_unconditional(r1, r0) == 0.0

    def test_trace_of_square_positive(self):
        rng = np.random.default_rng(2)
        r = proxy(make_centered(rng.normal(size=(10, 1))), EPS)
        value = stat_unconditional(r, r)
        eigs = np.linalg.eigvalsh(r.r)
        assert value == pytest.approx(np.sum(eigs**2), abs=1e-10)
        assert value > 0

    def test_naive_double_loop_oracle(self):
        rng = np.random.default_rng(3)
        ra = proxy(make_centered(rng.normal(size=(7, 2))), EPS)
        rb = proxy(make_centered(rng.normal(size=(7, 1))), EPS)
        naive = sum(
            ra.r[i][j] * rb.r[j][i] for i in range(7) for j in range(7)
        )
        assert stat_unconditional(ra, rb) == pytest.approx(naive, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        ra = proxy(make_centered(rng.normal(size=(9, 1))), EPS)
        rb = proxy(make_centered(rng.normal(size=(9, 2))), EPS)
        assert stat_unconditional(ra, rb) == pytest.approx(
            stat_unconditional(rb, ra), abs=1e-10
        )

    def test_conditional_reduces_to_unconditional_at_zero(self):
        rng = np.random.default_rng(6)
        r1 = proxy(make_centered(rng.normal(size=(8, 1))), EPS)
        re = proxy(make_centered(rng.normal(size=(8, 2))), EPS)
        r0 = ProxyMatrix(np.zeros((8, 8)), EPS, 8)
        assert stat_conditional(r1, re, r0) == stat_unconditional(r1, re)

    def test_matches_three_term_trace_expansion(self):
        rng = np.random.default_rng(7)
        r1 = proxy(make_centered(rng.normal(size=(12, 1))), EPS)
        re = proxy(make_centered(rng.normal(size=(12, 2))), EPS)
        rc = proxy(make_centered(rng.normal(size=(12, 1))), EPS)
        a, e, c = r1.r, re.r, rc.r
        expanded = np.trace(a @ e - 2 * a @ e @ c + a @ c @ e @ c)
        assert stat_conditional(r1, re, rc) == pytest.approx(expanded, abs=1e-10)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(10)
        r1 = proxy(make_centered(rng.normal(size=(15, 1))), EPS)
        re = proxy(make_centered(rng.normal(size=(15, 2))), EPS)
        rc = proxy(make_centered(rng.normal(size=(15, 1))), EPS)
        perm = rng.permutation(15)

        def permute(r):
            return ProxyMatrix(r.r[np.ix_(perm, perm)], r.epsilon, r.n)

        assert stat_unconditional(permute(r1), permute(re)) == pytest.approx(
            stat_unconditional(r1, re), abs=1e-10
        )
        assert stat_conditional(permute(r1), permute(re), permute(rc)) == pytest.approx(
            stat_conditional(r1, re, rc), abs=1e-10
        )

    def test_dimension_mismatch(self):
        ra = ProxyMatrix(np.zeros((3, 3)), EPS, 3)
        rb = ProxyMatrix(np.zeros((4, 4)), EPS, 4)
        with pytest.raises(DataError):
            stat_unconditional(ra, rb)


class TestScore:
    def test_identical_inputs_score_one(self):
        rng = np.random.default_rng(20)
        data = rng.normal(size=(25, 1))
        r = proxy(make_centered(data), EPS)
        result = faircocco_score("dp", r, proxy(make_centered(data), EPS))
        assert result.normalized_score == pytest.approx(1.0, abs=1e-6)
        assert not result.degenerate

    def test_constant_column_degenerate(self):
        const = make_centered(np.full(10, 2.0), bandwidth=1.0)
        rng = np.random.default_rng(21)
        r_pred = proxy(make_centered(rng.normal(size=(10, 1))), EPS)
        result = faircocco_score("dp", r_pred, proxy(const, EPS))
        assert result.normalized_score == 0.0
        assert result.value == 0.0
        assert result.degenerate

    def test_conditional_score_in_unit_interval(self):
        rng = np.random.default_rng(22)
        y = rng.normal(size=(40, 1))
        a = y + 0.5 * rng.normal(size=(40, 1))
        yhat = y + 0.2 * rng.normal(size=(40, 1))
        g_a_raw = gram(a, kernel_config_for(a))
        g_y_raw = gram(y, kernel_config_for(y))
        r1 = proxy(make_centered(yhat), EPS)
        re = proxy(extended_gram(g_a_raw, g_y_raw), EPS)
        rc = proxy(center(g_y_raw), EPS)
        result = faircocco_score("eo", r1, re, rc)
        assert 0.0 <= result.normalized_score <= 1.0 + 1e-9
        assert result.value >= 0.0

    def test_dp_rejects_conditioning(self):
        r = ProxyMatrix(np.zeros((3, 3)), EPS, 3)
        with pytest.raises(DataError):
            faircocco_score("dp", r, r, r)

    def test_eo_requires_conditioning(self):
        r = ProxyMatrix(np.zeros((3, 3)), EPS, 3)
        with pytest.raises(DataError):
            faircocco_score("eo", r, r)

    def test_unknown_notion(self):
        r = ProxyMatrix(np.zeros((3, 3)), EPS, 3)
        with pytest.raises(DataError):
            faircocco_score("ftu", r, r)

"""Keyboard keys, strongest-key decisions, and the decision grid."""

import numpy as np
import pytest
from scipy.stats import beta as beta_dist
from scipy.stats import betabinom

from dosefind.core import (Decision, DoseData, PriorSpec, TrialSettings,
                           TrialState, validate_settings)
from dosefind.keyboard import (BetaMixture, build_keys, dose_beta_priors,
                               key_masses, keyboard_decision_table,
                               keyboard_next_dose, strongest_key)

SKELETON3 = (0.10, 0.19, 0.30, 0.42, 0.54)


def validated(prior=None, **kw):
    base = dict(num_doses=5, target=0.3, max_n=30, cohort_size=3)
    base.update(kw)
    prior = prior if prior is not None else PriorSpec(SKELETON3, [3] * 5)
    s, p, _ = validate_settings(TrialSettings(**base), prior)
    return s, p


class TestBuildKeys:
    def test_reference_layout_phi_30(self):
        keys = build_keys(0.3, 0.05)
        assert keys.count == 9
        assert keys.target_index == 2
        np.testing.assert_allclose(keys.target_key, (0.25, 0.35))
        np.testing.assert_allclose(keys.edges[0], 0.05)
        np.testing.assert_allclose(keys.edges[-1], 0.95)
        np.testing.assert_allclose(keys.interval(0), (0.05, 0.15))
        np.testing.assert_allclose(keys.interval(3), (0.35, 0.45))

    def test_symmetric_at_phi_half(self):
        keys = build_keys(0.5, 0.05)
        assert keys.count == 9
        assert keys.target_index == 4

    def test_phi_20_single_left_key(self):
        keys = build_keys(0.2, 0.05)
        assert keys.count == 9
        assert keys.target_index == 1
        np.testing.assert_allclose(keys.interval(0), (0.05, 0.15))
        np.testing.assert_allclose(keys.edges[-1], 0.95)

    def test_all_keys_equal_width_inside_unit_interval(self):
        for phi in (0.1, 0.16, 0.25, 0.33, 0.4):
            keys = build_keys(phi, 0.05)
            widths = np.diff(keys.edges)
            np.testing.assert_allclose(widths, 0.1, atol=1e-12)
            assert keys.edges[0] >= 0 and keys.edges[-1] <= 1

    def test_target_key_must_fit(self):
        with pytest.raises(ValueError):
            build_keys(0.03, 0.05)


class TestStrongestKey:
    def test_uniform_prior_three_clean_patients(self):
        # Beta(1, 4) posterior: CDF is 1 - (1-p)^4, hand-evaluable key masses
        keys = build_keys(0.3, 0.05)
        prior = BetaMixture.single(1.0, 1.0)
        masses = key_masses(keys, prior, n=3, y=0)
        assert masses[0] == pytest.approx(0.95 ** 4 - 0.85 ** 4, abs=1e-12)
        assert masses[1] == pytest.approx(0.85 ** 4 - 0.75 ** 4, abs=1e-12)
        assert masses[0] == pytest.approx(0.2925, abs=5e-5)
        assert masses[1] == pytest.approx(0.2056, abs=5e-5)
        assert strongest_key(keys, prior, 3, 0) == 0

    def test_informative_prior_prior_mass_left_of_target(self):
        # Beta(0.9, 2.1) has mean 0.3 but an unbounded density at 0 (a < 1),
        # so with no data the strongest key is the leftmost, not the target:
        # this is the source of iKeyboard's aggressive early escalation.
        keys = build_keys(0.3, 0.05)
        prior = BetaMixture.single(0.9, 2.1)   # q = 0.3, PESS 3
        masses = key_masses(keys, prior, 0, 0)
        oracle = np.diff(beta_dist.cdf(np.asarray(keys.edges), 0.9, 2.1))
        np.testing.assert_allclose(masses, oracle, atol=1e-12)
        assert 0.9 / 3.0 == pytest.approx(0.3)   # prior mean sits on target
        assert strongest_key(keys, prior, 0, 0) == 0
        assert int(np.argmax(oracle)) == 0

    def test_all_toxic_hits_rightmost_key(self):
        keys = build_keys(0.3, 0.05)
        prior = BetaMixture.single(1.0, 1.0)
        assert strongest_key(keys, prior, 30, 30) == keys.count - 1

    def test_masses_plus_edge_strips_sum_to_one(self):
        keys = build_keys(0.3, 0.05)
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = rng.uniform(0.2, 8.0)
            b = rng.uniform(0.2, 8.0)
            prior = BetaMixture.single(a, b)
            masses = key_masses(keys, prior, 0, 0)
            left = beta_dist.cdf(keys.edges[0], a, b)
            right = 1.0 - beta_dist.cdf(keys.edges[-1], a, b)
            assert masses.sum() + left + right == pytest.approx(1.0, abs=1e-10)

    def test_tie_prefers_nearer_then_lower(self):
        keys = build_keys(0.5, 0.05)
        # symmetric Beta(2,2): keys mirror around 0.5, target wins its ties
        assert strongest_key(keys, BetaMixture.single(2.0, 2.0), 0, 0) == keys.target_index


class TestMixturePosterior:
    def test_weights_update_via_marginal_likelihood_oracle(self):
        # independent oracle: beta-binomial pmf ratios
        mix = BetaMixture.informative_mixture(0.9, 2.1, w=0.9)
        for n, y in ((3, 0), (6, 2), (12, 7), (30, 9)):
            got = mix.posterior_weights(n, y)
            m_inf = betabinom.pmf(y, n, 0.9, 2.1)
            m_non = betabinom.pmf(y, n, 1.0, 1.0)
            expected = 0.9 * m_inf / (0.9 * m_inf + 0.1 * m_non)
            assert got[0] == pytest.approx(expected, rel=1e-10)
            assert got.sum() == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_weights(self):
        assert BetaMixture.informative_mixture(0.9, 2.1, 1.0).weights == (1.0,)
        m0 = BetaMixture.informative_mixture(0.9, 2.1, 0.0)
        assert m0.a == (1.0,) and m0.b == (1.0,)

    def test_mixture_key_masses_match_componentwise_oracle(self):
        keys = build_keys(0.3, 0.05)
        mix = BetaMixture.informative_mixture(0.9, 2.1, w=0.9)
        for n, y in ((3, 1), (9, 3), (15, 8)):
            got = key_masses(keys, mix, n, y)
            m_inf = betabinom.pmf(y, n, 0.9, 2.1)
            m_non = betabinom.pmf(y, n, 1.0, 1.0)
            w1 = 0.9 * m_inf / (0.9 * m_inf + 0.1 * m_non)
            edges = np.asarray(keys.edges)
            oracle = (w1 * np.diff(beta_dist.cdf(edges, y + 0.9, n - y + 2.1))
                      + (1 - w1) * np.diff(beta_dist.cdf(edges, y + 1, n - y + 1)))
            np.testing.assert_allclose(got, oracle, atol=1e-12)


class TestDecisionTable:
    def test_zero_pess_equals_uniform_table(self):
        s, _ = validated()
        zero = keyboard_decision_table(s, PriorSpec(SKELETON3, [0] * 5))
        assert len({zero.grid[j] for j in range(5)}) == 1   # all doses identical
        keys = build_keys(0.3, 0.05)
        uniform = BetaMixture.single(1.0, 1.0)
        for c, n in enumerate(zero.n_grid):
            for y in range(n + 1):
                if zero.grid[0][c][y] == "X":
                    continue
                k = strongest_key(keys, uniform, n, y)
                expected = "E" if k < keys.target_index else \
                    "D" if k > keys.target_index else "S"
                assert zero.grid[0][c][y] == expected

    def test_informative_cell_matches_direct_evaluation(self):
        s, p = validated()
        table = keyboard_decision_table(s, p)
        keys = table.keys
        priors, _ = dose_beta_priors(s, p)
        k = strongest_key(keys, priors[2], 3, 1)
        expected = "E" if k < keys.target_index else \
            "D" if k > keys.target_index else "S"
        assert table.grid[2][0][1] == expected

    def test_decision_monotone_in_dlt_count(self):
        order = {"E": 0, "S": 1, "D": 2, "X": 2}
        s, _ = validated()
        for pess in ([0] * 5, [3] * 5):
            table = keyboard_decision_table(s, PriorSpec(SKELETON3, pess))
            for j in range(5):
                for c in range(len(table.n_grid)):
                    ranks = [order[ch] for ch in table.grid[j][c]]
                    assert all(b >= a for a, b in zip(ranks, ranks[1:]))

    def test_mixture_table_matches_mixture_oracle(self):
        s, _ = validated()
        table = keyboard_decision_table(
            s, PriorSpec(SKELETON3, [3] * 5, mixture_weight=0.9))
        keys = table.keys
        for (j, n, y) in ((1, 3, 1), (3, 6, 2), (5, 9, 3), (2, 12, 4)):
            a, b = 3 * SKELETON3[j - 1], 3 * (1 - SKELETON3[j - 1])
            m_inf = betabinom.pmf(y, n, a, b)
            m_non = betabinom.pmf(y, n, 1.0, 1.0)
            w1 = 0.9 * m_inf / (0.9 * m_inf + 0.1 * m_non)
            edges = np.asarray(keys.edges)
            masses = (w1 * np.diff(beta_dist.cdf(edges, y + a, n - y + b))
                      + (1 - w1) * np.diff(beta_dist.cdf(edges, y + 1, n - y + 1)))
            k = int(np.argmax(masses))
            expected = "E" if k < keys.target_index else \
                "D" if k > keys.target_index else "S"
            cell = table.grid[j - 1][table.column(n)][y]
            if cell != "X":
                assert cell == expected, (j, n, y)

    def test_elimination_marks(self):
        s, p = validated()
        table = keyboard_decision_table(s, p)
        assert table.grid[0][0][3] == "X"    # 3/3 at n=3
        assert table.decision(1, 3, 3) == Decision.TERMINATE_TRIAL
        assert table.decision(2, 3, 3) == Decision.ELIMINATE_AND_DEESCALATE

    def test_csv_grid_layout(self):
        s, p = validated()
        text = keyboard_decision_table(s, p).to_csv()
        lines = text.strip().split("\n")
        assert lines[0].startswith("dose,n,y=0,y=1")
        assert len(lines) == 1 + 5 * 10


class TestNextDose:
    def make_state(self, n, y, dose, eliminated_from=None):
        return TrialState(doses=tuple(DoseData(a, b) for a, b in zip(n, y)),
                          current_dose=dose, eliminated_from=eliminated_from)

    def test_bullet_rules(self):
        # uniform prior: strongest key left of / at / right of the target key
        s, _ = validated()
        p = PriorSpec(SKELETON3, [0] * 5)
        keys = build_keys(0.3, 0.05)
        priors, _ = dose_beta_priors(s, p)
        assert strongest_key(keys, priors[2], 3, 0) < keys.target_index
        st = self.make_state([0, 0, 3, 0, 0], [0, 0, 0, 0, 0], dose=3)
        assert keyboard_next_dose(keys, priors, st) == (Decision.ESCALATE, 4)
        assert strongest_key(keys, priors[2], 3, 1) == keys.target_index
        st = self.make_state([0, 0, 3, 0, 0], [0, 0, 1, 0, 0], dose=3)
        assert keyboard_next_dose(keys, priors, st) == (Decision.STAY, 3)
        assert strongest_key(keys, priors[2], 6, 4) > keys.target_index
        st = self.make_state([0, 0, 6, 0, 0], [0, 0, 4, 0, 0], dose=3)
        assert keyboard_next_dose(keys, priors, st) == (Decision.DEESCALATE, 2)

    def test_dose_one_clipped(self):
        s, p = validated()
        keys = build_keys(0.3, 0.05)
        priors, _ = dose_beta_priors(s, p)
        st = self.make_state([3, 0, 0, 0, 0], [2, 0, 0, 0, 0], dose=1)
        assert keyboard_next_dose(keys, priors, st) == (Decision.STAY, 1)

    def test_eliminated_dose_blocked(self):
        s, p = validated()
        keys = build_keys(0.3, 0.05)
        priors, _ = dose_beta_priors(s, p)
        st = self.make_state([0, 3, 0, 0, 0], [0, 0, 0, 0, 0], dose=2,
                             eliminated_from=3)
        assert keyboard_next_dose(keys, priors, st) == (Decision.STAY, 2)

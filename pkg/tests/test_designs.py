import numpy as np
import pytest

from pacinglab import (
    CONTROL,
    GC,
    GT,
    OTHER,
    TREATMENT,
    Assignment,
    ConfigurationError,
    InvalidInputError,
    draw_assignments,
    independent_loop,
    integrate,
    integrate_outcomes,
    merge_rankings,
    sample_assignment,
    simulate_global,
    simulate_interleaving,
    simulate_naive,
)

from conftest import scenario


class TestAssignment:
    def test_all_treatment(self):
        a = sample_assignment(4, 1.0, 0.0, seed=3)
        assert (a.labels == TREATMENT).all()

    def test_all_control(self):
        a = sample_assignment(4, 0.0, 1.0, seed=3)
        assert (a.labels == CONTROL).all()

    @pytest.mark.parametrize("seed", [0, 1, 99, 2**63])
    def test_group_fractions(self, seed):
        a = sample_assignment(1000, 0.1, 0.1, seed)
        assert abs(a.treatment.size / 1000 - 0.1) <= 0.03
        assert abs(a.control.size / 1000 - 0.1) <= 0.03
        assert a.other.size == 1000 - a.treatment.size - a.control.size

    def test_same_seed_same_labels(self):
        assert np.array_equal(sample_assignment(50, 0.3, 0.3, 7).labels, sample_assignment(50, 0.3, 0.3, 7).labels)

    @pytest.mark.parametrize("p_T,p_C", [(0.7, 0.5), (-0.1, 0.5), (np.nan, 0.5)])
    def test_bad_probabilities(self, p_T, p_C):
        with pytest.raises(ConfigurationError):
            sample_assignment(5, p_T, p_C, 0)

    def test_draws_skip_degenerate(self):
        labels, resamples = draw_assignments(2, 0.5, 0.5, 200, seed=5)
        assert resamples > 0
        assert ((labels == TREATMENT).any(axis=1) & (labels == CONTROL).any(axis=1)).all()

    def test_zero_probability_group_may_be_empty(self):
        labels, resamples = draw_assignments(4, 1.0, 0.0, 10, seed=0)
        assert (labels == TREATMENT).all() and resamples == 0

    def test_draws_need_a_group(self):
        with pytest.raises(ConfigurationError):
            draw_assignments(4, 0.0, 0.0, 10, seed=0)

    def test_draw_budget(self):
        with pytest.raises(ConfigurationError):
            draw_assignments(1, 0.5, 0.5, 3, seed=0, max_resamples=5)


class TestNaive:
    @pytest.fixture
    def damped(self, make_scenario):
        return make_scenario(n=4, e=[1.0, 0.8, 0.6, 0.9], e_T=[1.3, 0.9, 0.6, 1.0], ehat=[0.9, 0.7, 0.5, 0.8],
                             ehat_T=[1.0, 0.6, 0.7, 0.8], pacing={"kind": "linear_damping", "budget": 0.6}, reserve=0.1)

    def test_all_treatment_matches_gt(self, damped):
        traj = simulate_naive(damped, Assignment.uniform(4, TREATMENT))
        ref = simulate_global(damped, GT)
        assert np.array_equal(traj.I, ref.I) and np.array_equal(traj.O, ref.O)

    def test_all_control_matches_gc(self, damped):
        traj = simulate_naive(damped, Assignment.uniform(4, CONTROL))
        ref = simulate_global(damped, GC)
        assert np.array_equal(traj.I, ref.I) and np.array_equal(traj.O, ref.O)

    def test_cannibalization_two_sellers(self):
        s = scenario(n=2, e=1.0, ehat=0.5, ehat_T=0.75, reserve=0.1)
        a = Assignment(np.array([CONTROL, TREATMENT]), 0.5, 0.5)
        naive = simulate_naive(s, a)
        gt = simulate_global(s, GT)
        # pooled: 0.75 beats 0.5 every step; under GT the 0.75 tie goes to seller 0
        assert naive.I[1].all() and not naive.I[0].any()
        assert integrate_outcomes(naive)[1] > integrate_outcomes(gt)[1]

    def test_other_sellers_run_control(self, damped):
        a = Assignment(np.array([OTHER, TREATMENT, CONTROL, OTHER]), 0.4, 0.4)
        traj = simulate_naive(damped, a)
        assert np.isnan(traj.r_T[[0, 2, 3]]).all() and not np.isnan(traj.r_C[[0, 2, 3]]).any()
        np.testing.assert_allclose(integrate_outcomes(traj), independent_loop(damped, "naive", a.labels), atol=1e-12)

    def test_wrong_size(self, damped):
        with pytest.raises(InvalidInputError):
            simulate_naive(damped, Assignment(np.zeros(3, dtype=np.int8), 0.5, 0.5))

    def test_bad_labels(self, damped):
        with pytest.raises(InvalidInputError):
            integrate(damped, np.array([[0, 1, 3, 0]]), "naive")


class TestInterleaving:
    def test_no_feedback_matches_global_per_group(self, rng):
        s = scenario(n=5, e=list(rng.uniform(0.2, 1, 5)), e_T=list(rng.uniform(0.2, 1, 5)),
                     ehat=list(rng.uniform(0.1, 1, 5)), ehat_T=list(rng.uniform(0.1, 1, 5)), reserve=0.3)
        gt, gc = simulate_global(s, GT), simulate_global(s, GC)
        for seed in range(20):
            a = sample_assignment(5, 0.5, 0.5, seed)
            traj = simulate_interleaving(s, a)
            assert np.array_equal(traj.I[a.treatment], gt.I[a.treatment])
            assert np.array_equal(traj.I[a.control], gc.I[a.control])

    def test_equal_versions_collapse_to_naive(self, damping3):
        a = Assignment(np.array([TREATMENT, CONTROL, TREATMENT]), 0.5, 0.5)
        inter, naive = simulate_interleaving(damping3, a), simulate_naive(damping3, a)
        # e_T differs from e_C but both scores read the same state and policy
        assert np.array_equal(inter.r_T, inter.r_C)
        assert np.array_equal(inter.I, naive.I) and np.array_equal(inter.O, naive.O)

    def test_alpha_scaled_matches_independent_loop(self):
        s = scenario(
            n=3, horizon=4.0, dt=0.1, e=[1.0, 0.7, 0.5], ehat=[0.9, 0.8, 0.6],
            pacing={"kind": "linear_damping", "budget": 0.8},
            pacing_T={"kind": "alpha_scaled", "alpha": 1.5, "base": {"kind": "linear_damping", "budget": 0.8}},
            reserve=0.5,
        )
        assert s.grid.steps == 40
        for labels in ([1, 0, 1], [0, 1, 0], [1, 1, 0]):
            traj = simulate_interleaving(s, Assignment(np.array(labels), 0.5, 0.5))
            np.testing.assert_allclose(integrate_outcomes(traj), independent_loop(s, "interleaving", labels), rtol=0, atol=1e-12)

    def test_two_sellers_served_in_one_step(self):
        # seller 1 tops ranking T, seller 0 tops ranking C
        s = scenario(n=2, ehat=[0.9, 0.5], ehat_T=[0.5, 0.9], reserve=0.0)
        traj = simulate_interleaving(s, Assignment(np.array([CONTROL, TREATMENT]), 0.5, 0.5))
        assert traj.I.all()


class TestMerge:
    def test_no_conflicts(self):
        assert merge_rankings("abc", "abc", {"a": "C", "b": "T", "c": "O"}, seed=0) == ["a", "b", "c"]

    @pytest.mark.parametrize("keep,expected", [("a", ["a", "b"]), ("b", ["b", "a"])])
    def test_conflict_shift_down(self, keep, expected):
        labels = {"a": "C", "b": "T"}
        assert merge_rankings(["a", "b"], ["b", "a"], labels, coin=lambda x, y: keep) == expected

    def test_only_other(self):
        assert merge_rankings(["a"], ["a"], {"a": "O"}) == ["a"]

    def test_assignment_labels(self):
        a = Assignment(np.array([TREATMENT, CONTROL, OTHER]), 0.4, 0.4)
        merged = merge_rankings([1, 0, 2], [0, 1, 2], a, seed=4)
        assert sorted(merged) == [0, 1, 2]

    def test_seeded_coin_deterministic(self):
        labels = {i: "T" if i % 2 else "C" for i in range(8)}
        ranks = list(range(8))
        first = merge_rankings(ranks, ranks[::-1], labels, seed=9)
        assert first == merge_rankings(ranks, ranks[::-1], labels, seed=9)

    def test_rejects_mismatched_rankings(self):
        with pytest.raises(InvalidInputError):
            merge_rankings(["a", "b"], ["a", "c"], {"a": "C", "b": "T", "c": "T"})
        with pytest.raises(InvalidInputError):
            merge_rankings(["a", "a"], ["a", "a"], {"a": "C"})

    def test_rejects_missing_label(self):
        with pytest.raises(InvalidInputError):
            merge_rankings(["a", "b"], ["a", "b"], {"a": "C"})

import numpy as np
import pytest

from pacinglab import (
    GC,
    GT,
    InvalidInputError,
    StateError,
    TimeGrid,
    Trajectory,
    evaluate_selection,
    integrate_outcomes,
    simulate_global,
    step_state,
)
from pacinglab.selection import SelectionRule, max_form, select_top1

from conftest import scenario


class TestSelection:
    def test_max_form_values(self):
        f, ind = evaluate_selection(None, [0.5, 0.3], 0.4)
        np.testing.assert_allclose(f, [0.1, -0.2], atol=1e-15)
        assert ind.tolist() == [1, 0]

    def test_all_below_reserve(self):
        _, ind = evaluate_selection(None, [0.2, 0.2], 0.5)
        assert ind.tolist() == [0, 0]

    def test_tie_goes_to_lowest_index(self):
        _, ind = evaluate_selection(None, [0.7, 0.7], 0.1)
        assert ind.tolist() == [1, 0]

    def test_single_seller(self):
        f, ind = evaluate_selection(None, [0.3], 0.2)
        assert f[0] == pytest.approx(0.1)
        assert ind.tolist() == [1]

    def test_score_equal_to_reserve_is_selected(self):
        _, ind = evaluate_selection(None, [0.4, 0.1], 0.4)
        assert ind.tolist() == [1, 0]

    @pytest.mark.parametrize("scores,reserve", [([-0.1, 0.2], 0.0), ([0.1, np.nan], 0.0), ([0.1], -1.0)])
    def test_rejects_bad_inputs(self, scores, reserve):
        with pytest.raises(InvalidInputError):
            evaluate_selection(None, scores, reserve)

    def test_rejects_negative_reserve_series(self):
        with pytest.raises(InvalidInputError):
            SelectionRule(np.array([0.1, -0.1]))

    def test_batched_matches_scalar(self, rng):
        scores = rng.uniform(0, 1, size=(50, 6))
        scores[::7, 2] = scores[::7, 4]
        mask = select_top1(scores, 0.3)
        for row, m in zip(scores, mask):
            _, ind = evaluate_selection(None, row, 0.3)
            assert m.astype(int).tolist() == ind.tolist()

    def test_max_form_rival_is_best_other(self):
        f = max_form(np.array([0.2, 0.9, 0.5]), 0.1)
        np.testing.assert_allclose(f, [0.2 - 0.9, 0.9 - 0.5, 0.5 - 0.9])


class TestStateStep:
    def test_euler_step(self):
        assert step_state(2.0, 0.5, 0.1) == pytest.approx(2.05)

    def test_no_consumption(self):
        assert step_state(0.0, 0.0, 1.0) == 0.0

    @pytest.mark.parametrize("S,O,dt", [(-1.0, 0.0, 0.1), (0.0, -0.5, 0.1), (0.0, 0.5, 0.0), (np.inf, 0.0, 0.1)])
    def test_rejects_bad_inputs(self, S, O, dt):
        with pytest.raises(InvalidInputError):
            step_state(S, O, dt)

    def test_full_horizon_single_seller(self):
        s = scenario(n=1, horizon=1.0, dt=0.25, e=1.0, ehat=1.0)
        traj = simulate_global(s, GT)
        assert traj.I.tolist() == [[1, 1, 1, 1]]
        # S(H) = S(t_3) + O*dt; closed form: integral of 1 over [0, 1]
        final = traj.S[0, -1] + traj.O[0, -1] * traj.dt
        assert final == pytest.approx(1.0, abs=1e-15)


class TestTimeGrid:
    def test_steps_absorb_representation_error(self):
        assert TimeGrid(0.3, 0.1).steps == 3
        assert TimeGrid(1.0, 0.25).steps == 4

    def test_partial_step_rounds_up(self):
        assert TimeGrid(1.0, 0.3).steps == 4

    @pytest.mark.parametrize("h,dt", [(0.0, 0.1), (1.0, -0.1), (np.nan, 0.1)])
    def test_rejects_nonpositive(self, h, dt):
        with pytest.raises(InvalidInputError):
            TimeGrid(h, dt)


class TestGlobalRegimes:
    def test_symmetric_regimes_identical(self, make_scenario):
        s = make_scenario(n=3, e=[1.0, 0.5, 0.7], ehat=[0.8, 0.6, 0.9],
                          pacing={"kind": "linear_damping", "budget": 0.4}, reserve=0.2)
        gt, gc = simulate_global(s, GT), simulate_global(s, GC)
        for name in ("I", "O", "S"):
            assert np.array_equal(getattr(gt, name), getattr(gc, name))

    def test_dominant_seller_always_selected(self):
        s = scenario(n=2, ehat=[0.6, 0.4], e=1.0, reserve=0.0)
        for regime in (GT, GC):
            traj = simulate_global(s, regime)
            assert traj.I[0].all() and not traj.I[1].any()

    def test_damping_totals_hand_traced(self, damping3):
        # GT serves the sellers 4, 5 and 6 times at e_T = 1.2, 1.0, 0.7
        np.testing.assert_allclose(integrate_outcomes(simulate_global(damping3, GT)), [0.48, 0.5, 0.42], atol=1e-12)
        # GC: 5, 6 and 7 serves at e_C = 1.0, 0.8, 0.6
        np.testing.assert_allclose(integrate_outcomes(simulate_global(damping3, GC)), [0.5, 0.48, 0.42], atol=1e-12)

    def test_damping_first_steps_hand_traced(self, damping3):
        traj = simulate_global(damping3, GT)
        # 0.9 > 0.7; then 0.9*(1-0.24) = 0.684 < 0.7; then 0.684 > 0.56; then 0.56 > 0.468; then 0.5 wins
        assert traj.I[:, :5].argmax(axis=0).tolist() == [0, 1, 0, 1, 2]

    def test_outcome_is_indicator_times_score(self, damping3):
        traj = simulate_global(damping3, GT)
        assert np.array_equal(traj.O, traj.I * damping3.e_T)

    def test_state_nondecreasing(self, damping3):
        traj = simulate_global(damping3, GC)
        assert np.all(np.diff(traj.S, axis=1) >= 0)

    def test_rejects_unknown_regime(self, damping3):
        with pytest.raises(InvalidInputError):
            simulate_global(damping3, "naive")


class TestIntegrateOutcomes:
    def _traj(self, O, dt):
        O = np.atleast_2d(np.asarray(O, dtype=float))
        n, k = O.shape
        return Trajectory("GT", np.arange(k) * dt, dt, np.ones(n, dtype=np.int8), (O > 0).astype(np.int8),
                          O, np.zeros_like(O), O.copy(), np.full_like(O, np.nan))

    def test_zero(self):
        assert integrate_outcomes(self._traj(np.zeros((3, 4)), 0.5)).tolist() == [0, 0, 0]

    def test_constant(self):
        assert integrate_outcomes(self._traj(np.ones(4), 0.5))[0] == pytest.approx(2.0)

    def test_on_off_pattern(self):
        assert integrate_outcomes(self._traj([1, 0, 1, 0], 1.0))[0] == 2.0

    def test_incomplete_trajectory(self):
        traj = self._traj([1.0, np.nan], 1.0)
        with pytest.raises(StateError):
            integrate_outcomes(traj)

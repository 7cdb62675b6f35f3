"""Episode mechanics: reset, action masking, budget accounting, rewards."""

import numpy as np
import pytest

from featacq.data import FeatureSchema, FeatureSpec, PatientRecord
from featacq.env import AcquisitionEnv, EnvConfig, EnvError, build_action_space, compute_reward
from featacq.guesser import build_guesser


def schema_2free_3paid():
    return FeatureSchema(
        (
            FeatureSpec("age", "numeric", 0.0),
            FeatureSpec("sex", "numeric", 0.0),
            FeatureSpec("a", "numeric", 2.0),
            FeatureSpec("b", "numeric", 3.0),
            FeatureSpec("c", "numeric", 4.0),
        )
    )


def patient(schema, label=1, absent=(), seed=0):
    rng = np.random.default_rng(seed)
    values = {
        f.name: None if f.name in absent else float(rng.standard_normal())
        for f in schema.features
    }
    return PatientRecord(id=f"pt{seed}", label=label, values=values)


@pytest.fixture
def env():
    schema = schema_2free_3paid()
    model = build_guesser(schema, 2, np.random.default_rng(0), hidden=(8,))
    return AcquisitionEnv(schema, model, EnvConfig(budget=10.0))


class TestReset:
    def test_free_features_revealed(self, env):
        ep = env.reset(patient(env.schema))
        np.testing.assert_array_equal(ep.state.mask, [1, 1, 0, 0, 0])
        assert ep.spent == 0.0
        assert ep.state.budget == 10.0
        assert ep.step_count == 0

    def test_all_paid_absent_leaves_only_guess(self, env):
        ep = env.reset(patient(env.schema, absent=("a", "b", "c")))
        assert env.valid_actions(ep) == [env.guess_action]

    def test_initial_probs_equal_free_only_prediction(self, env):
        ep = env.reset(patient(env.schema))
        from featacq.guesser import MaskedState

        direct = env.guesser.predict_proba(
            MaskedState(slots=ep.state.slots, mask=ep.state.mask, budget=0.0)
        )
        np.testing.assert_array_equal(ep.probs, direct)

    def test_missing_free_feature_rejected(self, env):
        rec = patient(env.schema)
        rec.values["age"] = None
        with pytest.raises(EnvError):
            env.reset(rec)


class TestValidActions:
    def test_unaffordable_excluded(self):
        schema = schema_2free_3paid()
        model = build_guesser(schema, 2, np.random.default_rng(0), hidden=(8,))
        env = AcquisitionEnv(schema, model, EnvConfig(budget=2.0))
        ep = env.reset(patient(schema))
        names = [env.actions[a].name for a in env.valid_actions(ep) if a != env.guess_action]
        assert names == ["a"]  # cost 2 affordable; 3 and 4 are not

    def test_revealed_excluded(self, env):
        ep = env.reset(patient(env.schema))
        a = env.valid_actions(ep)[0]
        nxt, _, _, _ = env.step(ep, a)
        assert a not in env.valid_actions(nxt)

    def test_fresh_reset_counts(self, env):
        ep = env.reset(patient(env.schema))
        assert len(env.valid_actions(ep)) == 3 + 1  # d_paid + GUESS

    def test_terminal_state_rejected(self, env):
        ep = env.reset(patient(env.schema))
        nxt, _, _, _ = env.step(ep, env.guess_action)
        with pytest.raises(EnvError):
            env.valid_actions(nxt)


class TestStep:
    def test_reveal_flips_mask_bit(self, env):
        ep = env.reset(patient(env.schema))
        idx = next(a for a in env.valid_actions(ep) if env.actions[a].name == "b")
        nxt, _, _, info = env.step(ep, idx)
        np.testing.assert_array_equal(nxt.state.mask, [1, 1, 0, 1, 0])
        np.testing.assert_array_equal(ep.state.mask, [1, 1, 0, 0, 0])  # input untouched
        assert info["revealed"] == ["b"]

    def test_guess_keeps_state(self, env):
        ep = env.reset(patient(env.schema))
        nxt, reward, done, _ = env.step(ep, env.guess_action)
        assert done and nxt.done
        np.testing.assert_array_equal(nxt.state.mask, ep.state.mask)
        assert reward == pytest.approx(ep.probs[1])

    def test_cost_subtracted(self, env):
        ep = env.reset(patient(env.schema))
        idx = next(a for a in env.valid_actions(ep) if env.actions[a].name == "c")
        nxt, _, _, _ = env.step(ep, idx)
        assert nxt.state.budget == 6.0
        assert nxt.spent == 4.0

    def test_invalid_action_raises(self, env):
        ep = env.reset(patient(env.schema))
        a = env.valid_actions(ep)[0]
        nxt, _, _, _ = env.step(ep, a)
        with pytest.raises(EnvError):
            env.step(nxt, a)  # already revealed

    def test_gain_reward_formula(self, env):
        ep = env.reset(patient(env.schema))
        a = next(i for i in env.valid_actions(ep) if i != env.guess_action)
        nxt, reward, _, info = env.step(ep, a)
        assert reward == pytest.approx(nxt.probs[1] - ep.probs[1] + (info["guess_reward"] if info["auto_guess"] else 0.0))

    def test_step_limit_forces_guess(self):
        schema = schema_2free_3paid()
        model = build_guesser(schema, 2, np.random.default_rng(0), hidden=(8,))
        env = AcquisitionEnv(schema, model, EnvConfig(budget=10.0, max_steps=1))
        ep = env.reset(patient(schema))
        a = next(i for i in env.valid_actions(ep) if i != env.guess_action)
        nxt, reward, done, info = env.step(ep, a)
        assert done and info["auto_guess"]
        assert reward == pytest.approx(
            (nxt.probs[1] - ep.probs[1]) + nxt.probs[1]
        )

    def test_exhaustion_forces_guess(self):
        schema = schema_2free_3paid()
        model = build_guesser(schema, 2, np.random.default_rng(0), hidden=(8,))
        env = AcquisitionEnv(schema, model, EnvConfig(budget=2.0))  # only "a" affordable
        ep = env.reset(patient(schema))
        idx = next(a for a in env.valid_actions(ep) if env.actions[a].name == "a")
        nxt, _, done, info = env.step(ep, idx)
        assert done and info["auto_guess"]

    def test_label_free_episode_has_no_rewards(self, env):
        rec = patient(env.schema)
        rec.label = None
        ep = env.reset(rec)
        a = next(i for i in env.valid_actions(ep) if i != env.guess_action)
        nxt, reward, _, info = env.step(ep, a)
        assert reward is None
        assert "prob_correct" not in info


class TestRewardFormulas:
    def test_plain_gain(self):
        assert compute_reward("gain", [0.4, 0.6], [0.2, 0.8], 4.0, 1) == pytest.approx(0.2)

    def test_cost_normalized_gain(self):
        r = compute_reward("gain", [0.4, 0.6], [0.2, 0.8], 4.0, 1, cost_normalized=True)
        assert r == pytest.approx(0.05)

    def test_guess_reward(self):
        assert compute_reward("guess", [0.1, 0.9], None, 0.0, 1) == pytest.approx(0.9)


class TestGroupedActions:
    def test_group_reveals_all_members(self):
        schema = schema_2free_3paid()
        model = build_guesser(schema, 2, np.random.default_rng(0), hidden=(8,))
        cfg = EnvConfig(budget=10.0, groups={"panel": ("a", "b")})
        env = AcquisitionEnv(schema, model, cfg)
        ep = env.reset(patient(schema))
        idx = next(a for a in env.valid_actions(ep) if env.actions[a].name == "panel")
        assert env.actions[idx].cost == 5.0
        nxt, _, _, info = env.step(ep, idx)
        np.testing.assert_array_equal(nxt.state.mask, [1, 1, 1, 1, 0])
        assert sorted(info["revealed"]) == ["a", "b"]
        assert nxt.spent == 5.0

    def test_group_overlapping_free_rejected(self):
        schema = schema_2free_3paid()
        with pytest.raises(ValueError):
            build_action_space(schema, {"bad": ("age", "a")})

    def test_normalized_group_reward_uses_total_cost(self):
        schema = schema_2free_3paid()
        model = build_guesser(schema, 2, np.random.default_rng(0), hidden=(8,))
        cfg = EnvConfig(budget=10.0, cost_normalized=True, groups={"panel": ("a", "b")})
        env = AcquisitionEnv(schema, model, cfg)
        ep = env.reset(patient(schema))
        idx = next(a for a in env.valid_actions(ep) if env.actions[a].name == "panel")
        nxt, reward, _, info = env.step(ep, idx)
        gain = nxt.probs[1] - ep.probs[1]
        expected = gain / 5.0 + (info["guess_reward"] if info["auto_guess"] else 0.0)
        assert reward == pytest.approx(expected)


class TestEpisodeInvariants:
    def run_random_episode(self, env, rec, seed):
        rng = np.random.default_rng(seed)
        ep = env.reset(rec)
        rewards = []
        masks = [ep.state.mask.copy()]
        while not ep.done:
            valid = env.valid_actions(ep)
            a = int(valid[rng.integers(len(valid))])
            ep, r, _, _ = env.step(ep, a)
            rewards.append(r)
            masks.append(ep.state.mask.copy())
        return ep, rewards, masks

    def test_telescoping_plain_gain(self, env):
        for seed in range(20):
            rec = patient(env.schema, seed=seed)
            start = env.reset(rec)
            ep, rewards, _ = self.run_random_episode(env, rec, seed)
            total = sum(rewards)
            expect = 2 * ep.probs[rec.label] - start.probs[rec.label]
            assert total == pytest.approx(expect, abs=1e-9)

    def test_mask_monotone_and_budget_safe(self, env):
        for seed in range(20):
            rec = patient(env.schema, seed=seed, absent=("b",) if seed % 3 == 0 else ())
            ep, _, masks = self.run_random_episode(env, rec, seed)
            for m0, m1 in zip(masks, masks[1:]):
                assert np.all(m1 >= m0)
            assert ep.spent <= env.config.budget + 1e-12
            if rec.values["b"] is None:
                assert ep.state.mask[3] == 0.0

    def test_deterministic_reward_sequence(self, env):
        rec = patient(env.schema, seed=42)
        _, r1, _ = self.run_random_episode(env, rec, 5)
        _, r2, _ = self.run_random_episode(env, rec, 5)
        assert r1 == r2

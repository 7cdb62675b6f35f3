"""Episode lifecycle over one patient record.

Reset reveals the free features, each step either reveals a paid feature
(or feature group) and pays its cost, or stops and predicts. Rewards come
from the frozen guesser: confidence gain per reveal (optionally per unit
cost) and final confidence at the guess. Actions that are already revealed,
patient-unavailable, or unaffordable are simply not in the valid set, so
cumulative cost can never exceed the budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .guesser import MaskedState, PairingError, build_slots, embed_feature


class EnvError(RuntimeError):
    pass


@dataclass(frozen=True)
class ActionDef:
    name: str
    features: tuple  # feature indices revealed together
    cost: float


@dataclass
class EnvConfig:
    budget: float
    max_steps: int = 32
    cost_normalized: bool = False
    gamma: float = 0.99
    groups: dict | None = None  # group name -> tuple of feature names

    def __post_init__(self):
        # budget 0 is allowed for consultation sessions: it leaves only GUESS
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.max_steps < 1:
            raise ValueError("max steps must be >= 1")


def build_action_space(schema, groups=None):
    """Reveal actions for paid features, grouped ones fused; GUESS is last."""
    groups = groups or {}
    grouped = set()
    actions = []
    free = set(schema.free_indices)
    for gname, feature_names in groups.items():
        idx = tuple(schema.index(n) for n in feature_names)
        if not idx:
            raise ValueError(f"group {gname!r} is empty")
        if any(j in free for j in idx):
            raise ValueError(f"group {gname!r} overlaps free features")
        if any(j in grouped for j in idx):
            raise ValueError(f"group {gname!r} overlaps another group")
        grouped.update(idx)
        cost = sum(schema.features[j].cost for j in idx)
        actions.append(ActionDef(name=gname, features=idx, cost=cost))
    for j in schema.paid_indices:
        if j not in grouped:
            f = schema.features[j]
            actions.append(ActionDef(name=f.name, features=(j,), cost=f.cost))
    return tuple(actions)


@dataclass
class EpisodeState:
    state: MaskedState
    patient: object
    step_count: int = 0
    spent: float = 0.0
    done: bool = False
    last_action: int | None = None
    unavailable: frozenset = frozenset()  # action indices invalid for this patient
    probs: np.ndarray | None = None  # guesser output for the current state

    @property
    def remaining(self):
        return self.state.budget


@dataclass
class Transition:
    state: MaskedState
    action: int
    reward: float | None
    next_state: MaskedState
    done: bool


class AcquisitionEnv:
    """Deterministic feature-reveal MDP over a frozen guesser."""

    def __init__(self, schema, guesser, config):
        if guesser.schema_hash != schema.hash():
            raise PairingError("guesser was trained on a different schema")
        self.schema = schema
        self.guesser = guesser
        self.config = config
        self.actions = build_action_space(schema, config.groups)
        self.guess_action = len(self.actions)
        self.n_actions = len(self.actions) + 1

    # -- lifecycle ----------------------------------------------------------

    def reset(self, patient):
        """Start an episode: free features revealed at no cost, rest hidden."""
        mask = np.zeros(self.schema.d)
        slots = np.zeros(self.schema.state_width)
        slices = self.schema.slot_slices()
        for j in self.schema.free_indices:
            name = self.schema.features[j].name
            if patient.is_absent(name) or name not in patient.values:
                raise EnvError(f"free feature {name!r} missing for {patient.id}")
            slots[slices[j]] = embed_feature(self.guesser, name, patient.values[name])
            mask[j] = 1.0
        unavailable = frozenset(
            a
            for a, act in enumerate(self.actions)
            if any(
                f in patient.values and patient.values[f] is None
                for f in (self.schema.features[j].name for j in act.features)
            )
        )
        state = MaskedState(slots=slots, mask=mask, budget=float(self.config.budget))
        ep = EpisodeState(state=state, patient=patient, unavailable=unavailable)
        ep.probs = self.guesser.predict_proba(state)
        return ep

    def valid_actions(self, ep):
        """GUESS plus every unrevealed, available, affordable reveal action."""
        if ep.done:
            raise EnvError("episode already terminated")
        valid = []
        for a, act in enumerate(self.actions):
            if a in ep.unavailable:
                continue
            if any(ep.state.mask[j] == 1.0 for j in act.features):
                continue
            if act.cost > ep.state.budget:
                continue
            valid.append(a)
        valid.append(self.guess_action)
        return valid

    def mark_unavailable(self, ep, action):
        """Permanently drop a reveal action (patient-specific missingness)."""
        if action == self.guess_action:
            raise EnvError("cannot mark GUESS unavailable")
        return replace(ep, unavailable=ep.unavailable | {action})

    def step(self, ep, action):
        """Apply an action; returns (next episode state, reward, done, info).

        The episode state is not mutated. Rewards are computed only when the
        patient carries a label; deployment sessions never see them.
        """
        if ep.done:
            raise EnvError("step on terminated episode")
        if action not in self.valid_actions(ep):
            raise EnvError(f"invalid action {action}")
        label = ep.patient.label
        info = {"auto_guess": False}
        if action == self.guess_action:
            nxt = replace(
                ep,
                step_count=ep.step_count + 1,
                done=True,
                last_action=action,
                probs=ep.probs.copy(),
            )
            reward = None if label is None else float(ep.probs[label])
            info["probs"] = nxt.probs
            if label is not None:
                info["prob_correct"] = float(ep.probs[label])
            return nxt, reward, True, info

        act = self.actions[action]
        slots = ep.state.slots.copy()
        mask = ep.state.mask.copy()
        slices = self.schema.slot_slices()
        for j in act.features:
            name = self.schema.features[j].name
            slots[slices[j]] = embed_feature(self.guesser, name, ep.patient.values[name])
            mask[j] = 1.0
        state = MaskedState(slots=slots, mask=mask, budget=ep.state.budget - act.cost)
        probs = self.guesser.predict_proba(state)
        nxt = replace(
            ep,
            state=state,
            step_count=ep.step_count + 1,
            spent=ep.spent + act.cost,
            last_action=action,
            probs=probs,
        )
        reward = None
        if label is not None:
            gain = float(probs[label] - ep.probs[label])
            reward = gain / act.cost if self.config.cost_normalized else gain
            info["prob_correct_prev"] = float(ep.probs[label])
            info["prob_correct"] = float(probs[label])
        info["cost"] = act.cost
        info["revealed"] = [self.schema.features[j].name for j in act.features]
        info["probs"] = probs

        # forced termination: step limit, or nothing left to afford/reveal
        out_of_moves = len(self.valid_actions(nxt)) == 1
        if nxt.step_count >= self.config.max_steps or out_of_moves:
            nxt.done = True
            info["auto_guess"] = True
            if label is not None:
                info["guess_reward"] = float(probs[label])
                reward = reward + float(probs[label])
        return nxt, reward, nxt.done, info


def compute_reward(kind, prev_probs, next_probs, action_cost, label, cost_normalized=False):
    """Reward formulas, standalone: confidence gain per reveal, confidence at guess."""
    if kind == "guess":
        return float(prev_probs[label])
    gain = float(next_probs[label] - prev_probs[label])
    if cost_normalized:
        assert action_cost > 0, "free features are never actions"
        return gain / action_cost
    return gain


def trace_line(patient_id, step, action_name, cost, reward, prob_correct):
    return {
        "patient_id": patient_id,
        "step": step,
        "action": action_name,
        "cost": cost,
        "reward": reward,
        "prob_correct": prob_correct,
    }

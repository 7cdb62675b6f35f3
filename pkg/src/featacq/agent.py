"""Double-DQN feature selector with prioritized replay, plus baselines.

The Q-net sees the gated slots, the mask vector and the remaining-budget
fraction; its output has one entry per reveal action plus the guess action.
Action selection is epsilon-greedy restricted to the environment's valid
set, so invalid actions have exactly zero probability of being picked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import checkpoint as ckpt
from .env import EnvConfig
from .numerics import DenseNet, OptimizerState, dense_net, huber_loss, optimizer_step


def encode_state(ep, guesser, budget_total):
    """Q-net input: gated slots ++ mask ++ remaining budget fraction."""
    gated = ep.state.slots * guesser.expand_mask(ep.state.mask)
    frac = ep.state.budget / budget_total if budget_total > 0 else 0.0
    return np.concatenate([gated, ep.state.mask, [frac]])


def encoding_width(schema):
    return schema.state_width + schema.d + 1


# ---------------------------------------------------------------------------
# Q networks
# ---------------------------------------------------------------------------


@dataclass
class QNetPair:
    online: DenseNet
    target: DenseNet
    sync_interval: int = 200

    def sync(self):
        for lo, lt in zip(self.online.layers, self.target.layers):
            lt.W[...] = lo.W
            lt.b[...] = lo.b

    def clone_params(self):
        return [(k, v.copy()) for k, v in self.online.params().items()]


def build_qnet_pair(schema, n_actions, rng, hidden=(64, 64), sync_interval=200):
    online = dense_net([encoding_width(schema), *hidden, n_actions], rng)
    target = dense_net([encoding_width(schema), *hidden, n_actions], rng)
    pair = QNetPair(online=online, target=target, sync_interval=sync_interval)
    pair.sync()
    return pair


def select_action(qnet, encoding, valid, epsilon, rng):
    """Epsilon-greedy over the valid set only."""
    if not valid:
        raise ValueError("valid action set is empty")
    if epsilon > 0 and rng.random() < epsilon:
        return int(valid[int(rng.integers(len(valid)))])
    q, _ = qnet.forward(encoding)
    sub = np.asarray(valid)
    return int(sub[int(np.argmax(q[sub]))])


def td_target(pair, reward, enc_next, next_valid, done, gamma):
    """DDQN target: online net picks the next action, target net scores it."""
    if done:
        return float(reward)
    q_online, _ = pair.online.forward(enc_next)
    sub = np.asarray(next_valid)
    a_star = int(sub[int(np.argmax(q_online[sub]))])
    q_target, _ = pair.target.forward(enc_next)
    return float(reward + gamma * q_target[a_star])


# ---------------------------------------------------------------------------
# Prioritized replay
# ---------------------------------------------------------------------------


@dataclass
class ReplayEntry:
    enc: np.ndarray
    action: int
    reward: float
    enc_next: np.ndarray
    done: bool
    next_valid: tuple


class PrioritizedReplay:
    """Proportional prioritized buffer with FIFO eviction."""

    def __init__(self, capacity, alpha=0.6, eps_p=1e-3, seed=0):
        self.capacity = capacity
        self.alpha = alpha
        self.eps_p = eps_p
        self.rng = np.random.default_rng(seed)
        self.entries = []
        self.priorities = np.zeros(capacity)
        self._next = 0

    def __len__(self):
        return len(self.entries)

    def push(self, entry, priority):
        if priority <= 0:
            raise ValueError("priorities must be > 0")
        if len(self.entries) < self.capacity:
            self.entries.append(entry)
            self.priorities[len(self.entries) - 1] = priority
        else:
            self.entries[self._next] = entry
            self.priorities[self._next] = priority
            self._next = (self._next + 1) % self.capacity

    def probabilities(self):
        p = self.priorities[: len(self.entries)] ** self.alpha
        return p / p.sum()

    def sample(self, batch_size, beta):
        """Returns (entries, importance weights, indices)."""
        if len(self.entries) == 0:
            raise ValueError("sampling from empty buffer")
        probs = self.probabilities()
        idx = self.rng.choice(len(self.entries), size=batch_size, p=probs)
        weights = (len(self.entries) * probs[idx]) ** (-beta)
        weights = weights / weights.max()
        return [self.entries[i] for i in idx], weights, idx

    def update_priorities(self, idx, new_priorities):
        for i, p in zip(idx, new_priorities):
            if p <= 0:
                raise ValueError("priorities must be > 0")
            self.priorities[i] = p


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    episodes: int = 2000
    batch_size: int = 64
    lr: float = 1e-3
    lr_end: float | None = None  # linear decay target; None keeps lr constant
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.6  # fraction of episodes over which epsilon decays
    sync_interval: int = 200
    replay_capacity: int = 50_000
    replay_alpha: float = 0.6
    replay_beta0: float = 0.4
    replay_eps: float = 1e-3
    warmup: int = 256
    hidden: tuple = (64, 64)
    huber_delta: float = 1.0
    eval_every: int = 0  # 0 disables periodic greedy evaluation
    select_best: bool = False  # keep the checkpoint with the best eval score
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.eps_end <= self.eps_start <= 1:
            raise ValueError("epsilon schedule out of [0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")


def epsilon_at(config, episode):
    horizon = max(1, int(config.eps_decay_frac * config.episodes))
    if episode >= horizon:
        return config.eps_end
    ratio = config.eps_end / config.eps_start
    return config.eps_start * ratio ** (episode / horizon)


def beta_at(config, episode):
    if config.episodes <= 1:
        return 1.0
    t = min(1.0, episode / (config.episodes - 1))
    return config.replay_beta0 + t * (1.0 - config.replay_beta0)


def train_agent(env, records, config, eval_records=None):
    """Run episodes against a frozen guesser; returns (QNetPair, curve).

    The curve holds one entry per episode: {episode, return, steps} plus the
    greedy score on eval_records at evaluation checkpoints when enabled.
    With select_best, the final online net is the checkpoint that scored
    best (final-policy quality oscillates between updates, so picking by
    held-out score is materially more stable than taking the last one).
    """
    rng = np.random.default_rng(config.seed)
    pair = build_qnet_pair(
        env.schema, env.n_actions, rng, config.hidden, config.sync_interval
    )
    if config.episodes == 0:
        return pair, []
    buffer = PrioritizedReplay(
        config.replay_capacity, config.replay_alpha, config.replay_eps, seed=config.seed + 1
    )
    opt = OptimizerState(lr=config.lr)
    params = pair.online.params()
    budget = env.config.budget
    curve = []
    learn_steps = 0
    eval_records = records if eval_records is None else eval_records
    best_score, best_params = -np.inf, None
    for episode in range(config.episodes):
        eps = epsilon_at(config, episode)
        beta = beta_at(config, episode)
        if config.lr_end is not None and config.episodes > 1:
            t = episode / (config.episodes - 1)
            opt.lr = config.lr + t * (config.lr_end - config.lr)
        patient = records[int(rng.integers(len(records)))]
        ep = env.reset(patient)
        total = 0.0
        steps = 0
        while not ep.done:
            enc = encode_state(ep, env.guesser, budget)
            valid = env.valid_actions(ep)
            action = select_action(pair.online, enc, valid, eps, rng)
            nxt, reward, done, _ = env.step(ep, action)
            enc_next = encode_state(nxt, env.guesser, budget)
            next_valid = () if done else tuple(env.valid_actions(nxt))
            entry = ReplayEntry(enc, action, float(reward), enc_next, done, next_valid)
            q, _ = pair.online.forward(enc)
            delta = td_target(pair, entry.reward, enc_next, next_valid, done, config.gamma) - q[action]
            buffer.push(entry, abs(float(delta)) + config.replay_eps)
            total += reward
            steps += 1
            ep = nxt
            if len(buffer) >= config.warmup:
                learn_steps += 1
                _learn(pair, buffer, opt, params, config, beta)
                if learn_steps % config.sync_interval == 0:
                    pair.sync()
        point = {"episode": episode, "return": total, "steps": steps}
        if config.eval_every and (episode + 1) % config.eval_every == 0:
            score = greedy_mean_prob(env, eval_records, pair.online)
            point["eval_mean_prob"] = score
            if config.select_best and score > best_score:
                best_score = score
                best_params = pair.clone_params()
        curve.append(point)
    if config.select_best and best_params is not None:
        for name, value in best_params:
            params[name][...] = value
        pair.sync()
    return pair, curve


def _learn(pair, buffer, opt, params, config, beta):
    batch, weights, idx = buffer.sample(config.batch_size, beta)
    targets = np.array(
        [
            td_target(pair, e.reward, e.enc_next, e.next_valid, e.done, config.gamma)
            for e in batch
        ]
    )
    X = np.stack([e.enc for e in batch])
    Q, cache = pair.online.forward(X)
    rows = np.arange(len(batch))
    actions = np.array([e.action for e in batch])
    q_sa = Q[rows, actions]
    deltas = q_sa - targets
    _, dpred = huber_loss(q_sa, targets, config.huber_delta)
    dY = np.zeros_like(Q)
    dY[rows, actions] = weights * dpred / len(batch)
    grads, _ = pair.online.backward(cache, dY)
    optimizer_step(opt, params, grads)
    buffer.update_priorities(idx, np.abs(deltas) + config.replay_eps)


def greedy_mean_prob(env, records, qnet, limit=None):
    """Mean final correct-label probability under the greedy policy."""
    vals = []
    for patient in records[:limit]:
        ep = env.reset(patient)
        while not ep.done:
            enc = encode_state(ep, env.guesser, env.config.budget)
            action = select_action(qnet, enc, env.valid_actions(ep), 0.0, _NULL_RNG)
            ep, _, _, info = env.step(ep, action)
        vals.append(info["prob_correct"])
    return float(np.mean(vals))


class _NullRng:
    def random(self):  # greedy path never explores
        raise AssertionError("rng used with epsilon=0")

    def integers(self, n):
        raise AssertionError("rng used with epsilon=0")


_NULL_RNG = _NullRng()


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class QPolicy:
    """Greedy masked-argmax policy over a trained online net."""

    def __init__(self, qnet):
        self.qnet = qnet

    def act(self, env, ep):
        enc = encode_state(ep, env.guesser, env.config.budget)
        return select_action(self.qnet, enc, env.valid_actions(ep), 0.0, _NULL_RNG)


class RandomPolicy:
    """Uniform over valid reveals; guesses only when nothing else remains."""

    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)

    def act(self, env, ep):
        valid = env.valid_actions(ep)
        reveals = [a for a in valid if a != env.guess_action]
        if not reveals:
            return env.guess_action
        return int(reveals[int(self.rng.integers(len(reveals)))])


class RevealAllPolicy:
    """Reveal whatever is affordable until exhaustion, then guess."""

    def act(self, env, ep):
        valid = env.valid_actions(ep)
        reveals = [a for a in valid if a != env.guess_action]
        return reveals[0] if reveals else env.guess_action


class GreedyMyopicPolicy:
    """One-step lookahead on cost-normalized confidence gain (needs labels)."""

    def act(self, env, ep):
        label = ep.patient.label
        best, best_gain = None, 0.0
        for a in env.valid_actions(ep):
            if a == env.guess_action:
                continue
            nxt, _, _, info = env.step(ep, a)
            gain = (info["prob_correct"] - info["prob_correct_prev"]) / env.actions[a].cost
            if gain > best_gain:
                best, best_gain = a, gain
        return env.guess_action if best is None else best


def rollout(env, patient, policy):
    """Run one episode; returns (final episode state, transitions, trace)."""
    ep = env.reset(patient)
    transitions = []
    trace = []
    while not ep.done:
        action = policy.act(env, ep)
        nxt, reward, done, info = env.step(ep, action)
        transitions.append((ep, action, reward, nxt, done))
        trace.append(
            {
                "patient_id": patient.id,
                "step": nxt.step_count,
                "action": "guess" if action == env.guess_action else env.actions[action].name,
                "cost": info.get("cost", 0.0),
                "reward": reward,
                "prob_correct": info.get("prob_correct"),
            }
        )
        ep = nxt
    return ep, transitions, trace


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_agent(pair, schema, env_config, path):
    arch = {
        "type": "qnet_pair",
        "widths": [pair.online.in_width] + [l.W.shape[0] for l in pair.online.layers],
        "activations": [l.activation for l in pair.online.layers],
        "sync_interval": pair.sync_interval,
        "env": {
            "budget": env_config.budget,
            "max_steps": env_config.max_steps,
            "cost_normalized": env_config.cost_normalized,
            "gamma": env_config.gamma,
            "groups": env_config.groups,
        },
    }
    ckpt.save_checkpoint(
        path, arch, [(f"online.{k}", v) for k, v in pair.online.params().items()], schema.hash()
    )


def load_agent(path):
    env_doc = ckpt.load_checkpoint(path)
    arch = env_doc.architecture
    if arch.get("type") != "qnet_pair":
        raise ckpt.CheckpointError(f"not an agent checkpoint: {arch.get('type')!r}")
    rng = np.random.default_rng(0)
    online = dense_net(arch["widths"], rng)
    for layer, act in zip(online.layers, arch["activations"]):
        layer.activation = act
    loaded = env_doc.param_dict()
    for k, v in online.params().items():
        v[...] = loaded[f"online.{k}"]
    target = dense_net(arch["widths"], rng)
    pair = QNetPair(online=online, target=target, sync_interval=arch["sync_interval"])
    pair.sync()
    env_config = EnvConfig(
        budget=arch["env"]["budget"],
        max_steps=arch["env"]["max_steps"],
        cost_normalized=arch["env"]["cost_normalized"],
        gamma=arch["env"]["gamma"],
        groups=arch["env"]["groups"],
    )
    return pair, env_config, env_doc.schema_hash

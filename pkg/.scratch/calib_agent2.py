import time
import numpy as np
from featacq.agent import QPolicy, RandomPolicy, TrainConfig, train_agent
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import evaluate_policy, oracle_policy_value
from featacq.guesser import PretrainConfig, build_guesser, pretrain

class FixedPolicy:
    def __init__(self, names):
        self.names = names
    def act(self, env, ep):
        for a in env.valid_actions(ep):
            if a != env.guess_action and env.actions[a].name in self.names:
                return a
        return env.guess_action

seed = 0
spec = SyntheticSpec(
    n_features=9, informative=(1,2,3,4,5), weights=(4.0,-3.5,3.0,-2.5,2.0),
    n_samples=2000, seed=seed, n_free=1)
ds = standardize(split(generate_synthetic(spec), (0.7,0.15,0.15), seed=seed))
model = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64,64))
model, _ = pretrain(model, ds, PretrainConfig(epochs=25, lr=3e-3, seed=seed))
env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=5.0))
test = ds.split_records("test")

fixed = evaluate_policy(FixedPolicy({"f1","f2","f3","f4","f5"}), env, test, n_boot=0)
rand = evaluate_policy(RandomPolicy(seed=seed), env, test, n_boot=0)
oracle = oracle_policy_value(model, test, budget=5.0)
print(f"fixed-informative={fixed.aggregates['mean_prob_correct']:.4f} "
      f"random={rand.aggregates['mean_prob_correct']:.4f} oracle={oracle.mean_prob_correct:.4f}")

for episodes in (2500, 6000):
    t0=time.time()
    cfg = TrainConfig(episodes=episodes, seed=seed, eval_every=0)
    pair, curve = train_agent(env, ds.split_records("train"), cfg)
    rep = evaluate_policy(QPolicy(pair.online), env, test, n_boot=0)
    print(f"episodes={episodes} agent={rep.aggregates['mean_prob_correct']:.4f} "
          f"({time.time()-t0:.0f}s) mean steps={np.mean([p['steps'] for p in rep.per_patient]):.2f} "
          f"mean cost={rep.aggregates['mean_cost']:.2f}")

import time
import numpy as np
from featacq.agent import QPolicy, RandomPolicy, TrainConfig, train_agent
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import evaluate_policy, oracle_policy_value
from featacq.guesser import PretrainConfig, build_guesser, pretrain

class FixedPolicy:
    def __init__(self, names): self.names = names
    def act(self, env, ep):
        for a in env.valid_actions(ep):
            if a != env.guess_action and env.actions[a].name in self.names:
                return a
        return env.guess_action

spec = SyntheticSpec(
    n_features=9, informative=(1,2,3,4,5), weights=(6.0,-5.0,4.5,-4.0,3.5),
    n_samples=2500, seed=0, n_free=1)
ds = standardize(split(generate_synthetic(spec), (0.7,0.15,0.15), seed=0))
test = ds.split_records("test")
model = build_guesser(ds.schema, 2, np.random.default_rng(0), hidden=(64,64))
model, _ = pretrain(model, ds, PretrainConfig(epochs=30, lr=3e-3, p_adv_end=0.2, seed=0))
env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=5.0))
fixed = evaluate_policy(FixedPolicy({"f1","f2","f3","f4","f5"}), env, test, n_boot=0).aggregates["mean_prob_correct"]
r = evaluate_policy(RandomPolicy(seed=0), env, test, n_boot=0).aggregates["mean_prob_correct"]
o = oracle_policy_value(model, test, budget=5.0).mean_prob_correct
print(f"fixed={fixed:.4f} rand={r:.4f} oracle={o:.4f} target={(r+o)/2:.4f}")

configs = [
    dict(episodes=4000),
    dict(episodes=4000, lr=7e-4, hidden=(128,128), sync_interval=300, batch_size=128, warmup=512),
    dict(episodes=8000, lr=7e-4, sync_interval=300),
]
for kw in configs:
    t0=time.time()
    pair, _ = train_agent(env, ds.split_records("train"), TrainConfig(seed=0, **kw))
    a = evaluate_policy(QPolicy(pair.online), env, test, n_boot=0).aggregates["mean_prob_correct"]
    print(f"{kw}: agent={a:.4f} ok={a >= (r+o)/2} ({time.time()-t0:.0f}s)")

import itertools, time
import numpy as np
from featacq.agent import RandomPolicy
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

for epochs, p_end, hidden in itertools.product((30, 60), (0.5, 0.2), ((64,64),)):
    t0 = time.time()
    model = build_guesser(ds.schema, 2, np.random.default_rng(0), hidden=hidden)
    model, _ = pretrain(model, ds, PretrainConfig(epochs=epochs, lr=3e-3, p_adv_end=p_end, seed=0))
    env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=5.0))
    fixed = evaluate_policy(FixedPolicy({"f1","f2","f3","f4","f5"}), env, test, n_boot=0).aggregates["mean_prob_correct"]
    r = evaluate_policy(RandomPolicy(seed=0), env, test, n_boot=0).aggregates["mean_prob_correct"]
    o = oracle_policy_value(model, test, budget=5.0).mean_prob_correct
    print(f"epochs={epochs} p_adv_end={p_end} hidden={hidden}: fixed={fixed:.4f} rand={r:.4f} "
          f"oracle={o:.4f} mid={0.5*(r+o):.4f} headroom={fixed-0.5*(r+o):+.4f} ({time.time()-t0:.0f}s)")

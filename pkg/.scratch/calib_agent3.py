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

def variant(name, costs, budget, weights, seed=0, episodes=4000):
    spec = SyntheticSpec(
        n_features=9, informative=(1,2,3,4,5), weights=weights,
        n_samples=2500, seed=seed, n_free=1, costs=costs)
    ds = standardize(split(generate_synthetic(spec), (0.7,0.15,0.15), seed=seed))
    model = build_guesser(ds.schema, 2, np.random.default_rng(seed), hidden=(64,64))
    model, _ = pretrain(model, ds, PretrainConfig(epochs=30, lr=3e-3, seed=seed))
    env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=budget))
    test = ds.split_records("test")
    fixed = evaluate_policy(FixedPolicy({"f1","f2","f3","f4","f5"}), env, test, n_boot=0).aggregates["mean_prob_correct"]
    r = evaluate_policy(RandomPolicy(seed=seed), env, test, n_boot=0).aggregates["mean_prob_correct"]
    o = oracle_policy_value(model, test, budget=budget).mean_prob_correct
    t0=time.time()
    pair, _ = train_agent(env, ds.split_records("train"), TrainConfig(episodes=episodes, seed=seed))
    a = evaluate_policy(QPolicy(pair.online), env, test, n_boot=0).aggregates["mean_prob_correct"]
    target = r + 0.5*(o-r)
    print(f"{name}: fixed={fixed:.4f} random={r:.4f} oracle={o:.4f} target={target:.4f} "
          f"agent={a:.4f} ok={a>=target} ({time.time()-t0:.0f}s train)")

strong = (6.0,-5.0,4.5,-4.0,3.5)
variant("unit-cost strong", None, 5.0, strong)
variant("noisy-costly strong", (1.0,1.0,1.0,1.0,1.0,2.0,2.0,2.0), 7.0, strong)

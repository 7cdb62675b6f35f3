import time
import numpy as np
from featacq.agent import QPolicy, TrainConfig, train_agent
from featacq.data import SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import budget_sweep
from featacq.guesser import PretrainConfig, build_guesser, pretrain

t0 = time.time()
spec = SyntheticSpec(
    n_features=9, informative=(1,2,3,4,5), weights=(6.0,-5.0,4.5,-4.0,3.5),
    n_samples=2500, seed=0, n_free=1)
ds = standardize(split(generate_synthetic(spec), (0.7,0.15,0.15), seed=0))
model = build_guesser(ds.schema, 2, np.random.default_rng(0), hidden=(64,64))
model, _ = pretrain(model, ds, PretrainConfig(epochs=30, lr=3e-3, p_adv_end=0.2, seed=0))
print(f"guesser ready ({time.time()-t0:.0f}s)", flush=True)

def make_env(budget):
    return AcquisitionEnv(ds.schema, model, EnvConfig(budget=budget))

def train_fn(budget):
    pair, _ = train_agent(make_env(budget), ds.split_records("train"),
                          TrainConfig(episodes=2500, lr=7e-4, sync_interval=300, seed=0))
    return QPolicy(pair.online)

budgets = [1.0, 2.0, 4.0, 6.0, 10.0, 12.0]
rows = budget_sweep(train_fn, budgets, ds.split_records("test"), make_env, n_boot=400, seed=0)
for r in rows:
    print({k: (round(v, 4) if isinstance(v, float) else v) for k, v in r.items()}, flush=True)

# trend: every consecutive accuracy within one bootstrap CI of the previous
ok_trend = all(rows[i+1]["accuracy"] >= rows[i]["accuracy_ci"][0] for i in range(len(rows)-1))
a, b = rows[-2], rows[-1]
overlap = a["accuracy_ci"][0] <= b["accuracy_ci"][1] and b["accuracy_ci"][0] <= a["accuracy_ci"][1]
print("trend ok:", ok_trend, "plateau overlap:", overlap, f"({time.time()-t0:.0f}s total)")

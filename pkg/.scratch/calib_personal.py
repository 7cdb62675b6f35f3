import time
import numpy as np
from featacq.agent import QPolicy, RevealAllPolicy, TrainConfig, train_agent
from featacq.data import SwitchRule, SyntheticSpec, generate_synthetic, split, standardize
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.evaluation import evaluate_policy
from featacq.guesser import PretrainConfig, build_guesser, pretrain

t0 = time.time()
spec = SyntheticSpec(
    n_features=7,
    informative=(),
    weights=(),
    switch=SwitchRule(informative=((1, 2, 3), (4, 5, 6)), weights=((5.0, -4.0, 4.0), (4.5, 4.0, -5.0))),
    n_samples=2500,
    seed=0,
    n_free=1,
)
ds = standardize(split(generate_synthetic(spec), (0.7, 0.15, 0.15), seed=0))
model = build_guesser(ds.schema, 2, np.random.default_rng(0), hidden=(64, 64))
model, _ = pretrain(model, ds, PretrainConfig(epochs=30, lr=3e-3, p_adv_end=0.2, seed=0))
train_env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=3.0))
pair, _ = train_agent(train_env, ds.split_records("train"),
                      TrainConfig(episodes=5000, lr=7e-4, sync_interval=300, seed=0))
test = ds.split_records("test")
agent_rep = evaluate_policy(QPolicy(pair.online), train_env, test, n_boot=0)
full_env = AcquisitionEnv(ds.schema, model, EnvConfig(budget=100.0))
ra_rep = evaluate_policy(RevealAllPolicy(), full_env, test, n_boot=0)
print(f"agent IoU={agent_rep.aggregates['iou']:.4f} acc={agent_rep.aggregates['accuracy']:.4f} "
      f"reveal_all IoU={ra_rep.aggregates['iou']:.4f} ({time.time()-t0:.0f}s)")
# what does the agent reveal per patient type?
by_type = {0: [], 1: []}
for p, rec in zip(agent_rep.per_patient, test):
    t = int(rec.values["f0"] > 0)
    by_type[t].append(frozenset(p["selected"]))
for t, sets in by_type.items():
    from collections import Counter
    c = Counter(sets)
    print(f"type {t}: top sets {c.most_common(3)}")

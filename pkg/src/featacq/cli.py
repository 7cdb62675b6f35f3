"""Experiment lifecycle CLI: data generation through serving.

Every subcommand takes one YAML/JSON config file plus dotted overrides
(`--set env.budget=12`) and prints a machine-readable JSON summary line.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np
import yaml

from . import agent as agent_mod
from . import data as data_mod
from . import evaluation as eval_mod
from . import guesser as guesser_mod
from .env import AcquisitionEnv, EnvConfig

DEFAULT_CONFIG = {
    "format_version": 1,
    "seed": 0,
    "workdir": "runs/default",
    "data": {
        "schema": None,  # explicit paths override workdir files
        "records": None,
        "synthetic": {
            "n_features": 8,
            "informative": [1, 2, 3, 4, 5],
            "weights": [4.0, -3.0, 2.5, -2.0, 3.5],
            "n_samples": 2000,
            "n_classes": 2,
            "n_free": 1,
            "costs": None,
            "missing_rate": 0.0,
            "noise": 0.0,
        },
    },
    "split": {"fractions": [0.7, 0.15, 0.15]},
    "guesser": {
        "hidden": [64, 64],
        "epochs": 30,
        "batch_size": 64,
        "lr": 3e-3,
        "adversarial": True,
        "p_adv_start": 0.05,
        "p_adv_end": 0.5,
    },
    "env": {"budget": 8.0, "max_steps": 32, "cost_normalized": False, "gamma": 0.99, "groups": None},
    "agent": {
        "episodes": 2000,
        "batch_size": 64,
        "lr": 1e-3,
        "sync_interval": 200,
        "hidden": [64, 64],
        "eval_every": 0,
    },
    "eval": {"n_boot": 1000, "level": 0.95, "policy": "agent", "format": "json", "traces": False},
    "sweep": {"budgets": [2.0, 4.0, 8.0, 16.0], "episodes": 800, "n_boot": 500},
    "oracle": {"d_limit": 16},
    "service": {"host": "127.0.0.1", "port": 8000, "suggestion_k": 3, "log_dir": None},
}


def _deep_merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=()):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        with open(path) as fh:
            cfg = _deep_merge(cfg, yaml.safe_load(fh) or {})
    for item in overrides:
        key, _, raw = item.partition("=")
        if not _:
            raise SystemExit(f"override {item!r} must look like a.b=value")
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = yaml.safe_load(raw)
    return cfg


def _paths(cfg):
    wd = cfg["workdir"]
    return {
        "schema": cfg["data"]["schema"] or os.path.join(wd, "schema.json"),
        "records": cfg["data"]["records"] or os.path.join(wd, "records.jsonl"),
        "guesser": os.path.join(wd, "guesser.ckpt"),
        "guesser_log": os.path.join(wd, "guesser_log.jsonl"),
        "agent": os.path.join(wd, "agent.ckpt"),
        "curve": os.path.join(wd, "curve.jsonl"),
        "report": os.path.join(wd, "report.json"),
        "report_table": os.path.join(wd, "report.csv"),
        "sweep": os.path.join(wd, "sweep.json"),
        "oracle": os.path.join(wd, "oracle.json"),
    }


def _load_dataset(cfg):
    paths = _paths(cfg)
    ds = data_mod.load_dataset(
        paths["records"], paths["schema"], tuple(cfg["split"]["fractions"]), cfg["seed"]
    )
    return data_mod.standardize(ds)


def _synthetic_spec(cfg):
    raw = dict(cfg["data"]["synthetic"])
    raw["informative"] = tuple(raw["informative"])
    raw["weights"] = tuple(raw["weights"])
    if raw.get("costs"):
        raw["costs"] = tuple(raw["costs"])
    if raw.get("modalities"):
        raw["modalities"] = {int(k): v for k, v in raw["modalities"].items()}
    if raw.get("switch"):
        sw = raw["switch"]
        raw["switch"] = data_mod.SwitchRule(
            informative=tuple(tuple(g) for g in sw["informative"]),
            weights=tuple(tuple(w) for w in sw["weights"]),
        )
    raw.setdefault("seed", cfg["seed"])
    return data_mod.SyntheticSpec(**raw)


def _env_config(cfg, budget=None):
    e = cfg["env"]
    return EnvConfig(
        budget=budget if budget is not None else e["budget"],
        max_steps=e["max_steps"],
        cost_normalized=e["cost_normalized"],
        gamma=e["gamma"],
        groups=e.get("groups"),
    )


def cmd_gen_data(cfg):
    paths = _paths(cfg)
    os.makedirs(cfg["workdir"], exist_ok=True)
    ds = data_mod.generate_synthetic(_synthetic_spec(cfg))
    data_mod.save_schema(ds.schema, paths["schema"])
    data_mod.save_records(ds.records, paths["records"])
    labels = [r.label for r in ds.records]
    return {
        "command": "gen-data",
        "records": len(ds.records),
        "features": ds.schema.d,
        "cost_ceiling": ds.schema.cost_ceiling,
        "label_mean": float(np.mean(labels)) if labels else None,
        "schema_hash": ds.schema.hash(),
        "paths": {"schema": paths["schema"], "records": paths["records"]},
    }


def cmd_train_guesser(cfg):
    paths = _paths(cfg)
    ds = _load_dataset(cfg)
    g = cfg["guesser"]
    rng = np.random.default_rng(cfg["seed"])
    model = guesser_mod.build_guesser(ds.schema, _n_classes(ds), rng, tuple(g["hidden"]))
    pconf = guesser_mod.PretrainConfig(
        epochs=g["epochs"],
        batch_size=g["batch_size"],
        lr=g["lr"],
        adversarial=g["adversarial"],
        p_adv_start=g["p_adv_start"],
        p_adv_end=g["p_adv_end"],
        seed=cfg["seed"],
    )
    model, log = guesser_mod.pretrain(model, ds, pconf)
    guesser_mod.save_guesser(model, paths["guesser"])
    with open(paths["guesser_log"], "w") as fh:
        for entry in log:
            fh.write(json.dumps(entry) + "\n")
    return {
        "command": "train-guesser",
        "epochs": len(log),
        "final_loss": log[-1]["loss"],
        "final_val_acc": log[-1]["val_acc"],
        "checksum": model.checksum(),
        "paths": {"checkpoint": paths["guesser"], "log": paths["guesser_log"]},
    }


def _n_classes(ds):
    return int(max(r.label for r in ds.records)) + 1


def cmd_train_agent(cfg):
    paths = _paths(cfg)
    ds = _load_dataset(cfg)
    model = guesser_mod.load_guesser(paths["guesser"])
    env = AcquisitionEnv(ds.schema, model, _env_config(cfg))
    a = cfg["agent"]
    tconf = agent_mod.TrainConfig(
        episodes=a["episodes"],
        batch_size=a["batch_size"],
        lr=a["lr"],
        gamma=cfg["env"]["gamma"],
        sync_interval=a["sync_interval"],
        hidden=tuple(a["hidden"]),
        eval_every=a["eval_every"],
        seed=cfg["seed"],
    )
    before = model.checksum()
    pair, curve = agent_mod.train_agent(env, ds.split_records("train"), tconf)
    assert model.checksum() == before, "guesser mutated during agent training"
    agent_mod.save_agent(pair, ds.schema, env.config, paths["agent"])
    with open(paths["curve"], "w") as fh:
        for point in curve:
            fh.write(json.dumps(point) + "\n")
    tail = [c["return"] for c in curve[-max(1, len(curve) // 10) :]]
    return {
        "command": "train-agent",
        "episodes": len(curve),
        "mean_return_tail": float(np.mean(tail)) if tail else None,
        "paths": {"checkpoint": paths["agent"], "curve": paths["curve"]},
    }


def _policy(cfg, pair):
    kind = cfg["eval"]["policy"]
    if kind == "agent":
        return agent_mod.QPolicy(pair.online)
    if kind == "random":
        return agent_mod.RandomPolicy(seed=cfg["seed"])
    if kind == "reveal_all":
        return agent_mod.RevealAllPolicy()
    if kind == "greedy_myopic":
        return agent_mod.GreedyMyopicPolicy()
    raise SystemExit(f"unknown eval policy {kind!r}")


def cmd_evaluate(cfg):
    paths = _paths(cfg)
    ds = _load_dataset(cfg)
    model = guesser_mod.load_guesser(paths["guesser"])
    pair = None
    if cfg["eval"]["policy"] == "agent":
        pair, _, schema_hash = agent_mod.load_agent(paths["agent"])
        if schema_hash != ds.schema.hash():
            raise SystemExit("agent checkpoint does not match dataset schema")
    env = AcquisitionEnv(ds.schema, model, _env_config(cfg))
    report = eval_mod.evaluate_policy(
        _policy(cfg, pair),
        env,
        ds.split_records("test"),
        n_boot=cfg["eval"]["n_boot"],
        level=cfg["eval"]["level"],
        seed=cfg["seed"],
        keep_traces=cfg["eval"]["traces"],
    )
    if cfg["eval"]["traces"]:
        with open(os.path.join(cfg["workdir"], "traces.jsonl"), "w") as fh:
            for line in report.traces:
                fh.write(json.dumps(line) + "\n")
    if cfg["eval"]["format"] == "table":
        with open(paths["report_table"], "w", newline="") as fh:
            rows = report.flat_rows()
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["id"])
            writer.writeheader()
            writer.writerows(rows)
        out_path = paths["report_table"]
    else:
        with open(paths["report"], "w") as fh:
            fh.write(report.to_json() + "\n")
        out_path = paths["report"]
    return {
        "command": "evaluate",
        "policy": cfg["eval"]["policy"],
        **{k: report.aggregates[k] for k in ("accuracy", "auroc", "auprc", "mean_cost", "iou")},
        "cis": report.cis,
        "path": out_path,
    }


def cmd_sweep_budget(cfg):
    paths = _paths(cfg)
    ds = _load_dataset(cfg)
    model = guesser_mod.load_guesser(paths["guesser"])
    a = cfg["agent"]

    def make_env(budget):
        return AcquisitionEnv(ds.schema, model, _env_config(cfg, budget=budget))

    def train_fn(budget):
        tconf = agent_mod.TrainConfig(
            episodes=cfg["sweep"]["episodes"],
            batch_size=a["batch_size"],
            lr=a["lr"],
            gamma=cfg["env"]["gamma"],
            sync_interval=a["sync_interval"],
            hidden=tuple(a["hidden"]),
            seed=cfg["seed"],
        )
        pair, _ = agent_mod.train_agent(make_env(budget), ds.split_records("train"), tconf)
        return agent_mod.QPolicy(pair.online)

    rows = eval_mod.budget_sweep(
        train_fn,
        list(cfg["sweep"]["budgets"]),
        ds.split_records("test"),
        make_env,
        n_boot=cfg["sweep"]["n_boot"],
        seed=cfg["seed"],
    )
    with open(paths["sweep"], "w") as fh:
        json.dump(rows, fh, indent=2)
    return {"command": "sweep-budget", "rows": rows, "path": paths["sweep"]}


def cmd_oracle(cfg):
    paths = _paths(cfg)
    ds = _load_dataset(cfg)
    model = guesser_mod.load_guesser(paths["guesser"])
    result = eval_mod.oracle_policy_value(
        model, ds.split_records("test"), cfg["env"]["budget"], cfg["oracle"]["d_limit"]
    )
    with open(paths["oracle"], "w") as fh:
        json.dump(
            {"mean_prob_correct": result.mean_prob_correct, "per_patient": result.per_patient},
            fh,
            indent=2,
        )
    return {
        "command": "oracle",
        "budget": cfg["env"]["budget"],
        "mean_prob_correct": result.mean_prob_correct,
        "path": paths["oracle"],
    }


def build_service_bundle(cfg):
    from .service import ServiceBundle

    paths = _paths(cfg)
    schema = data_mod.load_schema(paths["schema"])
    model = guesser_mod.load_guesser(paths["guesser"])
    pair, env_cfg, schema_hash = agent_mod.load_agent(paths["agent"])
    if schema_hash != schema.hash() or model.schema_hash != schema.hash():
        raise SystemExit("schema/guesser/agent checkpoints do not match")
    return ServiceBundle(
        schema=schema,
        guesser=model,
        qnet=pair.online,
        env_config=env_cfg,
        default_k=cfg["service"]["suggestion_k"],
    )


def cmd_serve(cfg):
    import uvicorn

    from .service import create_app

    bundle = build_service_bundle(cfg)
    log_dir = cfg["service"]["log_dir"]
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    app = create_app(bundle, log_dir=log_dir)
    host, port = cfg["service"]["host"], cfg["service"]["port"]
    print(json.dumps({"command": "serve", "host": host, "port": port}), flush=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return None


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-guesser": cmd_train_guesser,
    "train-agent": cmd_train_agent,
    "evaluate": cmd_evaluate,
    "sweep-budget": cmd_sweep_budget,
    "oracle": cmd_oracle,
    "serve": cmd_serve,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="featacq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", default=None, help="YAML/JSON config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted config override, value parsed as YAML",
        )
    args = parser.parse_args(argv)
    cfg = load_config(args.config, args.overrides)
    summary = COMMANDS[args.command](cfg)
    if summary is not None:
        print(json.dumps(summary), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Scratch: validate production defaults (input_scale 6) on all tasks."""
import sys
import time

import numpy as np

from echobench.harness import ExperimentConfig, execute_run


def probe(task, model, episodes, agent_over=None, tp=None, seed=1, chunk=2000, tag=""):
    cfg = ExperimentConfig(task=task, models=[model], episodes=episodes, base_seed=seed,
                           runs_per_model=1, task_params=tp or {}, agent=agent_over or {})
    t0 = time.perf_counter()
    r = execute_run(cfg, model, 0)
    chunks = [sum(r.metrics[i:i + chunk]) / len(r.metrics[i:i + chunk])
              for i in range(0, episodes, chunk)]
    out = [round(c, 3) for c in chunks]
    extra = ""
    if task == "water_maze" and r.trial_rewards:
        rew = np.asarray(r.trial_rewards[-1000:], dtype=float)
        stp = np.asarray(r.trial_steps[-1000:], dtype=float)
        r1 = rew[:, 0] / stp[:, 0]
        r25 = rew[:, 1:].sum(axis=1) / stp[:, 1:].sum(axis=1)
        gaps = r25 - r1
        sem = gaps.std(ddof=1) / np.sqrt(len(gaps))
        extra = (f" rate1={r1.mean():.4f} rate25={r25.mean():.4f} "
                 f"gap={gaps.mean():.4f} sem={sem:.4f}")
    print(f"{tag}{task}/{model} seed={seed} {time.perf_counter()-t0:.0f}s: {out}{extra}",
          flush=True)


which = sys.argv[1]
if which == "maze_rate":
    for seed in (1, 2):
        probe("water_maze", "esn_local", 8000, agent_over={"discount": 0.99}, seed=seed)
    probe("water_maze", "linear", 8000, agent_over={"discount": 0.99}, seed=1)
elif which == "bandit":
    for model in ("esn_local", "esn_dense"):
        for seed in (1, 2, 3):
            probe("bandit", model, 10000, agent_over={"discount": 0.3}, seed=seed)
elif which == "recall_others":
    for model, seed in (("gru", 1), ("gru", 2), ("linear", 1), ("linear", 2)):
        probe("recall_match", model, 4000, agent_over={"discount": 0.0},
              tp={"n_symbols": 2}, seed=seed, chunk=1000)
elif which == "recall_dense":
    for seed in (1, 2):
        probe("recall_match", "esn_dense", 3000, agent_over={"discount": 0.0},
              tp={"n_symbols": 2}, seed=seed, chunk=1000)

"""Scratch: stall-rate sweeps for the three learning criteria."""
import sys, time
import numpy as np
from echobench.harness import ExperimentConfig, execute_run

def probe(task, model, episodes, agent_over=None, tp=None, seed=1, chunk=1000, tag=""):
    cfg = ExperimentConfig(task=task, models=[model], episodes=episodes, base_seed=seed,
                           runs_per_model=1, task_params=tp or {}, agent=agent_over or {})
    t0 = time.perf_counter()
    r = execute_run(cfg, model, 0)
    chunks = [sum(r.metrics[i:i+chunk])/len(r.metrics[i:i+chunk]) for i in range(0, episodes, chunk)]
    print(f"{tag}{task}/{model} g={cfg.agent['discount']} seed={seed} {time.perf_counter()-t0:.0f}s:",
          [round(c,3) for c in chunks], flush=True)

which = sys.argv[1]
if which == "recall_sweep":
    for seed in range(1, 9):
        probe("recall_match", "esn_local", 3000, agent_over={"discount": 0.0},
              tp={"n_symbols": 2}, seed=seed)
elif which == "bandit_sweep":
    for seed in (3, 4, 5, 6):
        probe("bandit", "esn_local", 10000, agent_over={"discount": 0.3}, seed=seed, chunk=2000)
elif which == "maze_probe":
    for seed in (1, 2):
        probe("water_maze", "esn_local", 8000, agent_over={"discount": 0.99}, seed=seed, chunk=2000)
    probe("water_maze", "linear", 8000, agent_over={"discount": 0.99}, seed=1, chunk=2000)

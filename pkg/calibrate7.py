"""Scratch: validate candidate input scale across tasks/variants."""
import sys
import time

from echobench import reservoir
from echobench.harness import ExperimentConfig, execute_run

orig_build = reservoir.build_input_matrix


def make_scaled(s):
    def scaled(config, n_inputs, rng):
        return s * orig_build(config, n_inputs, rng)
    return scaled


def probe(task, model, episodes, agent_over=None, tp=None, seed=1, chunk=1000, tag=""):
    cfg = ExperimentConfig(task=task, models=[model], episodes=episodes, base_seed=seed,
                           runs_per_model=1, task_params=tp or {}, agent=agent_over or {})
    t0 = time.perf_counter()
    r = execute_run(cfg, model, 0)
    chunks = [sum(r.metrics[i:i + chunk]) / len(r.metrics[i:i + chunk])
              for i in range(0, episodes, chunk)]
    out = [round(c, 3) for c in chunks]
    extra = ""
    if task == "water_maze" and r.trial_rewards:
        import numpy as np
        tr = np.asarray(r.trial_rewards[-1000:], dtype=float)
        extra = f" trial1={tr[:,0].mean():.3f} trials2-5={tr[:,1:].mean():.3f}"
    print(f"{tag}{task}/{model} seed={seed} {time.perf_counter()-t0:.0f}s: {out}{extra}",
          flush=True)


which = sys.argv[1]
scale = float(sys.argv[2]) if len(sys.argv) > 2 else 6.0
reservoir.build_input_matrix = make_scaled(scale)

if which == "maze":
    for seed in (1, 2):
        probe("water_maze", "esn_local", 8000, agent_over={"discount": 0.99},
              seed=seed, chunk=2000, tag=f"s{scale} ")
    probe("water_maze", "linear", 8000, agent_over={"discount": 0.99},
          seed=1, chunk=2000, tag=f"s{scale} ")
elif which == "bandit":
    for model in ("esn_local", "esn_dense"):
        for seed in (1, 2, 3):
            probe("bandit", model, 10000, agent_over={"discount": 0.3},
                  seed=seed, chunk=2000, tag=f"s{scale} ")
elif which == "recall_dense":
    for seed in (1, 2):
        probe("recall_match", "esn_dense", 3000, agent_over={"discount": 0.0},
              tp={"n_symbols": 2}, seed=seed, tag=f"s{scale} ")

"""Scratch: attack the esn_local local-optimum stalls (recall + bandit)."""
import sys
import time

from echobench import reservoir
from echobench.harness import ExperimentConfig, execute_run


def probe(task, model, episodes, agent_over=None, tp=None, seed=1, chunk=1000, tag=""):
    cfg = ExperimentConfig(task=task, models=[model], episodes=episodes, base_seed=seed,
                           runs_per_model=1, task_params=tp or {}, agent=agent_over or {})
    t0 = time.perf_counter()
    r = execute_run(cfg, model, 0)
    chunks = [sum(r.metrics[i:i + chunk]) / len(r.metrics[i:i + chunk])
              for i in range(0, episodes, chunk)]
    print(f"{tag}{task}/{model} g={cfg.agent['discount']} vc={cfg.agent['value_coef']} "
          f"seed={seed} {time.perf_counter()-t0:.0f}s:",
          [round(c, 3) for c in chunks], flush=True)


orig_build = reservoir.build_input_matrix


def make_scaled(s):
    def scaled(config, n_inputs, rng):
        return s * orig_build(config, n_inputs, rng)
    return scaled


which = sys.argv[1]
tp = {"n_symbols": 2}

if which == "recall_fix":
    for s in (2.0, 3.0):
        reservoir.build_input_matrix = make_scaled(s)
        for seed in (1, 2, 3):
            probe("recall_match", "esn_local", 3000, agent_over={"discount": 0.0},
                  tp=tp, seed=seed, tag=f"inscale{s} ")
    reservoir.build_input_matrix = orig_build
    for seed in (1, 2):
        probe("recall_match", "esn_local", 3000,
              agent_over={"discount": 0.0, "value_coef": 1.0},
              tp=tp, seed=seed, tag="vc1 ")
elif which == "bandit_fix":
    s = float(sys.argv[2])
    reservoir.build_input_matrix = make_scaled(s)
    for seed in (2, 3, 4):
        probe("bandit", "esn_local", 10000, agent_over={"discount": 0.3},
              seed=seed, chunk=2000, tag=f"inscale{s} ")

"""Scratch: input-scale dose-response on recall stalls."""
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
    print(f"{tag}{task}/{model} seed={seed} {time.perf_counter()-t0:.0f}s:",
          [round(c, 3) for c in chunks], flush=True)


tp = {"n_symbols": 2}
which = sys.argv[1]
if which == "dose":
    for s in (4.0, 6.0):
        reservoir.build_input_matrix = make_scaled(s)
        for seed in (1, 2, 3, 4, 5):
            probe("recall_match", "esn_local", 3000, agent_over={"discount": 0.0},
                  tp=tp, seed=seed, tag=f"s{s} ")
    reservoir.build_input_matrix = make_scaled(2.0)
    for seed in (4, 5, 6, 7, 8):
        probe("recall_match", "esn_local", 3000, agent_over={"discount": 0.0},
              tp=tp, seed=seed, tag="s2.0 ")
elif which == "bandit_final":
    s = float(sys.argv[2])
    reservoir.build_input_matrix = make_scaled(s)
    for model in ("esn_local", "esn_dense"):
        for seed in (1, 2, 3):
            probe("bandit", model, 10000, agent_over={"discount": 0.3},
                  seed=seed, chunk=2000, tag=f"s{s} ")

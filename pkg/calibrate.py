"""Scratch calibration sweeps (not part of the package)."""
import sys
import time

from echobench.harness import ExperimentConfig, execute_run


def probe(task, model, episodes, agent_over=None, tp=None, seed=1, chunk=1000):
    cfg = ExperimentConfig(task=task, models=[model], episodes=episodes, base_seed=seed,
                           runs_per_model=1, task_params=tp or {}, agent=agent_over or {})
    t0 = time.perf_counter()
    r = execute_run(cfg, model, 0)
    dur = time.perf_counter() - t0
    chunks = [sum(r.metrics[i:i + chunk]) / len(r.metrics[i:i + chunk])
              for i in range(0, episodes, chunk)]
    print(f"{task}/{model} g={cfg.agent['discount']} seed={seed} {dur:.0f}s per{chunk}:",
          [round(c, 3) for c in chunks], flush=True)
    return r


which = sys.argv[1]

if which == "bandit":
    for model in ["esn_dense", "rnn", "gru", "lstm"]:
        probe("bandit", model, 10000, agent_over={"discount": 0.3})
    probe("bandit", "esn_local", 10000, agent_over={"discount": 0.3}, seed=2)
    probe("bandit", "linear", 10000, agent_over={"discount": 0.3})
elif which == "recall":
    tp = {"n_symbols": 2}
    for g in (0.0, 0.3):
        probe("recall_match", "esn_local", 8000, agent_over={"discount": g}, tp=tp)
    probe("recall_match", "linear", 8000, agent_over={"discount": 0.0}, tp=tp)
    probe("recall_match", "gru", 8000, agent_over={"discount": 0.0}, tp=tp)
elif which == "maze":
    for g in (0.99, 0.9):
        probe("water_maze", "esn_local", 10000, agent_over={"discount": g}, chunk=2000)
    probe("water_maze", "linear", 10000, agent_over={"discount": 0.99}, chunk=2000)

"""Scratch: width-at-top-of-band + long-horizon escape checks."""
import sys
import time

from echobench import cells, reservoir
from echobench.harness import ExperimentConfig, execute_run

orig_build = reservoir.build_input_matrix
orig_equalize = cells.equalize_models


def make_scaled(s):
    def scaled(config, n_inputs, rng):
        return s * orig_build(config, n_inputs, rng)
    return scaled


def equalize_at_top(models, enc_width, n_actions, esn_state_dims, n_layers=2):
    lo, hi = cells.WIDTH_RANGE
    ranges = [(cells._esn_total(esn_state_dims[k], lo, n_layers, n_actions),
               cells._esn_total(esn_state_dims[k], hi, n_layers, n_actions))
              for k in models if k in cells.ESN_KINDS]
    out = orig_equalize(models, enc_width, n_actions, esn_state_dims, n_layers)
    if not ranges:
        return out
    band_lo = max(r[0] for r in ranges)
    band_hi = min(r[1] for r in ranges)
    target = band_lo + int(0.9 * (band_hi - band_lo))
    # redo with shifted target by temporarily patching the midpoint math
    import numpy as np
    res = {}
    for kind in models:
        if kind in cells.ESN_KINDS:
            dim = esn_state_dims[kind]
            w = min(range(lo, hi + 1),
                    key=lambda ww: abs(cells._esn_total(dim, ww, n_layers, n_actions) - target))
            dec = cells._esn_total(dim, w, n_layers, n_actions)
            res[kind] = cells.ModelSizing(kind, 0, dim, w, 0, dec, dec)
        else:
            h, w, total = cells._best_trainable_sizing(kind, enc_width, n_actions,
                                                       n_layers, target)
            mem = cells.parameter_count(kind, enc_width, h)
            res[kind] = cells.ModelSizing(kind, h, h, w, mem, total - mem, total)
    return res


def probe(task, model, episodes, agent_over=None, tp=None, seed=1, chunk=1000, tag=""):
    cfg = ExperimentConfig(task=task, models=[model], episodes=episodes, base_seed=seed,
                           runs_per_model=1, task_params=tp or {}, agent=agent_over or {})
    t0 = time.perf_counter()
    r = execute_run(cfg, model, 0)
    chunks = [sum(r.metrics[i:i + chunk]) / len(r.metrics[i:i + chunk])
              for i in range(0, episodes, chunk)]
    print(f"{tag}{task}/{model} seed={seed} {time.perf_counter()-t0:.0f}s:",
          [round(c, 3) for c in chunks], flush=True)


which = sys.argv[1]
tp = {"n_symbols": 2}

if which == "width_top":
    reservoir.build_input_matrix = make_scaled(2.0)
    cells.equalize_models = equalize_at_top
    for seed in (1, 2, 4, 5, 6):
        probe("recall_match", "esn_local", 3000, agent_over={"discount": 0.0},
              tp=tp, seed=seed, tag="s2+wtop ")
elif which == "escape":
    reservoir.build_input_matrix = make_scaled(2.0)
    probe("recall_match", "esn_local", 8000, agent_over={"discount": 0.0},
          tp=tp, seed=1, tag="s2-escape ")
elif which == "bandit2":
    reservoir.build_input_matrix = make_scaled(2.0)
    for seed in (1, 2, 3):
        probe("bandit", "esn_local", 10000, agent_over={"discount": 0.3},
              seed=seed, chunk=2000, tag="s2 ")

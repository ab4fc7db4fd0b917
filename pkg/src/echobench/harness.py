"""Experiment runner: seeded multi-run training, curve aggregation, reports.

A JSON config selects one task, a model subset, and budgets. Each
(model, run) gets a seed derived from the base seed with a splitmix64
mixer, so any subset of models reproduces the exact same runs. Per-run
series land in ``runs/<model>_<seed>.csv``, per-model min/mean/max curves
in ``curves/<model>.csv``, run metadata in ``report.json``, and a
Figure-style overlay plot in ``figures/``. Reruns of the same config are
byte-identical on the CSV outputs.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agent as agent_mod
from . import cells, envs, reservoir
from .agent import SEED_TAG_ENV, SEED_TAG_POLICY, AgentConfig
from .autodiff import AdamState
from .errors import ConfigurationError
from .rng import Xoshiro256pp, derive_run_seed, splitmix64_mix

MODEL_ORDER = ("linear", "rnn", "gru", "lstm", "esn_dense", "esn_local")

METRIC_SEMANTICS = {
    envs.RECALL: "accuracy over scored steps",
    envs.BANDIT: "mean per-step reward",
    envs.SEQ_BANDIT: "mean per-step reward",
    envs.WATER_MAZE: "fraction of trials with the target found",
}

_AGENT_FIELDS = {
    "entropy_coef": 0.001,
    "value_coef": 0.5,
    "discount": 0.99,
    "learning_rate": 0.0003,
    "decoder_layers": 2,
}

_ESN_DENSE_FIELDS = {"n_hidden": 64, "phi": 1.0, "p_global": 0.4, "p_input": 0.4,
                     "input_scale": 6.0}
_ESN_LOCAL_FIELDS = {"phi": 1.0, "p_global": 0.01, "p_input": 0.5, "p_local": 0.5,
                     "n_unique": 20, "n_shared": 10, "radius": 10,
                     "input_scale": 6.0}


def _check_keys(given: dict, allowed, context: str) -> None:
    unknown = set(given) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown keys in {context}: {sorted(unknown)} (allowed: {sorted(allowed)})"
        )


@dataclass
class ExperimentConfig:
    task: str
    models: list[str]
    episodes: int
    base_seed: int
    runs_per_model: int = 8
    smoothing_window: int = 100
    jobs: int = 1
    out_dir: str | None = None
    task_params: dict = field(default_factory=dict)
    agent: dict = field(default_factory=lambda: dict(_AGENT_FIELDS))
    esn_dense: dict = field(default_factory=dict)
    esn_local: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in envs.TASKS:
            raise ConfigurationError(f"unknown task {self.task!r}")
        if not self.models:
            raise ConfigurationError("models must not be empty")
        for m in self.models:
            if m not in MODEL_ORDER:
                raise ConfigurationError(f"unknown model {m!r}")
        if len(set(self.models)) != len(self.models):
            raise ConfigurationError("duplicate model ids")
        if self.runs_per_model < 1 or self.episodes < 1:
            raise ConfigurationError("runs_per_model and episodes must be >= 1")
        if self.smoothing_window < 1:
            raise ConfigurationError("smoothing_window must be >= 1")
        # normalize/validate nested dicts against their field tables
        self.agent = {**_AGENT_FIELDS, **self.agent}
        _check_keys(self.agent, _AGENT_FIELDS, "agent")
        _check_keys(self.esn_dense, _ESN_DENSE_FIELDS, "esn_dense")
        _check_keys(self.esn_local, _ESN_LOCAL_FIELDS, "esn_local")
        self.task_params = dict(
            envs.task_config(self.task, self.task_params).__dict__)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        fields = {
            "task", "models", "episodes", "base_seed", "runs_per_model",
            "smoothing_window", "jobs", "out_dir", "task_params", "agent",
            "esn_dense", "esn_local",
        }
        _check_keys(raw, fields, "experiment config")
        for required in ("task", "models", "episodes", "base_seed"):
            if required not in raw:
                raise ConfigurationError(f"missing required config field {required!r}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigurationError(
                f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
            ) from None
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def resolved_dict(self) -> dict:
        """Full snapshot with every default materialized; round-trips."""
        esn_dense = {**_ESN_DENSE_FIELDS, **self.esn_dense}
        sizing = self.sizing()
        if "esn_dense" in sizing:
            esn_dense["n_hidden"] = sizing["esn_dense"].state_dim
        return {
            "task": self.task,
            "task_params": dict(self.task_params),
            "models": list(self.models),
            "episodes": self.episodes,
            "base_seed": self.base_seed,
            "runs_per_model": self.runs_per_model,
            "smoothing_window": self.smoothing_window,
            "jobs": self.jobs,
            "out_dir": self.out_dir,
            "agent": dict(self.agent),
            "esn_dense": esn_dense,
            "esn_local": {**_ESN_LOCAL_FIELDS, **self.esn_local},
        }

    # ---- derived structure ------------------------------------------------

    def env_config(self):
        return envs.task_config(self.task, self.task_params)

    def make_env(self, rng: Xoshiro256pp):
        return envs.make_env(self.task, self.env_config(), rng)

    def esn_config(self, kind: str) -> reservoir.EsnConfig:
        if kind == "esn_dense":
            merged = {**_ESN_DENSE_FIELDS, **self.esn_dense}
            return reservoir.EsnConfig(variant=reservoir.DENSE, **merged)
        merged = {**_ESN_LOCAL_FIELDS, **self.esn_local}
        return reservoir.EsnConfig(variant=reservoir.LOCAL, **merged)

    def _env_widths(self) -> tuple[int, int]:
        probe = self.make_env(Xoshiro256pp(0))
        return probe.observation_width, probe.action_count

    def sizing(self) -> dict[str, cells.ModelSizing]:
        """Parameter-parity sizing for the configured model set.

        The dense reservoir is grown beyond its default size only when the
        config does not pin n_hidden and parity would otherwise be
        impossible against the (derived) local reservoir size.
        """
        obs_width, n_actions = self._env_widths()
        enc = agent_mod.encoded_width(obs_width, n_actions)
        layers = self.agent["decoder_layers"]
        state_dims: dict[str, int] = {}
        if "esn_local" in self.models:
            state_dims["esn_local"] = reservoir.local_reservoir_size(
                self.esn_config("esn_local"), enc)
        if "esn_dense" in self.models:
            dense_n = {**_ESN_DENSE_FIELDS, **self.esn_dense}["n_hidden"]
            if ("n_hidden" not in self.esn_dense
                    and "esn_local" in self.models):
                dense_n = max(dense_n, cells.dense_size_for_parity(
                    state_dims["esn_local"], n_actions, layers, floor=dense_n))
            state_dims["esn_dense"] = dense_n
        return cells.equalize_models(self.models, enc, n_actions, state_dims,
                                     n_layers=layers)

    def agent_config(self, kind: str) -> AgentConfig:
        sizing = self.sizing()[kind]
        esn = None
        if kind in cells.ESN_KINDS:
            esn = self.esn_config(kind)
            if kind == "esn_dense" and esn.n_hidden != sizing.state_dim:
                from dataclasses import replace
                esn = replace(esn, n_hidden=sizing.state_dim)
        return AgentConfig(
            memory=kind,
            memory_hidden=max(sizing.memory_hidden, 1),
            decoder=cells.MlpConfig(sizing.decoder_width, self.agent["decoder_layers"]),
            entropy_coef=self.agent["entropy_coef"],
            value_coef=self.agent["value_coef"],
            discount=self.agent["discount"],
            learning_rate=self.agent["learning_rate"],
            esn=esn,
        )


def run_seed(config: ExperimentConfig, model: str, run_index: int) -> int:
    return derive_run_seed(config.base_seed, MODEL_ORDER.index(model), run_index)


# ---------------------------------------------------------------------------
# single run

@dataclass
class RunResult:
    model: str
    seed: int
    run_index: int
    metrics: list[float]
    trial_rewards: list[list[float]]   # water maze only: per-episode, per-trial
    trial_steps: list[list[int]]       # water maze only: steps spent per trial
    param_total: int
    duration_s: float


def execute_run(config: ExperimentConfig, model: str, run_index: int) -> RunResult:
    seed = run_seed(config, model, run_index)
    env_rng = Xoshiro256pp(splitmix64_mix(seed ^ SEED_TAG_ENV))
    policy_rng = Xoshiro256pp(splitmix64_mix(seed ^ SEED_TAG_POLICY))
    env = config.make_env(env_rng)
    agent = agent_mod.Agent(config.agent_config(model), env.observation_width,
                            env.action_count, seed)
    opt = AdamState.for_params(agent.parameters(),
                               learning_rate=config.agent["learning_rate"])
    is_maze = config.task == envs.WATER_MAZE
    n_trials = config.env_config().trials_per_target if is_maze else 0
    metrics: list[float] = []
    trial_rewards: list[list[float]] = []
    trial_steps: list[list[int]] = []
    started = time.perf_counter()
    for _ in range(config.episodes):
        out = agent_mod.train_meta_episode(agent, env, opt, policy_rng)
        metrics.append(out["metric"])
        if is_maze:
            per_trial = [0.0] * n_trials
            per_steps = [0] * n_trials
            for r, info in zip(out["rewards"], out["infos"]):
                per_trial[info["trial"]] += r
                per_steps[info["trial"]] += 1
            trial_rewards.append(per_trial)
            trial_steps.append(per_steps)
    return RunResult(model=model, seed=seed, run_index=run_index,
                     metrics=metrics, trial_rewards=trial_rewards,
                     trial_steps=trial_steps,
                     param_total=agent.parameter_total(),
                     duration_s=time.perf_counter() - started)


def _run_star(args):
    return execute_run(*args)


# ---------------------------------------------------------------------------
# aggregation

def moving_average(xs: list[float], window: int) -> np.ndarray:
    """Trailing mean with an expanding warmup (output length unchanged)."""
    arr = np.asarray(xs, dtype=np.float64)
    if window == 1 or arr.size == 0:
        return arr.copy()
    sums = np.convolve(arr, np.ones(window))[:arr.size]
    counts = np.minimum(np.arange(1, arr.size + 1), window)
    return sums / counts


def aggregate_curves(series: list[list[float]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elementwise min/mean/max across equally long per-run series."""
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise ConfigurationError(f"run series lengths differ: {sorted(lengths)}")
    stack = np.asarray(series, dtype=np.float64)
    return stack.min(axis=0), stack.mean(axis=0), stack.max(axis=0)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_run_csv(path: Path, metrics: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("episode,mean_step_reward\n")
        for i, m in enumerate(metrics, start=1):
            fh.write(f"{i},{_fmt(m)}\n")


def read_run_csv(path: Path) -> list[float]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "episode,mean_step_reward":
            raise ConfigurationError(f"{path}: unexpected header {header!r}")
        return [float(line.split(",")[1]) for line in fh if line.strip()]


def write_curve_csv(path: Path, mins, means, maxs) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("episode,min,mean,max\n")
        for i in range(len(means)):
            fh.write(f"{i + 1},{_fmt(mins[i])},{_fmt(means[i])},{_fmt(maxs[i])}\n")


def write_trials_csv(path: Path, trial_rewards: list[list[float]],
                     trial_steps: list[list[int]]) -> None:
    n_trials = len(trial_rewards[0]) if trial_rewards else 0
    header = ([f"trial{i + 1}_reward" for i in range(n_trials)]
              + [f"trial{i + 1}_steps" for i in range(n_trials)])
    with open(path, "w", newline="") as fh:
        fh.write("episode," + ",".join(header) + "\n")
        for i, (rew, stp) in enumerate(zip(trial_rewards, trial_steps), start=1):
            cells_ = [_fmt(v) for v in rew] + [str(v) for v in stp]
            fh.write(f"{i}," + ",".join(cells_) + "\n")


def aggregate_directory(out_dir: Path, smoothing_window: int,
                        models: list[str] | None = None) -> dict[str, dict]:
    """Rebuild per-model curves from runs/*.csv; returns plot-ready data."""
    runs_dir = out_dir / "runs"
    if not runs_dir.is_dir():
        raise ConfigurationError(f"no runs/ directory under {out_dir}")
    by_model: dict[str, list[tuple[int, list[float]]]] = {}
    for path in sorted(runs_dir.glob("*.csv")):
        model, seed_str = path.stem.rsplit("_", 1)
        if models is not None and model not in models:
            continue
        by_model.setdefault(model, []).append((int(seed_str), read_run_csv(path)))
    if not by_model:
        raise ConfigurationError(f"no run CSVs found under {runs_dir}")
    curves_dir = out_dir / "curves"
    curves_dir.mkdir(exist_ok=True)
    curves: dict[str, dict] = {}
    for model in sorted(by_model):
        series = [moving_average(s, smoothing_window)
                  for _, s in sorted(by_model[model])]
        mins, means, maxs = aggregate_curves([list(s) for s in series])
        write_curve_csv(curves_dir / f"{model}.csv", mins, means, maxs)
        curves[model] = {"min": mins, "mean": means, "max": maxs}
    return curves


# ---------------------------------------------------------------------------
# experiment driver

def sizing_report(config: ExperimentConfig) -> dict:
    sizing = config.sizing()
    deviations = cells.parity_deviations(sizing)
    table = {}
    for kind, s in sizing.items():
        table[kind] = {
            "memory_hidden": s.memory_hidden,
            "state_dim": s.state_dim,
            "decoder_width": s.decoder_width,
            "memory_params": s.memory_params,
            "decoder_params": s.decoder_params,
            "total_params": s.total_params,
            "deviation_from_median": deviations[kind],
            "within_tolerance": deviations[kind] <= cells.PARITY_TOLERANCE,
        }
    return table


def run_experiment(config: ExperimentConfig, out_dir, jobs: int | None = None,
                   progress=None) -> Path:
    """Execute all runs, write CSV/JSON outputs and the overlay figure."""
    out = Path(out_dir)
    try:
        (out / "runs").mkdir(parents=True, exist_ok=True)
        (out / "curves").mkdir(exist_ok=True)
        (out / "figures").mkdir(exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise OSError(f"output directory {out} is not writable: {e}") from e

    jobs = jobs if jobs is not None else config.jobs
    if jobs < 1:
        jobs = os.cpu_count() or 1
    tasks = [(config, model, run_index)
             for model in config.models
             for run_index in range(config.runs_per_model)]
    if jobs == 1:
        results = []
        for t in tasks:
            results.append(_run_star(t))
            if progress:
                progress(results[-1])
    else:
        with multiprocessing.Pool(jobs) as pool:
            results = []
            for res in pool.imap(_run_star, tasks):
                results.append(res)
                if progress:
                    progress(res)

    needs_trials = config.task == envs.WATER_MAZE
    if needs_trials:
        (out / "trials").mkdir(exist_ok=True)
    records = []
    for res in results:
        write_run_csv(out / "runs" / f"{res.model}_{res.seed}.csv", res.metrics)
        if needs_trials:
            write_trials_csv(out / "trials" / f"{res.model}_{res.seed}.csv",
                             res.trial_rewards, res.trial_steps)
        records.append({
            "model": res.model,
            "task": config.task,
            "seed": res.seed,
            "run_index": res.run_index,
            "episodes": len(res.metrics),
            "trainable_params": res.param_total,
            "duration_s": res.duration_s,
        })

    curves = aggregate_directory(out, config.smoothing_window,
                                 models=list(config.models))
    report = {
        "config": config.resolved_dict(),
        "metric": METRIC_SEMANTICS[config.task],
        "sizing": sizing_report(config),
        "runs": records,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, default=float)
        fh.write("\n")

    from . import plots
    plots.render_reward_figure(curves, config.task,
                               out / "figures" / f"{config.task}_curves.png")
    return out


def export_weights(config: ExperimentConfig, out_dir) -> list[Path]:
    """Dump reservoir matrices (CSV) and Figure-style weight/activity plots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe_env = config.make_env(Xoshiro256pp(0))
    enc = agent_mod.encoded_width(probe_env.observation_width, probe_env.action_count)
    written = []
    from . import plots
    for kind in config.models:
        if kind not in cells.ESN_KINDS:
            continue
        agent_cfg = config.agent_config(kind)
        seed = splitmix64_mix(run_seed(config, kind, 0) ^ agent_mod._SEED_TAG_RESERVOIR)
        weights = reservoir.build_reservoir(agent_cfg.esn, enc, seed)
        rec_path = out / f"{kind}_recurrent.csv"
        in_path = out / f"{kind}_input.csv"
        reservoir.export_weights_csv(weights, rec_path, in_path)
        fig_path = out / f"{kind}_weights.png"
        plots.render_weight_figure(weights, kind, fig_path)
        written.extend([rec_path, in_path, fig_path])
    return written

"""Four memory-dependent POMDP tasks behind one small interface.

Every environment owns its RNG stream, exposes
(reset, step, observation_width, action_count, meta_episode_length), and
annotates steps with oracle information (true label, optimal arm, target
cell) so tests can check behavior against independent reimplementations.

A meta-episode is the unit between memory resets: one 100-step episode
for recall match and the bandit, 30 three-step attempts for the
sequential bandit, and 5 trials with a shared hidden target for the
water maze. Hidden task parameters are redrawn at reset and held fixed
within the meta-episode.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UsageError
from .rng import Xoshiro256pp

RECALL = "recall_match"
BANDIT = "bandit"
SEQ_BANDIT = "seq_bandit"
WATER_MAZE = "water_maze"
TASKS = (RECALL, BANDIT, SEQ_BANDIT, WATER_MAZE)


@dataclass
class StepOutcome:
    observation: np.ndarray   # column vector, constant width per task
    reward: float
    done: bool                # set only at the meta-episode boundary
    info: dict


def _one_hot(i: int, n: int) -> np.ndarray:
    v = np.zeros((n, 1))
    v[i, 0] = 1.0
    return v


# ---------------------------------------------------------------------------
# Recall Match

@dataclass(frozen=True)
class RecallConfig:
    n_symbols: int = 4
    lag_a: int = 2
    lag_b: int = 4
    episode_len: int = 100

    def __post_init__(self):
        if self.lag_a == self.lag_b:
            raise ConfigurationError("recall lags must differ")
        if self.n_symbols < 2:
            raise ConfigurationError("recall needs at least 2 symbols")


class RecallMatchEnv:
    """Answer 1 when the symbol two steps back equals the one four back.

    Steps before both lags exist are unscored: reward 0 regardless of
    the action and excluded from the accuracy metric.
    """

    def __init__(self, config: RecallConfig, rng: Xoshiro256pp):
        self.config = config
        self.rng = rng
        self._symbols: list[int] = []
        self._t = 0

    @property
    def observation_width(self) -> int:
        return self.config.n_symbols

    @property
    def action_count(self) -> int:
        return 2

    @property
    def meta_episode_length(self) -> int:
        return self.config.episode_len

    def reset(self) -> np.ndarray:
        self._symbols = [self.rng.randint(self.config.n_symbols)]
        self._t = 0
        return _one_hot(self._symbols[0], self.config.n_symbols)

    def step(self, action: int) -> StepOutcome:
        if action not in (0, 1):
            raise UsageError(f"recall action must be 0 or 1, got {action}")
        cfg = self.config
        t = self._t
        scored = t >= max(cfg.lag_a, cfg.lag_b)
        if scored:
            label = int(self._symbols[t - cfg.lag_a] == self._symbols[t - cfg.lag_b])
            reward = 1.0 if action == label else 0.0
        else:
            label = None
            reward = 0.0
        self._t += 1
        done = self._t >= cfg.episode_len
        if done:
            obs = np.zeros((cfg.n_symbols, 1))
        else:
            sym = self.rng.randint(cfg.n_symbols)
            self._symbols.append(sym)
            obs = _one_hot(sym, cfg.n_symbols)
        return StepOutcome(obs, reward, done,
                           {"label": label, "scored": scored, "t": t})

    @staticmethod
    def episode_metric(rewards: list[float], infos: list[dict]) -> float:
        """Accuracy over scored steps only."""
        scored = [r for r, i in zip(rewards, infos) if i["scored"]]
        return sum(scored) / len(scored) if scored else 0.0


# ---------------------------------------------------------------------------
# Multi-armed bandit

@dataclass(frozen=True)
class BanditConfig:
    n_arms: int = 2
    episode_len: int = 100

    def __post_init__(self):
        if self.n_arms < 2:
            raise ConfigurationError("bandit needs at least 2 arms")


class BanditEnv:
    """Per-episode reward probabilities drawn uniformly on the simplex;
    each step one winning arm is sampled from Categorical(p)."""

    def __init__(self, config: BanditConfig, rng: Xoshiro256pp):
        self.config = config
        self.rng = rng
        self._p = np.full(config.n_arms, 1.0 / config.n_arms)
        self._t = 0

    @property
    def observation_width(self) -> int:
        return 1  # constant placeholder; all information arrives via feedback

    @property
    def action_count(self) -> int:
        return self.config.n_arms

    @property
    def meta_episode_length(self) -> int:
        return self.config.episode_len

    def reset(self) -> np.ndarray:
        self._p = self.rng.dirichlet_flat(self.config.n_arms)
        self._t = 0
        return np.ones((1, 1))

    def step(self, action: int) -> StepOutcome:
        if not 0 <= action < self.config.n_arms:
            raise UsageError(f"bandit arm {action} out of range")
        winner = self.rng.categorical(self._p)
        reward = 1.0 if action == winner else 0.0
        self._t += 1
        done = self._t >= self.config.episode_len
        obs = np.zeros((1, 1)) if done else np.ones((1, 1))
        return StepOutcome(obs, reward, done,
                           {"winner": winner, "optimal_arm": int(np.argmax(self._p)),
                            "p": self._p.copy()})

    @staticmethod
    def episode_metric(rewards: list[float], infos: list[dict]) -> float:
        return sum(rewards) / len(rewards) if rewards else 0.0


# ---------------------------------------------------------------------------
# Sequential bandit

@dataclass(frozen=True)
class SeqBanditConfig:
    n_arms: int = 2
    seq_len: int = 3
    attempts: int = 30
    cue_symbols: int = 4

    def __post_init__(self):
        if self.n_arms < 2 or self.seq_len < 1 or self.attempts < 1:
            raise ConfigurationError("invalid sequential bandit settings")


class SeqBanditEnv:
    """Reward 1 at the end of an attempt iff all actions matched the
    hidden target sequence; one target (and one cue) per meta-episode."""

    def __init__(self, config: SeqBanditConfig, rng: Xoshiro256pp):
        self.config = config
        self.rng = rng
        self._target: list[int] = []
        self._cue = 0
        self._pos = 0
        self._attempt = 0
        self._matched = True

    @property
    def observation_width(self) -> int:
        return self.config.cue_symbols

    @property
    def action_count(self) -> int:
        return self.config.n_arms

    @property
    def meta_episode_length(self) -> int:
        return self.config.attempts * self.config.seq_len

    def reset(self) -> np.ndarray:
        cfg = self.config
        self._target = [self.rng.randint(cfg.n_arms) for _ in range(cfg.seq_len)]
        self._cue = self.rng.randint(cfg.cue_symbols)
        self._pos = 0
        self._attempt = 0
        self._matched = True
        return _one_hot(self._cue, cfg.cue_symbols)

    def step(self, action: int) -> StepOutcome:
        cfg = self.config
        if not 0 <= action < cfg.n_arms:
            raise UsageError(f"sequential bandit action {action} out of range")
        self._matched = self._matched and action == self._target[self._pos]
        self._pos += 1
        attempt_end = self._pos >= cfg.seq_len
        reward = 0.0
        if attempt_end:
            reward = 1.0 if self._matched else 0.0
            self._pos = 0
            self._matched = True
            self._attempt += 1
        done = self._attempt >= cfg.attempts
        obs = np.zeros((cfg.cue_symbols, 1)) if done else _one_hot(self._cue, cfg.cue_symbols)
        return StepOutcome(obs, reward, done,
                           {"target": tuple(self._target), "cue": self._cue,
                            "attempt_end": attempt_end})

    @staticmethod
    def episode_metric(rewards: list[float], infos: list[dict]) -> float:
        return sum(rewards) / len(rewards) if rewards else 0.0


# ---------------------------------------------------------------------------
# Water maze

@dataclass(frozen=True)
class MazeConfig:
    grid: int = 4
    steps_per_trial: int = 30
    trials_per_target: int = 5

    def __post_init__(self):
        if self.grid < 3:
            raise ConfigurationError("maze grid must be at least 3x3")


# (dr, dc) per action: N, S, E, W with row 0 at the north edge
_MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1))
# observation order: N, NE, E, SE, S, SW, W, NW
_NEIGHBORS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


class WaterMazeEnv:
    """Hidden target on an open grid; the only sensor is the 8-neighbor
    wall pattern, so localization requires walls and corners as landmarks.

    A meta-episode is trials_per_target trials from random starts (never
    the target cell); finding the target rewards 1 and ends the trial.
    """

    def __init__(self, config: MazeConfig, rng: Xoshiro256pp):
        self.config = config
        self.rng = rng
        self._target = (0, 0)
        self._pos = (0, 0)
        self._trial = 0
        self._steps_in_trial = 0

    @property
    def observation_width(self) -> int:
        return 8

    @property
    def action_count(self) -> int:
        return 4

    @property
    def meta_episode_length(self) -> int:
        return self.config.steps_per_trial * self.config.trials_per_target

    def _observe(self) -> np.ndarray:
        n = self.config.grid
        r, c = self._pos
        bits = np.zeros((8, 1))
        for k, (dr, dc) in enumerate(_NEIGHBORS):
            rr, cc = r + dr, c + dc
            if not (0 <= rr < n and 0 <= cc < n):
                bits[k, 0] = 1.0
        return bits

    def _random_cell(self) -> tuple[int, int]:
        n = self.config.grid
        return (self.rng.randint(n), self.rng.randint(n))

    def _start_trial(self) -> None:
        pos = self._random_cell()
        while pos == self._target:
            pos = self._random_cell()
        self._pos = pos
        self._steps_in_trial = 0

    def reset(self) -> np.ndarray:
        self._target = self._random_cell()
        self._trial = 0
        self._start_trial()
        return self._observe()

    def step(self, action: int) -> StepOutcome:
        cfg = self.config
        if not 0 <= action < 4:
            raise UsageError(f"maze action {action} out of range")
        dr, dc = _MOVES[action]
        r, c = self._pos
        rr, cc = r + dr, c + dc
        if 0 <= rr < cfg.grid and 0 <= cc < cfg.grid:
            self._pos = (rr, cc)
        self._steps_in_trial += 1
        found = self._pos == self._target
        trial_end = found or self._steps_in_trial >= cfg.steps_per_trial
        reward = 1.0 if found else 0.0
        trial = self._trial
        done = False
        if trial_end:
            self._trial += 1
            if self._trial >= cfg.trials_per_target:
                done = True
            else:
                self._start_trial()
        obs = np.zeros((8, 1)) if done else self._observe()
        return StepOutcome(obs, reward, done,
                           {"trial": trial, "trial_end": trial_end, "found": found,
                            "target": self._target, "position": self._pos})

    @staticmethod
    def episode_metric(rewards: list[float], infos: list[dict]) -> float:
        """Fraction of trials in which the target was found."""
        trials = sum(1 for i in infos if i["trial_end"])
        return sum(rewards) / trials if trials else 0.0


# ---------------------------------------------------------------------------
# oracles

def maze_shortest_path(grid: int, start: tuple[int, int], goal: tuple[int, int]) -> int:
    """Breadth-first shortest path length on the open grid."""
    if start == goal:
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        (r, c), d = frontier.popleft()
        for dr, dc in _MOVES:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < grid and 0 <= cc < grid) or (rr, cc) in seen:
                continue
            if (rr, cc) == goal:
                return d + 1
            seen.add((rr, cc))
            frontier.append(((rr, cc), d + 1))
    raise ConfigurationError("goal unreachable")  # cannot happen on an open grid


def oracle_optimal_return(task: str, config, hidden: dict) -> float:
    """Best achievable expected per-step reward given full knowledge.

    hidden carries the per-meta-episode draw: bandit "p", maze "target"
    plus "starts" (list of trial start cells).
    """
    if task == RECALL:
        return 1.0
    if task == BANDIT:
        return float(np.max(hidden["p"]))
    if task == SEQ_BANDIT:
        return 1.0 / config.seq_len
    if task == WATER_MAZE:
        dists = [maze_shortest_path(config.grid, s, hidden["target"])
                 for s in hidden["starts"]]
        return len(dists) / sum(dists)
    raise ConfigurationError(f"unknown task {task!r}")


_CONFIG_TYPES = {
    RECALL: RecallConfig,
    BANDIT: BanditConfig,
    SEQ_BANDIT: SeqBanditConfig,
    WATER_MAZE: MazeConfig,
}

_ENV_TYPES = {
    RECALL: RecallMatchEnv,
    BANDIT: BanditEnv,
    SEQ_BANDIT: SeqBanditEnv,
    WATER_MAZE: WaterMazeEnv,
}


def task_config(task: str, params: dict | None = None):
    """Build the per-task config dataclass from a plain dict of overrides."""
    try:
        cls = _CONFIG_TYPES[task]
    except KeyError:
        raise ConfigurationError(f"unknown task {task!r}") from None
    params = dict(params or {})
    allowed = set(cls.__dataclass_fields__)
    unknown = set(params) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown task_params for {task}: {sorted(unknown)} (allowed: {sorted(allowed)})"
        )
    return cls(**params)


def make_env(task: str, config, rng: Xoshiro256pp):
    return _ENV_TYPES[task](config, rng)


def write_trace_csv(env, action_fn, path) -> None:
    """Roll one meta-episode with actions from action_fn(obs) and dump
    per-step (obs, action, reward, oracle info) rows."""
    obs = env.reset()
    rows = []
    t = 0
    while True:
        action = action_fn(obs)
        out = env.step(action)
        oracle = {k: v for k, v in out.info.items()}
        rows.append((t, obs.ravel().tolist(), action, out.reward, out.done, oracle))
        obs = out.observation
        t += 1
        if out.done:
            break
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "observation", "action", "reward", "done", "oracle_info"])
        for row in rows:
            writer.writerow([row[0], " ".join(f"{v:g}" for v in row[1]),
                             row[2], f"{row[3]:g}", int(row[4]), repr(row[5])])

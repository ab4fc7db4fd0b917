from collections import deque

import numpy as np
import pytest

from echobench import envs
from echobench.envs import (BanditConfig, BanditEnv, MazeConfig, RecallConfig,
                            RecallMatchEnv, SeqBanditConfig, SeqBanditEnv,
                            StepOutcome, WaterMazeEnv, make_env,
                            maze_shortest_path, oracle_optimal_return,
                            task_config, write_trace_csv)
from echobench.errors import ConfigurationError, UsageError
from echobench.rng import Xoshiro256pp


# ---------------------------------------------------------------------------
# recall match


def _run_recall_episode(env, actions_fn):
    obs = env.reset()
    symbols = [int(np.argmax(obs))]
    rewards, infos = [], []
    done = False
    while not done:
        out = env.step(actions_fn(len(rewards)))
        rewards.append(out.reward)
        infos.append(out.info)
        done = out.done
        if not done:
            symbols.append(int(np.argmax(out.observation)))
    return symbols, rewards, infos


def test_recall_label_direct_definition():
    # symbols [a, b, a, b, a]: at t=4, s2 == s0, so the label is 1
    env = RecallMatchEnv(RecallConfig(n_symbols=2, episode_len=5), Xoshiro256pp(1))
    env.reset()
    env._symbols = [0, 1, 0, 1]  # pin the history; next obs below appends s4
    env._t = 4
    env._symbols.append(0)
    out = env.step(1)
    assert out.reward == 1.0
    assert out.info["label"] == 1


def test_recall_unscored_steps_reward_zero():
    env = RecallMatchEnv(RecallConfig(), Xoshiro256pp(2))
    env.reset()
    for t in range(4):
        out = env.step(1)
        assert out.reward == 0.0
        assert out.info["scored"] is False
        assert out.info["label"] is None


def test_recall_labels_match_sliding_window_oracle():
    # the oracle recomputes labels from the raw symbol stream
    cfg = RecallConfig(n_symbols=3, episode_len=60)
    for seed in range(40):
        env = RecallMatchEnv(cfg, Xoshiro256pp(seed))
        symbols, rewards, infos = _run_recall_episode(env, lambda t: 1)
        assert len(symbols) == cfg.episode_len
        for t, info in enumerate(infos):
            if t < 4:
                assert not info["scored"]
                continue
            oracle = int(symbols[t - 2] == symbols[t - 4])
            assert info["label"] == oracle
            assert rewards[t] == (1.0 if oracle == 1 else 0.0)


def test_recall_metric_excludes_unscored_steps():
    cfg = RecallConfig(episode_len=10)
    env = RecallMatchEnv(cfg, Xoshiro256pp(3))
    env.reset()
    rewards, infos = [], []
    for _ in range(10):
        out = env.step(0)
        rewards.append(out.reward)
        infos.append(out.info)
    metric = env.episode_metric(rewards, infos)
    scored = [r for r, i in zip(rewards, infos) if i["scored"]]
    assert metric == sum(scored) / 6  # 10 steps, first 4 unscored


def test_recall_rejects_bad_action():
    env = RecallMatchEnv(RecallConfig(), Xoshiro256pp(4))
    env.reset()
    with pytest.raises(UsageError):
        env.step(2)


def test_recall_config_rejects_equal_lags():
    with pytest.raises(ConfigurationError):
        RecallConfig(lag_a=3, lag_b=3)


# ---------------------------------------------------------------------------
# bandit


def test_bandit_degenerate_probabilities():
    env = BanditEnv(BanditConfig(), Xoshiro256pp(5))
    env.reset()
    env._p = np.array([1.0, 0.0])
    for _ in range(20):
        assert env.step(0).reward == 1.0
    env.reset()
    env._p = np.array([1.0, 0.0])
    for _ in range(20):
        assert env.step(1).reward == 0.0


def test_bandit_even_probabilities_rate_half():
    env = BanditEnv(BanditConfig(episode_len=10**9), Xoshiro256pp(6))
    env.reset()
    env._p = np.array([0.5, 0.5])
    hits = sum(env.step(0).reward for _ in range(10000))
    assert abs(hits / 10000 - 0.5) < 0.02


def test_bandit_defaults_match_difficulty_settings():
    cfg = BanditConfig()
    assert cfg.n_arms == 2 and cfg.episode_len == 100


def test_bandit_hidden_probabilities_on_simplex_and_redrawn():
    env = BanditEnv(BanditConfig(), Xoshiro256pp(7))
    env.reset()
    p1 = env._p.copy()
    assert abs(p1.sum() - 1.0) < 1e-12 and np.all(p1 >= 0)
    env.reset()
    assert not np.array_equal(p1, env._p)


def test_bandit_rejects_bad_arm():
    env = BanditEnv(BanditConfig(), Xoshiro256pp(8))
    env.reset()
    with pytest.raises(UsageError):
        env.step(2)


# ---------------------------------------------------------------------------
# sequential bandit


def _play_attempt(env, actions):
    rewards = []
    for a in actions:
        rewards.append(env.step(a).reward)
    return rewards


def test_seq_bandit_reward_only_on_exact_sequence():
    env = SeqBanditEnv(SeqBanditConfig(), Xoshiro256pp(9))
    env.reset()
    env._target = [0, 1, 0]
    assert _play_attempt(env, [0, 1, 0]) == [0.0, 0.0, 1.0]
    assert _play_attempt(env, [0, 1, 1]) == [0.0, 0.0, 0.0]
    assert _play_attempt(env, [1, 1, 0]) == [0.0, 0.0, 0.0]


def test_seq_bandit_exactly_one_of_eight_sequences_rewarded():
    import itertools
    for seed in range(30):
        env = SeqBanditEnv(SeqBanditConfig(), Xoshiro256pp(seed))
        env.reset()
        rewarded = [seq for seq in itertools.product((0, 1), repeat=3)
                    if _play_attempt(env, list(seq))[-1] == 1.0]
        assert len(rewarded) == 1
        assert tuple(env._target) == rewarded[0]


def test_seq_bandit_meta_episode_is_30_attempts():
    env = SeqBanditEnv(SeqBanditConfig(), Xoshiro256pp(10))
    env.reset()
    assert env.meta_episode_length == 90
    for t in range(90):
        out = env.step(0)
    assert out.done


def test_seq_bandit_cue_constant_within_meta_episode():
    env = SeqBanditEnv(SeqBanditConfig(), Xoshiro256pp(11))
    obs0 = env.reset()
    for _ in range(10):
        out = env.step(0)
        assert np.array_equal(out.observation, obs0)


# ---------------------------------------------------------------------------
# water maze


def _ref_wall_bits(grid, pos):
    r, c = pos
    bits = []
    for dr, dc in ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)):
        rr, cc = r + dr, c + dc
        bits.append(0.0 if 0 <= rr < grid and 0 <= cc < grid else 1.0)
    return np.array(bits).reshape(8, 1)


def _ref_bfs(grid, start, goal):
    seen = {start}
    q = deque([(start, 0)])
    while q:
        (r, c), d = q.popleft()
        if (r, c) == goal:
            return d
        for dr, dc in ((-1, 0), (1, 0), (0, 1), (0, -1)):
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < grid and 0 <= nxt[1] < grid and nxt not in seen:
                seen.add(nxt)
                q.append((nxt, d + 1))
    raise AssertionError("unreachable")


def test_maze_corner_observation_bits():
    env = WaterMazeEnv(MazeConfig(), Xoshiro256pp(12))
    env.reset()
    env._pos = (0, 0)
    bits = env._observe().ravel()
    # order: N, NE, E, SE, S, SW, W, NW
    assert list(bits) == [1, 1, 0, 0, 0, 1, 1, 1]


def test_maze_interior_observation_is_zero():
    env = WaterMazeEnv(MazeConfig(), Xoshiro256pp(13))
    env.reset()
    env._pos = (1, 1)
    assert np.array_equal(env._observe(), np.zeros((8, 1)))


def test_maze_observation_matches_reference_everywhere():
    env = WaterMazeEnv(MazeConfig(), Xoshiro256pp(14))
    env.reset()
    for r in range(4):
        for c in range(4):
            env._pos = (r, c)
            assert np.array_equal(env._observe(), _ref_wall_bits(4, (r, c)))


def test_maze_wall_collision_is_noop():
    env = WaterMazeEnv(MazeConfig(), Xoshiro256pp(15))
    env.reset()
    env._target = (3, 3)
    env._pos = (0, 0)
    out = env.step(0)  # N into the wall
    assert out.info["position"] == (0, 0)
    out = env.step(3)  # W into the wall
    assert out.info["position"] == (0, 0)
    out = env.step(1)  # S moves
    assert out.info["position"] == (1, 0)


def test_maze_all_pairs_reachable_within_trial_budget():
    for start_r in range(4):
        for start_c in range(4):
            for goal_r in range(4):
                for goal_c in range(4):
                    if (start_r, start_c) == (goal_r, goal_c):
                        continue
                    d = maze_shortest_path(4, (start_r, start_c), (goal_r, goal_c))
                    assert d == _ref_bfs(4, (start_r, start_c), (goal_r, goal_c))
                    assert d <= 6 < 30


def test_maze_trial_structure_and_reward():
    cfg = MazeConfig()
    env = WaterMazeEnv(cfg, Xoshiro256pp(16))
    env.reset()
    rng = Xoshiro256pp(17)
    trials_seen = set()
    starts = []
    pos_history = []
    trial_start_pos = env._pos
    starts.append(trial_start_pos)
    steps = 0
    while True:
        out = env.step(rng.randint(4))
        steps += 1
        pos_history.append(out.info["position"])
        trials_seen.add(out.info["trial"])
        if out.info["found"]:
            assert out.reward == 1.0
            assert out.info["trial_end"]
        else:
            assert out.reward == 0.0
        if out.info["trial_end"] and not out.done:
            starts.append(env._pos)
        if out.done:
            break
    assert trials_seen == set(range(cfg.trials_per_target))
    assert steps <= env.meta_episode_length
    for s in starts:
        assert s != env._target
    for p in pos_history:
        assert 0 <= p[0] < 4 and 0 <= p[1] < 4


def test_maze_target_constant_within_and_redrawn_across_meta_episodes():
    env = WaterMazeEnv(MazeConfig(), Xoshiro256pp(18))
    targets = set()
    for _ in range(12):
        env.reset()
        t0 = env._target
        rng = Xoshiro256pp(19)
        done = False
        while not done:
            out = env.step(rng.randint(4))
            assert out.info["target"] == t0
            done = out.done
        targets.add(t0)
    assert len(targets) > 1


# ---------------------------------------------------------------------------
# oracle returns


def test_oracle_bandit_is_max_probability():
    cfg = BanditConfig()
    assert oracle_optimal_return(envs.BANDIT, cfg, {"p": np.array([0.8, 0.2])}) == 0.8


def test_oracle_recall_is_one():
    assert oracle_optimal_return(envs.RECALL, RecallConfig(), {}) == 1.0


def test_oracle_seq_bandit_is_one_per_seq_len():
    assert oracle_optimal_return(envs.SEQ_BANDIT, SeqBanditConfig(), {}) == pytest.approx(1 / 3)


def test_oracle_maze_uses_bfs_distances():
    cfg = MazeConfig()
    hidden = {"target": (2, 2), "starts": [(0, 0), (3, 3), (0, 3), (2, 0), (1, 2)]}
    dists = [_ref_bfs(4, s, (2, 2)) for s in hidden["starts"]]
    got = oracle_optimal_return(envs.WATER_MAZE, cfg, hidden)
    assert got == pytest.approx(len(dists) / sum(dists))


# ---------------------------------------------------------------------------
# shared plumbing


def test_determinism_same_seed_same_outcomes():
    for task in envs.TASKS:
        cfg = task_config(task)
        a = make_env(task, cfg, Xoshiro256pp(77))
        b = make_env(task, cfg, Xoshiro256pp(77))
        obs_a, obs_b = a.reset(), b.reset()
        assert np.array_equal(obs_a, obs_b)
        act_rng = Xoshiro256pp(5)
        for _ in range(40):
            act = act_rng.randint(a.action_count)
            oa, ob = a.step(act), b.step(act)
            assert oa.reward == ob.reward and oa.done == ob.done
            assert np.array_equal(oa.observation, ob.observation)
            if oa.done:
                break


def test_task_config_rejects_unknown_params():
    with pytest.raises(ConfigurationError):
        task_config(envs.BANDIT, {"n_arms": 2, "bogus": 1})
    with pytest.raises(ConfigurationError):
        task_config("tetris")


def test_observation_width_constant_over_episode():
    for task in envs.TASKS:
        env = make_env(task, task_config(task), Xoshiro256pp(3))
        obs = env.reset()
        assert obs.shape == (env.observation_width, 1)
        done = False
        while not done:
            out = env.step(0)
            assert out.observation.shape == (env.observation_width, 1)
            done = out.done


def test_write_trace_csv(tmp_path):
    env = make_env(envs.BANDIT, BanditConfig(episode_len=12), Xoshiro256pp(4))
    path = tmp_path / "trace.csv"
    write_trace_csv(env, lambda obs: 0, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,observation,action,reward,done,oracle_info"
    assert len(lines) == 13

"""Agent assembly and the actor-critic update.

An agent is a memory module (fixed reservoir or trainable cell), a tanh
MLP trunk, and affine actor/critic heads. Observations are concatenated
with feedback (previous action one-hot, previous reward discretized to
its sign) before entering the memory module. One meta-episode produces
one tape, one loss, and one Adam update; reservoir weights never receive
gradients because their path is never recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import cells, reservoir
from .autodiff import AdamState, Tape, Tensor, adam_step, assert_all_finite
from .errors import ConfigurationError
from .rng import Xoshiro256pp, splitmix64_mix

_SEED_TAG_RESERVOIR = 0x52E5
_SEED_TAG_INIT = 0x1217
SEED_TAG_POLICY = 0xAC70
SEED_TAG_ENV = 0xE417


@dataclass(frozen=True)
class AgentConfig:
    memory: str                       # one of cells.ALL_KINDS
    memory_hidden: int = 32           # trainable cells only
    decoder: cells.MlpConfig = field(default_factory=cells.MlpConfig)
    entropy_coef: float = 0.001
    value_coef: float = 0.5
    discount: float = 0.99
    learning_rate: float = 3e-4
    esn: reservoir.EsnConfig | None = None

    def __post_init__(self):
        if self.memory not in cells.ALL_KINDS:
            raise ConfigurationError(f"unknown memory kind {self.memory!r}")
        if self.entropy_coef < 0.0:
            raise ConfigurationError("entropy_coef must be nonnegative")
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigurationError("discount must lie in [0, 1]")


def encode_input(obs: np.ndarray, prev_action: int | None, prev_reward: float,
                 n_actions: int) -> np.ndarray:
    """[obs | one-hot(prev action) | sign(prev reward)]; zeros at the
    first step of a meta-episode."""
    enc = np.zeros((obs.shape[0] + n_actions + 1, 1))
    enc[:obs.shape[0], 0] = obs[:, 0]
    if prev_action is not None:
        enc[obs.shape[0] + prev_action, 0] = 1.0
        enc[-1, 0] = float(np.sign(prev_reward))
    return enc


def encoded_width(obs_width: int, n_actions: int) -> int:
    return obs_width + n_actions + 1


class Agent:
    """Memory module + decoder trunk + actor/critic heads."""

    def __init__(self, config: AgentConfig, obs_width: int, n_actions: int, seed: int):
        self.config = config
        self.n_actions = n_actions
        self.enc_width = encoded_width(obs_width, n_actions)
        self.kind = config.memory

        if self.kind in cells.ESN_KINDS:
            if config.esn is None:
                raise ConfigurationError("ESN memory requires an EsnConfig")
            self.weights = reservoir.build_reservoir(
                config.esn, self.enc_width, splitmix64_mix(seed ^ _SEED_TAG_RESERVOIR))
            self.cell_config = None
            self.cell_params = {}
            state_dim = self.weights.n_hidden
        else:
            self.weights = None
            self.cell_config = cells.CellConfig(self.kind, self.enc_width,
                                                config.memory_hidden)
            init_rng = Xoshiro256pp(splitmix64_mix(seed ^ _SEED_TAG_INIT))
            self.cell_params = cells.init_cell_params(self.cell_config, init_rng)
            state_dim = config.memory_hidden

        dec_rng = Xoshiro256pp(splitmix64_mix((seed + 1) ^ _SEED_TAG_INIT))
        self.decoder_params = cells.init_mlp_params(config.decoder, state_dim,
                                                    None, dec_rng)
        width = config.decoder.n_hidden_units
        self.actor_head = (cells.weight_param(dec_rng, n_actions, width), cells.bias_param(n_actions))
        self.critic_head = (cells.weight_param(dec_rng, 1, width), cells.bias_param(1))
        self.state_dim = state_dim

    def parameters(self) -> list[Tensor]:
        params = [self.cell_params[k] for k in sorted(self.cell_params)]
        params.extend(cells.mlp_param_list(self.decoder_params))
        params.extend(self.actor_head)
        params.extend(self.critic_head)
        return params

    def parameter_total(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def initial_memory_state(self):
        if self.kind in cells.ESN_KINDS:
            return reservoir.initial_state(self.weights.n_hidden)
        return cells.initial_cell_state(self.cell_config)


@dataclass
class StepResult:
    action: int
    log_prob: Tensor
    entropy: Tensor
    value: Tensor
    state: object


def agent_step(agent: Agent, state, encoded: np.ndarray,
               rng: Xoshiro256pp) -> StepResult:
    """Advance memory, sample an action, and evaluate the critic."""
    if agent.kind in cells.ESN_KINDS:
        state = reservoir.esn_step(agent.weights, state, encoded)
        feat = ad.constant(state)
    else:
        x = ad.constant(encoded)
        state, feat = cells.cell_step(agent.cell_config, agent.cell_params, state, x)

    trunk = cells.mlp_forward(agent.config.decoder, agent.decoder_params, feat)
    logits = ad.linear(agent.actor_head[0], trunk, agent.actor_head[1])
    assert_all_finite(logits.value, "policy logits")
    logp = ad.log_softmax(logits)
    probs = np.exp(logp.value[:, 0])
    action = rng.categorical(probs)
    value = ad.linear(agent.critic_head[0], trunk, agent.critic_head[1])
    return StepResult(action=action,
                      log_prob=ad.pick(logp, action),
                      entropy=ad.entropy_from_logp(logp),
                      value=value,
                      state=state)


def compute_returns(rewards: list[float], discount: float) -> list[float]:
    """Discounted returns; zero beyond the final step."""
    g = 0.0
    out = [0.0] * len(rewards)
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + discount * g
        out[t] = g
    return out


@dataclass
class Trajectory:
    """Per-step record of one meta-episode."""

    encoded: list[np.ndarray] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    log_probs: list[Tensor] = field(default_factory=list)
    entropies: list[Tensor] = field(default_factory=list)
    values: list[Tensor] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    infos: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.rewards)


def actor_critic_loss(traj: Trajectory, discount: float, entropy_coef: float,
                      value_coef: float) -> tuple[Tensor, dict]:
    """Policy-gradient loss with value regression and an entropy bonus.

    The advantage (return minus critic value) enters the policy term as
    a constant, so the critic is shaped only by its squared-error term.
    """
    returns = compute_returns(traj.rewards, discount)
    terms = []
    policy_sum = value_sum = entropy_sum = 0.0
    for lp, h, v, g in zip(traj.log_probs, traj.entropies, traj.values, returns):
        advantage = g - v.value[0, 0]
        terms.append(ad.scale(lp, -advantage))
        terms.append(ad.scale(ad.squared_error(v, g), value_coef))
        if entropy_coef != 0.0:
            terms.append(ad.scale(h, -entropy_coef))
        policy_sum += -lp.value[0, 0] * advantage
        value_sum += value_coef * (v.value[0, 0] - g) ** 2
        entropy_sum += h.value[0, 0]
    loss = ad.add_n(terms)
    assert_all_finite(loss.value, "actor-critic loss")
    info = {
        "policy_loss": policy_sum,
        "value_loss": value_sum,
        "mean_entropy": entropy_sum / max(len(traj), 1),
        "returns": returns,
    }
    return loss, info


def rollout(agent: Agent, env, policy_rng: Xoshiro256pp) -> Trajectory:
    """One full meta-episode; memory resets only here, at the start."""
    traj = Trajectory()
    state = agent.initial_memory_state()
    obs = env.reset()
    prev_action: int | None = None
    prev_reward = 0.0
    while True:
        enc = encode_input(obs, prev_action, prev_reward, agent.n_actions)
        res = agent_step(agent, state, enc, policy_rng)
        out = env.step(res.action)
        state = res.state
        traj.encoded.append(enc)
        traj.actions.append(res.action)
        traj.log_probs.append(res.log_prob)
        traj.entropies.append(res.entropy)
        traj.values.append(res.value)
        traj.rewards.append(out.reward)
        traj.infos.append(out.info)
        prev_action, prev_reward = res.action, out.reward
        obs = out.observation
        if out.done:
            return traj


def train_meta_episode(agent: Agent, env, opt_state: AdamState,
                       policy_rng: Xoshiro256pp) -> dict:
    """Roll one meta-episode, apply one Adam update, report metrics."""
    params = agent.parameters()
    with Tape() as tape:
        traj = rollout(agent, env, policy_rng)
        loss, info = actor_critic_loss(traj, agent.config.discount,
                                       agent.config.entropy_coef,
                                       agent.config.value_coef)
        tape.backward(loss)
    grads = [p.grad if p.grad is not None else np.zeros_like(p.value)
             for p in params]
    adam_step(params, grads, opt_state)
    for p in params:
        p.grad = None
    steps = len(traj)
    return {
        "steps": steps,
        "total_reward": sum(traj.rewards),
        "mean_step_reward": sum(traj.rewards) / steps if steps else 0.0,
        "metric": env.episode_metric(traj.rewards, traj.infos),
        "loss": loss.item(),
        "policy_loss": info["policy_loss"],
        "value_loss": info["value_loss"],
        "mean_entropy": info["mean_entropy"],
        "rewards": traj.rewards,
        "infos": traj.infos,
    }

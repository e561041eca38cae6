"""
Training and evaluation of the graph actor-critic.

Training follows the twin-delayed deterministic policy gradient scheme: a replay buffer of
transitions, two critics regressed on a clipped double-Q target with target-policy smoothing,
a delayed actor update and soft updates of the three target networks. Exploration draws pure
noise for the first episodes, then noises the actor's output with N(-omega, 1), omega being
the current engaged ratio (or with a static normal distribution).
"""

from __future__ import annotations
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np
import pandas as pd

from incentivizer.baselines import IncentivePolicy
from incentivizer.config import NoiseMode
from incentivizer.policy import ActorNet, CriticNet, Variant, actor_forward, rescale_action
from incentivizer.simenv import EnvState, IncentiveEnv, StepLog
from incentivizer.tensor import (AdamState, CheckpointError, ShapeError, Tensor, adam_step, as_tensor, gradients,
                                 load_checkpoint, mean_all, no_grad, save_checkpoint, square)

logger = logging.getLogger(__name__)

TRAIN_LOG_COLUMNS = ['episode', 'step_reward_sum', 'engaged_final', 'spent_mean']
EVAL_COLUMNS = ['step', 'engaged', 'spent', 'reward']
NETWORK_NAMES = ('actor', 'critic1', 'critic2', 'actor_target', 'critic1_target', 'critic2_target')


@dataclass
class TrainConfig:
    episodes: int = 10_000
    steps: int = 10
    eval_steps: int = 150
    exploration_episodes: int = 1000
    update_frequency: int = 2
    budget: float = 3.0
    gamma: float = 0.99
    tau: float = 1e-3
    batch_size: int = 256
    lr_actor: float = 3e-4
    lr_critic: float = 3e-3
    buffer_capacity: int = 100_000
    seed: int = 0
    noise: NoiseMode = field(default_factory=NoiseMode)
    variant: Variant = Variant.GAC
    target_noise_std: float = 0.1
    target_noise_clip: float = 0.5
    selection_interval: int = 100
    selection_steps: int = 10
    log_interval: int = 100

    def __post_init__(self):
        for name in ('episodes', 'steps', 'eval_steps', 'update_frequency', 'batch_size', 'buffer_capacity',
                     'selection_interval', 'selection_steps', 'log_interval'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        if not 0 <= self.exploration_episodes <= self.episodes:
            raise ValueError(f'exploration_episodes must lie in [0, {self.episodes}], got {self.exploration_episodes}')
        for name in ('budget', 'lr_actor', 'lr_critic'):
            if getattr(self, name) <= 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        if not 0 <= self.gamma <= 1:
            raise ValueError(f'gamma must lie in [0, 1], got {self.gamma}')
        if not 0 <= self.tau <= 1:
            raise ValueError(f'tau must lie in [0, 1], got {self.tau}')


@dataclass
class Transition:
    features: np.ndarray       # |V| x (1 + |Z|), before the step
    action: np.ndarray         # actor space, [-1, 1]^|V|
    reward: float
    next_features: np.ndarray


@dataclass
class Batch:
    features: np.ndarray       # (batch, |V|, 1 + |Z|)
    actions: np.ndarray        # (batch, 1, |V|)
    rewards: np.ndarray        # (batch, 1, 1)
    next_features: np.ndarray

    def __len__(self):
        return self.features.shape[0]


class ReplayBuffer:
    """Ring buffer of transitions, sampled uniformly without replacement within a batch.

    Feature matrices are stored compactly as incentives plus behavior indices; the
    adjacency matrices are static and not stored."""

    def __init__(self, capacity: int, node_count: int, option_count: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError(f'replay capacity must be positive, got {capacity}')
        self.capacity = capacity
        self.node_count = node_count
        self.option_count = option_count
        self.rng = rng
        self.incentives = np.zeros((capacity, node_count))
        self.behaviors = np.zeros((capacity, node_count), dtype=np.int64)
        self.actions = np.zeros((capacity, node_count))
        self.rewards = np.zeros(capacity)
        self.next_incentives = np.zeros((capacity, node_count))
        self.next_behaviors = np.zeros((capacity, node_count), dtype=np.int64)
        self.position = 0
        self.size = 0

    def __len__(self):
        return self.size

    def _split(self, features: np.ndarray):
        features = np.asarray(features, dtype=np.float64)
        if features.shape != (self.node_count, 1 + self.option_count):
            raise ShapeError('replay features', features.shape, (self.node_count, 1 + self.option_count))
        return features[:, 0], np.argmax(features[:, 1:], axis=1)

    def push(self, transition: Transition) -> None:
        i = self.position
        self.incentives[i], self.behaviors[i] = self._split(transition.features)
        self.next_incentives[i], self.next_behaviors[i] = self._split(transition.next_features)
        self.actions[i] = np.asarray(transition.action, dtype=np.float64).reshape(-1)
        self.rewards[i] = transition.reward
        self.position = (self.position + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _features(self, incentives: np.ndarray, behaviors: np.ndarray) -> np.ndarray:
        one_hot = np.eye(self.option_count)[behaviors]
        return np.concatenate([incentives[..., None], one_hot], axis=-1)

    def sample(self, batch_size: int) -> Batch:
        if self.size == 0:
            raise ValueError('cannot sample from an empty replay buffer')
        if batch_size > self.size:
            logger.warning(f'replay buffer holds {self.size} transitions, batch of {batch_size} requested')
        index = self.rng.choice(self.size, size=min(batch_size, self.size), replace=False)
        return Batch(features=self._features(self.incentives[index], self.behaviors[index]),
                     actions=self.actions[index][:, None, :],
                     rewards=self.rewards[index][:, None, None],
                     next_features=self._features(self.next_incentives[index], self.next_behaviors[index]))


def exploration_noise(size: int, omega: float, noise: NoiseMode, rng: np.random.Generator) -> np.ndarray:
    """Unclipped exploration noise: N(-omega, 1) when adaptive, else N(mean, std)."""
    if noise.adaptive:
        return rng.normal(-omega, 1.0, size)
    return rng.normal(noise.mean, noise.std, size)


def explore_action(episode: int, state: EnvState, omega: float, net: ActorNet, rng: np.random.Generator,
                   exploration_episodes: int = 1000, noise: NoiseMode = NoiseMode()) -> np.ndarray:
    """Action in [-1, 1]^|V|: pure N(0, 1) noise up to exploration_episodes, noised actor output after."""
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f'engaged ratio must lie in [0, 1], got {omega}')
    if episode <= exploration_episodes:
        action = rng.standard_normal(state.node_count)
    else:
        action = actor_forward(state, net) + exploration_noise(state.node_count, omega, noise, rng)
    return np.clip(action, -1.0, 1.0)


def bellman_target(rewards, q1, q2, gamma: float) -> np.ndarray:
    return np.asarray(rewards, dtype=np.float64) + gamma * np.minimum(q1, q2)


def critic_loss(q1, q2, target) -> Tensor:
    """Sum of the two critics' mean squared errors against the shared target."""
    target = as_tensor(target)
    return mean_all(square(as_tensor(q1) - target)) + mean_all(square(as_tensor(q2) - target))


def soft_update(source: Sequence[Tensor], target: Sequence[Tensor], tau: float) -> Sequence[Tensor]:
    if len(source) != len(target):
        raise ValueError(f'{len(source)} source parameters for {len(target)} target parameters')
    for s, t in zip(source, target):
        if s.shape != t.shape:
            raise ShapeError('soft_update', s.shape, t.shape)
        t.data = tau * s.data + (1.0 - tau) * t.data
    return target


class GeometricActorCritic:
    """The six networks (actor, two critics and their targets) and the two optimiser states."""

    def __init__(self, node_count: int, option_count: int, config: TrainConfig, rng: np.random.Generator,
                 a_in: np.ndarray, a_out: np.ndarray):
        self.config = config
        self.node_count = node_count
        self.option_count = option_count
        self.a_in = Tensor(a_in)
        self.a_out = Tensor(a_out)
        self.actor = ActorNet(node_count, option_count, rng, config.variant, name='actor')
        self.critic1 = CriticNet(node_count, option_count, rng, config.variant, name='critic1')
        self.critic2 = CriticNet(node_count, option_count, rng, config.variant, name='critic2')
        self.actor_target = self.actor.clone('actor_target')
        self.critic1_target = self.critic1.clone('critic1_target')
        self.critic2_target = self.critic2.clone('critic2_target')
        self.actor_optimizer = AdamState.for_parameters(self.actor.parameters())
        self.critic_optimizer = AdamState.for_parameters(self.critic_parameters())

    def networks(self) -> Dict[str, ActorNet | CriticNet]:
        return {name: getattr(self, name) for name in NETWORK_NAMES}

    def critic_parameters(self) -> List[Tensor]:
        return self.critic1.parameters() + self.critic2.parameters()

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for net in self.networks().values():
            params.update(net.named_parameters())
        return params

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, values: Mapping[str, np.ndarray]) -> None:
        unknown = set(values) - set(self.named_parameters())
        if unknown:
            raise CheckpointError(f'unknown parameters {", ".join(sorted(unknown)[:3])}')
        try:
            for net in self.networks().values():
                net.load_parameters(values)
        except (KeyError, ShapeError) as e:
            raise CheckpointError(str(e)) from None

    def target_q(self, batch: Batch, rng: np.random.Generator) -> np.ndarray:
        with no_grad():
            next_action = self.actor_target.forward(self.a_in, self.a_out, batch.next_features).data
            smoothing = np.clip(rng.normal(0.0, self.config.target_noise_std, next_action.shape),
                                -self.config.target_noise_clip, self.config.target_noise_clip)
            next_action = np.clip(next_action + smoothing, -1.0, 1.0)
            q1 = self.critic1_target.forward(self.a_in, self.a_out, batch.next_features, next_action).data
            q2 = self.critic2_target.forward(self.a_in, self.a_out, batch.next_features, next_action).data
        return bellman_target(batch.rewards, q1, q2, self.config.gamma)

    def critic_update(self, batch: Batch, rng: np.random.Generator) -> float:
        target = self.target_q(batch, rng)
        q1 = self.critic1.forward(self.a_in, self.a_out, batch.features, batch.actions)
        q2 = self.critic2.forward(self.a_in, self.a_out, batch.features, batch.actions)
        loss = critic_loss(q1, q2, target)
        params = self.critic_parameters()
        adam_step(params, gradients(loss, params), self.critic_optimizer, self.config.lr_critic)
        return loss.item()

    def actor_update(self, batch: Batch, step: int) -> float | None:
        """Ascend mean Q1(S, actor(S)) every update_frequency-th step; a no-op otherwise."""
        if step % self.config.update_frequency != 0:
            return None
        actions = self.actor.forward(self.a_in, self.a_out, batch.features)
        objective = mean_all(self.critic1.forward(self.a_in, self.a_out, batch.features, actions))
        params = self.actor.parameters()
        adam_step(params, gradients(-objective, params), self.actor_optimizer, self.config.lr_actor)
        return objective.item()

    def update_targets(self) -> None:
        tau = self.config.tau
        soft_update(self.actor.parameters(), self.actor_target.parameters(), tau)
        soft_update(self.critic1.parameters(), self.critic1_target.parameters(), tau)
        soft_update(self.critic2.parameters(), self.critic2_target.parameters(), tau)

    def train_step(self, batch: Batch, step: int, rng: np.random.Generator) -> float:
        loss = self.critic_update(batch, rng)
        if self.actor_update(batch, step) is not None:
            self.update_targets()
        return loss


class GACPolicy(IncentivePolicy):
    """A trained actor used greedily: incentives are the rescaled actor output."""
    name = 'gac'
    description = 'graph actor-critic policy'

    def __init__(self, actor: ActorNet):
        self.actor = actor

    def act(self, state: EnvState, budget: float) -> np.ndarray:
        return np.clip(rescale_action(actor_forward(state, self.actor)), 0.0, 1.0)

    @classmethod
    def from_parameters(cls, values: Mapping[str, np.ndarray], node_count: int, option_count: int,
                        variant: Variant) -> GACPolicy:
        actor = ActorNet(node_count, option_count, np.random.default_rng(0), variant, name='actor')
        try:
            actor.load_parameters(values)
        except (KeyError, ShapeError) as e:
            raise CheckpointError(f'actor parameters: {e}') from None
        return cls(actor)

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> GACPolicy:
        values, metadata = load_checkpoint(path)
        try:
            node_count, option_count = int(metadata['node_count']), int(metadata['option_count'])
            variant = Variant(metadata['variant'])
        except (KeyError, ValueError) as e:
            raise CheckpointError(f'{path}: incomplete checkpoint metadata ({e})') from None
        return cls.from_parameters(values, node_count, option_count, variant)


@dataclass
class TrainResult:
    best_parameters: Dict[str, np.ndarray]
    log: pd.DataFrame
    best_score: float
    best_episode: int
    node_count: int
    option_count: int
    variant: Variant

    def policy(self) -> GACPolicy:
        return GACPolicy.from_parameters(self.best_parameters, self.node_count, self.option_count, self.variant)

    def save_checkpoint(self, path: str | Path, **metadata) -> None:
        save_checkpoint(path, self.best_parameters,
                        {'node_count': self.node_count, 'option_count': self.option_count, 'variant': str(self.variant),
                         'best_episode': self.best_episode, 'best_score': f'{self.best_score:.17g}', **metadata})


def evaluate(policy: IncentivePolicy, env: IncentiveEnv, steps: int = 150, budget: float = 3.0) -> pd.DataFrame:
    """Roll the policy out for steps steps with the budget refilled each step."""
    if steps < 1:
        raise ValueError(f'steps must be positive, got {steps}')
    policy.reset()
    state = env.reset()
    rows = []
    for step in range(1, steps + 1):
        log, state = env.step(policy.act(state, budget), budget)
        policy.observe(log)
        rows.append((step, log.engaged_count, log.spent, log.step_reward))
    return pd.DataFrame(rows, columns=EVAL_COLUMNS)


def evaluate_checkpoint(path: str | Path, env: IncentiveEnv, steps: int = 150, budget: float = 3.0) -> pd.DataFrame:
    policy = GACPolicy.from_checkpoint(path)
    if policy.actor.node_count != env.node_count:
        raise CheckpointError(f'{path}: checkpoint is for {policy.actor.node_count} users, '
                              f'environment has {env.node_count}')
    return evaluate(policy, env, steps, budget)


def selection_score(actor: ActorNet, env: IncentiveEnv, config: TrainConfig) -> float:
    """Mean engaged count over a short greedy rollout."""
    return float(evaluate(GACPolicy(actor), env, config.selection_steps, config.budget)['engaged'].mean())


def train(config: TrainConfig, env: IncentiveEnv) -> TrainResult:
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    init_rng, noise_rng, replay_rng = (np.random.default_rng(s) for s in seeds)
    nets = GeometricActorCritic(env.node_count, env.option_count, config, init_rng,
                                env.adjacency.a_in, env.adjacency.a_out)
    buffer = ReplayBuffer(config.buffer_capacity, env.node_count, env.option_count, replay_rng)
    best_parameters, best_score, best_episode = nets.state_dict(), -np.inf, 0
    rows = []
    update_step = 0
    for episode in range(1, config.episodes + 1):
        state = env.reset()
        omega = env.engaged_ratio
        reward_sum, spent = 0.0, []
        log: StepLog | None = None
        for _ in range(config.steps):
            action = explore_action(episode, state, omega, nets.actor, noise_rng,
                                    config.exploration_episodes, config.noise)
            log, next_state = env.step(rescale_action(action), config.budget)
            omega = log.engaged_ratio
            buffer.push(Transition(state.features, action, log.step_reward, next_state.features))
            state = next_state
            reward_sum += log.step_reward
            spent.append(log.spent)
            if episode > config.exploration_episodes:
                update_step += 1
                nets.train_step(buffer.sample(config.batch_size), update_step, noise_rng)
        rows.append((episode, reward_sum, log.engaged_count, float(np.mean(spent))))
        trained = episode > config.exploration_episodes
        if (trained and episode % config.selection_interval == 0) or episode == config.episodes:
            score = selection_score(nets.actor, env, config)
            if score > best_score:
                best_parameters, best_score, best_episode = nets.state_dict(), score, episode
                logger.info(f'Episode {episode}: new best policy, mean engaged {score:.2f}')
        if episode % config.log_interval == 0:
            logger.info(f'Episode {episode}/{config.episodes}: reward {reward_sum:.3f}, '
                        f'engaged {log.engaged_count}/{env.node_count}, buffer {len(buffer)}')
    return TrainResult(best_parameters=best_parameters, log=pd.DataFrame(rows, columns=TRAIN_LOG_COLUMNS),
                       best_score=float(best_score), best_episode=best_episode, node_count=env.node_count,
                       option_count=env.option_count, variant=config.variant)

"""
Agent-based decision-making environment.

Every user holds a preference for each behavior option, feels the influence of the
in-neighbors that chose each option at the previous step, and picks the option with
the highest utility. An incentive raises only the utility of the target option z*.
Incentives are assigned user by user in ascending id order against a per-step budget.
"""

from __future__ import annotations
from dataclasses import dataclass, replace
import logging
from pathlib import Path
from typing import Tuple

import numpy as np
import regex

from incentivizer.graph import (NUMBER_FORMAT, AdjacencyPair, DirectedSocialNetwork, EdgeListError,
                                adjacency_matrices, assign_random_weights, dump_network, influence_matrix,
                                numbered_lines, parse_network)

logger = logging.getLogger(__name__)

DEFAULT_OPTION_COUNT = 4
TARGET_OPTION = 0
SNAPSHOT_HEADER = 'incentivizer-environment 1'

SNAPSHOT_FIELD_RE = regex.compile(r'\s*(seed_env|option_count|target_option)\s+(\d+)\s*')
SNAPSHOT_BUDGET_RE = regex.compile(r'\s*budget\s+([-+.\deE]+)\s*')


@dataclass
class Population:
    """Per-user preferences over behavior options and the behaviors of the last step."""
    preferences: np.ndarray
    behaviors: np.ndarray | None = None
    target_option: int = TARGET_OPTION

    def __post_init__(self):
        self.preferences = np.asarray(self.preferences, dtype=np.float64)
        if self.preferences.ndim != 2 or self.preferences.shape[1] < 2:
            raise ValueError(f'preferences must be |V| x |Z| with |Z| >= 2, got {self.preferences.shape}')
        if np.any(self.preferences < 0.0) or np.any(self.preferences > 1.0):
            raise ValueError('preferences must lie in [0, 1]')
        if not 0 <= self.target_option < self.option_count:
            raise ValueError(f'target option {self.target_option} outside 0..{self.option_count - 1}')
        if self.behaviors is not None:
            self.behaviors = _checked_behaviors(self.behaviors, self.user_count, self.option_count)

    @property
    def user_count(self) -> int:
        return self.preferences.shape[0]

    @property
    def option_count(self) -> int:
        return self.preferences.shape[1]


@dataclass(frozen=True, eq=False)
class EnvState:
    """What the agent observes: both adjacency matrices and the feature matrix
    whose row i is [o_i, one-hot(b_i)]."""
    a_out: np.ndarray
    a_in: np.ndarray
    features: np.ndarray

    @property
    def node_count(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class StepLog:
    incentives: np.ndarray
    behaviors: np.ndarray
    rewards: np.ndarray
    step_reward: float
    spent: float
    engaged_ratio: float
    target_option: int = TARGET_OPTION

    @property
    def engaged_count(self) -> int:
        return int(np.count_nonzero(self.behaviors == self.target_option))

    @property
    def charged(self) -> np.ndarray:
        return np.where(self.behaviors == self.target_option, self.incentives, 0.0)


def _checked_behaviors(behaviors, user_count: int, option_count: int) -> np.ndarray:
    behaviors = np.asarray(behaviors, dtype=np.int64).reshape(-1)
    if len(behaviors) != user_count:
        raise ValueError(f'{len(behaviors)} behaviors for {user_count} users')
    if np.any(behaviors < 0) or np.any(behaviors >= option_count):
        raise ValueError(f'behaviors must lie in 0..{option_count - 1}')
    return behaviors


def init_population(net: DirectedSocialNetwork, option_count: int = DEFAULT_OPTION_COUNT,
                    seed: int | np.random.SeedSequence = 0, target_option: int = TARGET_OPTION) -> Population:
    if option_count < 2:
        raise ValueError(f'option_count must be at least 2, got {option_count}')
    rng = np.random.default_rng(seed)
    return Population(preferences=rng.random((net.node_count, option_count)), target_option=target_option)


def preference_behaviors(pop: Population) -> np.ndarray:
    """Pure-preference argmax; ties go to the lowest option index."""
    return np.argmax(pop.preferences, axis=1).astype(np.int64)


def one_hot(behaviors: np.ndarray, option_count: int) -> np.ndarray:
    encoded = np.zeros((len(behaviors), option_count))
    encoded[np.arange(len(behaviors)), behaviors] = 1.0
    return encoded


def social_influence(pop: Population, net: DirectedSocialNetwork, node: int, option: int,
                     prev_behaviors: np.ndarray) -> float:
    """Sum of w_ji over in-neighbors j whose previous behavior was option."""
    if net.weights is None:
        raise ValueError('network has no influence weights')
    prev_behaviors = _checked_behaviors(prev_behaviors, net.node_count, pop.option_count)
    mask = (net.targets == node) & (prev_behaviors[net.sources] == option)
    return float(net.weights[mask].sum())


def influence_matrix_for(pop: Population, net: DirectedSocialNetwork, prev_behaviors: np.ndarray) -> np.ndarray:
    """|V| x |Z| matrix K with K[i, m] = social_influence(pop, net, i, m, prev_behaviors)."""
    prev_behaviors = _checked_behaviors(prev_behaviors, net.node_count, pop.option_count)
    return influence_matrix(net).T @ one_hot(prev_behaviors, pop.option_count)


def utility(pop: Population, net: DirectedSocialNetwork, node: int, option: int, incentive: float,
            prev_behaviors: np.ndarray) -> float:
    if not 0.0 <= incentive <= 1.0:
        raise ValueError(f'incentive {incentive} outside [0, 1]')
    value = pop.preferences[node, option] + social_influence(pop, net, node, option, prev_behaviors)
    if option == pop.target_option:
        value += incentive
    return float(value)


def choose_behavior(pop: Population, net: DirectedSocialNetwork, node: int, incentive: float,
                    prev_behaviors: np.ndarray) -> int:
    utilities = [utility(pop, net, node, option, incentive, prev_behaviors) for option in range(pop.option_count)]
    return int(np.argmax(utilities))


def intermediate_reward(alpha, out_deg, in_deg, v_count: int, incentive, budget: float):
    """alpha * (1 + (|N_out| - |N_in|) / |V|) + ((alpha + 1) / 2) * (B - o) / B.

    Works elementwise on numpy arrays as well as on scalars."""
    if budget <= 0:
        raise ValueError(f'budget must be positive, got {budget}')
    if not np.all(np.isin(alpha, (-1, 1))):
        raise ValueError('alpha must be +1 or -1')
    return alpha * (1 + (out_deg - in_deg) / v_count) + ((alpha + 1) / 2) * (budget - incentive) / budget


def engaged_ratio(behaviors: np.ndarray, target_option: int = TARGET_OPTION) -> float:
    behaviors = np.asarray(behaviors)
    return float(np.count_nonzero(behaviors == target_option) / len(behaviors))


def build_features(incentives: np.ndarray, behaviors: np.ndarray, option_count: int) -> np.ndarray:
    return np.hstack([np.asarray(incentives, dtype=np.float64).reshape(-1, 1), one_hot(behaviors, option_count)])


class IncentiveEnv:
    """Stateful, single-threaded simulation of one population on one network."""

    def __init__(self, net: DirectedSocialNetwork, population: Population):
        if net.weights is None:
            raise ValueError('network has no influence weights; call assign_random_weights first')
        if population.user_count != net.node_count:
            raise ValueError(f'population of {population.user_count} users for {net.node_count} nodes')
        self.net = net
        self.population = population
        self.adjacency: AdjacencyPair = adjacency_matrices(net)
        self._incoming = influence_matrix(net).T  # row i holds w_ji over in-neighbors j
        self.state: EnvState | None = None
        self.last_log: StepLog | None = None

    @property
    def node_count(self) -> int:
        return self.net.node_count

    @property
    def option_count(self) -> int:
        return self.population.option_count

    @property
    def target_option(self) -> int:
        return self.population.target_option

    @property
    def behaviors(self) -> np.ndarray | None:
        return self.population.behaviors

    @property
    def engaged_ratio(self) -> float:
        if self.population.behaviors is None:
            raise ValueError('environment has not been reset')
        return engaged_ratio(self.population.behaviors, self.target_option)

    def reset(self) -> EnvState:
        """Start from pure-preference behaviors, then run one zero-incentive round."""
        self.population.behaviors = preference_behaviors(self.population)
        _log, state = self._assign(np.zeros(self.node_count), budget=1.0)
        return state

    def step(self, action: np.ndarray, budget: float) -> Tuple[StepLog, EnvState]:
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if len(action) != self.node_count:
            raise ValueError(f'action has {len(action)} entries for {self.node_count} users')
        if np.any(action < 0.0) or np.any(action > 1.0):
            raise ValueError('action entries must lie in [0, 1]')
        if budget <= 0:
            raise ValueError(f'budget must be positive, got {budget}')
        if self.population.behaviors is None:
            raise ValueError('environment has not been reset')
        return self._assign(action, float(budget))

    def _assign(self, action: np.ndarray, budget: float) -> Tuple[StepLog, EnvState]:
        z = self.target_option
        previous = self.population.behaviors
        base = self.population.preferences + self._incoming @ one_hot(previous, self.option_count)
        incentives = np.zeros(self.node_count)
        behaviors = np.empty(self.node_count, dtype=np.int64)
        remaining = budget
        for i in range(self.node_count):
            offer = min(float(action[i]), remaining)
            utilities = base[i].copy()
            utilities[z] += offer
            choice = int(np.argmax(utilities))
            if choice == z:
                remaining -= offer
            incentives[i] = offer
            behaviors[i] = choice
        alpha = np.where(behaviors == z, 1, -1)
        rewards = intermediate_reward(alpha, self.net.out_degrees, self.net.in_degrees, self.node_count,
                                      incentives, budget)
        step_reward = 0.0
        for r in rewards.tolist():
            step_reward += r
        self.population.behaviors = behaviors
        log = StepLog(incentives=incentives, behaviors=behaviors, rewards=rewards, step_reward=step_reward,
                      spent=budget - remaining, engaged_ratio=engaged_ratio(behaviors, z), target_option=z)
        self.state = EnvState(a_out=self.adjacency.a_out, a_in=self.adjacency.a_in,
                              features=build_features(incentives, behaviors, self.option_count))
        self.last_log = log
        logger.debug(f'step: reward {step_reward:.4f}, spent {log.spent:.4f}, engaged {log.engaged_count}')
        return log, self.state


def step(env: IncentiveEnv, action: np.ndarray, budget: float) -> Tuple[StepLog, EnvState]:
    return env.step(action, budget)


def reset(env: IncentiveEnv) -> EnvState:
    return env.reset()


def generate_environment(net: DirectedSocialNetwork, option_count: int = DEFAULT_OPTION_COUNT,
                         seed_env: int = 0, target_option: int = TARGET_OPTION) -> IncentiveEnv:
    """Random influence weights and random preferences, both derived from seed_env."""
    weight_seed, preference_seed = np.random.SeedSequence(seed_env).generate_state(2)
    weighted = assign_random_weights(net, int(weight_seed))
    population = init_population(weighted, option_count, int(preference_seed), target_option)
    return IncentiveEnv(weighted, population)


def reseed_environment(env: IncentiveEnv, seed_env: int) -> IncentiveEnv:
    """Same topology, freshly drawn weights and preferences."""
    return generate_environment(replace(env.net, weights=None), env.option_count, seed_env, env.target_option)


def save_snapshot(env: IncentiveEnv, path: str | Path, seed_env: int, budget: float | None = None) -> None:
    """budget, when given, is recorded as the per-step budget the environment was generated for."""
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f'{SNAPSHOT_HEADER}\n')
        f.write(f'seed_env {seed_env}\n')
        if budget is not None:
            f.write(f'budget {float(budget):{NUMBER_FORMAT}}\n')
        f.write(f'option_count {env.option_count}\n')
        f.write(f'target_option {env.target_option}\n')
        f.write('network\n')
        dump_network(env.net, f)
        f.write('preferences\n')
        for row in env.population.preferences:
            f.write(' '.join(f'{value:{NUMBER_FORMAT}}' for value in row) + '\n')


def load_snapshot(path: str | Path) -> Tuple[IncentiveEnv, int]:
    """Returns the environment (not yet reset) and the seed it was generated from."""
    with open(path, 'r', encoding='utf-8') as f:
        lines = numbered_lines(f)
        _, header = next(lines, (0, ''))
        if header.strip() != SNAPSHOT_HEADER:
            raise EdgeListError(f'Not an environment snapshot (header "{header.strip()}")', path, 1)
        fields = {}
        for line_number, line in lines:
            if line.strip() == 'network':
                break
            if SNAPSHOT_BUDGET_RE.fullmatch(line.rstrip('\n')):
                continue
            m = SNAPSHOT_FIELD_RE.fullmatch(line.rstrip('\n'))
            if not m:
                raise EdgeListError(f'Bad snapshot field "{line.strip()}"', path, line_number)
            fields[m.group(1)] = int(m.group(2))
        missing = {'seed_env', 'option_count', 'target_option'} - set(fields)
        if missing:
            raise EdgeListError(f'Snapshot lacks {", ".join(sorted(missing))}', path)
        net = parse_network(lines, filename=path)
        line_number, marker = next(lines, (0, ''))
        if marker.strip() != 'preferences':
            raise EdgeListError('Snapshot lacks a preferences section', path, line_number or None)
        rows = []
        for line_number, line in lines:
            values = line.split()
            if len(values) != fields['option_count']:
                raise EdgeListError(f'Expected {fields["option_count"]} preferences, found {len(values)}',
                                    path, line_number)
            try:
                rows.append([float(v) for v in values])
            except ValueError:
                raise EdgeListError(f'Bad preference row "{line.strip()}"', path, line_number) from None
    if len(rows) != net.node_count:
        raise EdgeListError(f'{len(rows)} preference rows for {net.node_count} nodes', path)
    population = Population(preferences=np.array(rows), target_option=fields['target_option'])
    return IncentiveEnv(net, population), fields['seed_env']


def snapshot_budget(path: str | Path) -> float | None:
    """The per-step budget recorded in a snapshot header, None for snapshots without one."""
    with open(path, 'r', encoding='utf-8') as f:
        for _, line in numbered_lines(f):
            if line.strip() == 'network':
                break
            m = SNAPSHOT_BUDGET_RE.fullmatch(line.rstrip('\n'))
            if m:
                budget = float(m.group(1))
                if not budget > 0:
                    raise EdgeListError(f'Snapshot budget must be positive, got {budget}', path)
                return budget
    return None

#!/usr/bin/env python3

"""
incentivizer allocates incentives to users of a social network so that as many users
as possible engage in a target behavior under a per-step budget.

Commands:
    gen-env   build a network, influence weights and preferences from seeds; write env.snapshot
    train     train the graph actor-critic on a snapshot; write best.ckpt and train_log.csv
    eval      roll out a checkpoint or a baseline policy; write eval_<policy>.csv
    compare   roll out several policies over several environment seeds; write compare_*.csv
    stats     print node/edge/degree statistics of a dataset

Sample calls:
    incentivizer gen-env --dataset soc-dolphins.mtx --preset dolphins --seed-env 42 --out runs/dolphins
    incentivizer train --config runs/dolphins/config.txt --episodes 3000 --noise static:0:1
    incentivizer eval --snapshot runs/dolphins/env.snapshot --policy uniform --budget 3
    incentivizer compare --snapshot runs/dolphins/env.snapshot --policies gac,uniform,none \
        --seeds 1,2,3,4,5 --checkpoint runs/dolphins/best.ckpt --jobs 4
"""

from __future__ import annotations
import argparse
from dataclasses import fields, replace
import logging
from multiprocessing import Pool
from pathlib import Path
import sys
from typing import List, Tuple

from incentivizer.baselines import BASELINES, make_policy
from incentivizer.config import PRESETS, ExperimentConfig, NoiseMode
from incentivizer.evaluation import ComparisonAnalyzer, RolloutResult
from incentivizer.graph import extract_subnetwork, load_edge_list, network_stats
from incentivizer.policy import Variant
from incentivizer.simenv import (generate_environment, load_snapshot, reseed_environment, save_snapshot,
                                 snapshot_budget)
from incentivizer.trainer import GACPolicy, TrainConfig, evaluate, evaluate_checkpoint, train

__version__ = '0.4.0'
__last_mod_date__ = 'October 17, 2026'

logger = logging.getLogger(__name__)

SNAPSHOT_NAME = 'env.snapshot'
CHECKPOINT_NAME = 'best.ckpt'
TRAIN_LOG_NAME = 'train_log.csv'
CONFIG_NAME = 'config.txt'
FINAL_WINDOW = 50


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (if any), then preset (if any), then every flag given explicitly."""
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.preset:
        config = config.with_preset(args.preset)
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
                 if f.name != 'preset' and getattr(args, f.name, None) is not None}
    return replace(config, **overrides)


def write_config(config: ExperimentConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / CONFIG_NAME)
    return out


def snapshot_path(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    return Path(args.snapshot) if args.snapshot else Path(config.out) / SNAPSHOT_NAME


def budget_from_snapshot(args: argparse.Namespace, config: ExperimentConfig, snapshot: Path) -> ExperimentConfig:
    """The budget recorded in the snapshot applies unless a config file, a preset or --budget sets one."""
    if args.config or args.preset or args.budget is not None:
        return config
    budget = snapshot_budget(snapshot)
    if budget is None:
        logger.warning(f'{snapshot} records no budget, using the default {config.budget:g}')
        return config
    return replace(config, budget=budget)


def load_network(config: ExperimentConfig):
    if not config.dataset:
        raise ValueError('no dataset given (use --dataset or a config file)')
    net = load_edge_list(config.dataset, directed=not config.undirected)
    if config.subnetwork is not None:
        net = extract_subnetwork(net, config.seed_node, config.subnetwork)
    return net


def train_config(config: ExperimentConfig) -> TrainConfig:
    return TrainConfig(episodes=config.episodes, steps=config.steps, eval_steps=config.eval_steps,
                       exploration_episodes=config.exploration_episodes, batch_size=config.batch_size,
                       update_frequency=config.update_frequency, budget=config.budget, gamma=config.gamma,
                       tau=config.tau, lr_actor=config.lr_actor, lr_critic=config.lr_critic,
                       buffer_capacity=config.buffer_capacity, seed=config.seed_policy, noise=config.noise,
                       variant=config.variant)


def cmd_stats(args: argparse.Namespace) -> None:
    print(network_stats(load_network(resolve_config(args))).summary())


def cmd_gen_env(args: argparse.Namespace) -> None:
    config = resolve_config(args)
    net = load_network(config)
    env = generate_environment(net, config.option_count, config.seed_env)
    out = write_config(config)
    save_snapshot(env, out / SNAPSHOT_NAME, config.seed_env, config.budget)
    print(network_stats(net).summary())
    print(f'Wrote {out / SNAPSHOT_NAME}')


def cmd_train(args: argparse.Namespace) -> None:
    config = resolve_config(args)
    snapshot = snapshot_path(args, config)
    config = budget_from_snapshot(args, config, snapshot)
    env, seed_env = load_snapshot(snapshot)
    config = replace(config, seed_env=seed_env, option_count=env.option_count)
    out = write_config(config)
    result = train(train_config(config), env)
    result.save_checkpoint(out / CHECKPOINT_NAME, seed_env=seed_env, seed_policy=config.seed_policy)
    result.log.to_csv(out / TRAIN_LOG_NAME, index=False)
    print(f'Best policy from episode {result.best_episode}: mean engaged {result.best_score:.2f} '
          f'of {env.node_count} users')
    print(f'Wrote {out / CHECKPOINT_NAME} and {out / TRAIN_LOG_NAME}')


def cmd_eval(args: argparse.Namespace) -> None:
    config = resolve_config(args)
    snapshot = snapshot_path(args, config)
    config = budget_from_snapshot(args, config, snapshot)
    env, seed_env = load_snapshot(snapshot)
    config = replace(config, seed_env=seed_env, option_count=env.option_count)
    out = write_config(config)
    if args.policy in (None, GACPolicy.name):
        if not args.checkpoint:
            raise ValueError(f'policy {GACPolicy.name} needs --checkpoint')
        name, metrics = GACPolicy.name, evaluate_checkpoint(args.checkpoint, env, config.eval_steps, config.budget)
    else:
        name, metrics = args.policy, evaluate(make_policy(args.policy), env, config.eval_steps, config.budget)
    path = out / f'eval_{name}.csv'
    metrics.to_csv(path, index=False)
    window = metrics['engaged'].tail(FINAL_WINDOW).mean()
    print(f'{name}: mean engaged over the last {min(FINAL_WINDOW, len(metrics))} steps {window:.2f} '
          f'of {env.node_count} users')
    print(f'Wrote {path}')


RolloutJob = Tuple[str, int, str, str | None, int, float]


def rollout(job: RolloutJob) -> RolloutResult:
    """One (policy, seed) evaluation; runs in a worker process when --jobs > 1."""
    policy_name, seed, snapshot, checkpoint, steps, budget = job
    env, snapshot_seed = load_snapshot(snapshot)
    if seed != snapshot_seed:
        env = reseed_environment(env, seed)
    if policy_name == GACPolicy.name:
        metrics = evaluate_checkpoint(checkpoint, env, steps, budget)
    else:
        metrics = evaluate(make_policy(policy_name), env, steps, budget)
    logger.info(f'{policy_name} seed {seed}: final engaged {metrics["engaged"].iloc[-1]}')
    return RolloutResult(policy=policy_name, seed=seed, metrics=metrics)


def comparison_jobs(args: argparse.Namespace, config: ExperimentConfig, snapshot: Path) -> List[RolloutJob]:
    policies = [p.strip() for p in args.policies.split(',') if p.strip()]
    if not policies:
        raise ValueError('compare needs at least one policy')
    seeds = [int(s) for s in args.seeds.split(',')] if args.seeds else [load_snapshot(snapshot)[1]]
    jobs = []
    for policy in policies:
        if policy != GACPolicy.name and policy not in BASELINES:
            raise ValueError(f'unknown policy {policy}')
        for seed in seeds:
            checkpoint = None
            if policy == GACPolicy.name:
                if not args.checkpoint:
                    raise ValueError(f'policy {policy} needs --checkpoint')
                checkpoint = args.checkpoint.replace('{seed}', str(seed))
                if not Path(checkpoint).exists():
                    raise ValueError(f'checkpoint for policy {policy} not found: {checkpoint}')
            jobs.append((policy, seed, str(snapshot), checkpoint, config.eval_steps, config.budget))
    return jobs


def cmd_compare(args: argparse.Namespace) -> None:
    config = resolve_config(args)
    snapshot = snapshot_path(args, config)
    config = budget_from_snapshot(args, config, snapshot)
    jobs = comparison_jobs(args, config, snapshot)
    out = write_config(config)
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            results = pool.map(rollout, jobs)
    else:
        results = [rollout(job) for job in jobs]
    analyzer = ComparisonAnalyzer()
    analyzer.add_results(results)
    for path in analyzer.export(out):
        print(f'Wrote {path}')
    for policy, engaged in analyzer.final_window_summary(FINAL_WINDOW).items():
        print(f'{policy}: mean engaged over the last {FINAL_WINDOW} steps {engaged:.2f}')


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='config.txt written by an earlier run')
    common.add_argument('--preset', type=str, default=None, choices=list(PRESETS),
                        help='dataset defaults (undirected flag, budget, subnetwork)')
    common.add_argument('--dataset', type=str, default=None, help='edge list or MatrixMarket file')
    common.add_argument('--undirected', action='store_true', default=None, help='edges count both ways')
    common.add_argument('--subnetwork', type=int, default=None, metavar='SIZE',
                        help='keep a breadth-first subnetwork of SIZE nodes')
    common.add_argument('--seed-node', dest='seed_node', type=int, default=None,
                        help='start node of --subnetwork (default 0)')
    common.add_argument('--option-count', dest='option_count', type=int, default=None,
                        help='number of behavior options (default 4)')
    common.add_argument('--budget', type=float, default=None, help='budget per step (default 3)')
    common.add_argument('--seed-env', dest='seed_env', type=int, default=None, help='environment seed')
    common.add_argument('--seed-policy', dest='seed_policy', type=int, default=None, help='training seed')
    common.add_argument('--out', type=str, default=None, help='output directory (default .)')
    common.add_argument('--snapshot', type=str, default=None, help=f'default: OUT/{SNAPSHOT_NAME}')
    common.add_argument('-v', '--verbose', action='count', default=0)

    parser = argparse.ArgumentParser(prog='incentivizer', description=__doc__.split('\n\n')[0].strip())
    parser.add_argument('--version', action='version',
                        version=f'incentivizer {__version__}   last modified: {__last_mod_date__}')
    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('stats', parents=[common], help='print dataset statistics').set_defaults(func=cmd_stats)
    commands.add_parser('gen-env', parents=[common], help='write an environment snapshot').set_defaults(
        func=cmd_gen_env)

    train_parser = commands.add_parser('train', parents=[common], help='train the graph actor-critic')
    train_parser.add_argument('--episodes', type=int, default=None, help='default 10000')
    train_parser.add_argument('--steps', type=int, default=None, help='steps per episode (default 10)')
    train_parser.add_argument('--exploration-episodes', dest='exploration_episodes', type=int, default=None,
                              help='pure-noise episodes (default 1000)')
    train_parser.add_argument('--batch-size', dest='batch_size', type=int, default=None, help='default 256')
    train_parser.add_argument('--noise', type=NoiseMode.parse, default=None,
                              help='adaptive (default) or static:MEAN:STD')
    train_parser.add_argument('--variant', type=Variant, default=None, choices=list(Variant))
    train_parser.add_argument('--eval-steps', dest='eval_steps', type=int, default=None)
    train_parser.add_argument('--gamma', type=float, default=None, help='discount factor (default 0.99)')
    train_parser.add_argument('--tau', type=float, default=None, help='soft update rate (default 0.001)')
    train_parser.add_argument('--lr-actor', dest='lr_actor', type=float, default=None, help='default 0.0003')
    train_parser.add_argument('--lr-critic', dest='lr_critic', type=float, default=None, help='default 0.003')
    train_parser.add_argument('--update-frequency', dest='update_frequency', type=int, default=None,
                              help='critic updates per actor update (default 2)')
    train_parser.add_argument('--buffer-capacity', dest='buffer_capacity', type=int, default=None,
                              help='replay buffer size (default 100000)')
    train_parser.set_defaults(func=cmd_train)

    eval_parser = commands.add_parser('eval', parents=[common], help='evaluate one policy')
    eval_parser.add_argument('--policy', type=str, default=None, choices=[GACPolicy.name, *BASELINES],
                             help=f'default {GACPolicy.name} (needs --checkpoint)')
    eval_parser.add_argument('--checkpoint', type=str, default=None)
    eval_parser.add_argument('--eval-steps', '--steps', dest='eval_steps', type=int, default=None,
                             help='rollout length (default 150)')
    eval_parser.set_defaults(func=cmd_eval)

    compare_parser = commands.add_parser('compare', parents=[common], help='compare policies over seeds')
    compare_parser.add_argument('--policies', type=str, default=f'{GACPolicy.name},uniform,none',
                                help='comma-separated policy names')
    compare_parser.add_argument('--seeds', type=str, default=None,
                                help='comma-separated environment seeds (default: the snapshot seed)')
    compare_parser.add_argument('--checkpoint', type=str, default=None,
                                help='gac checkpoint; {seed} is replaced by each seed')
    compare_parser.add_argument('--eval-steps', '--steps', dest='eval_steps', type=int, default=None,
                                help='rollout length (default 150)')
    compare_parser.add_argument('-j', '--jobs', type=int, default=1, help='parallel rollouts')
    compare_parser.set_defaults(func=cmd_compare)
    return parser


def main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        args.func(args)
    except (ValueError, OSError) as e:
        sys.stderr.write(f'Error: {e}\n')
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())

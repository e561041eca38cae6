from .simenv import IncentiveEnv, generate_environment
from .trainer import GACPolicy, TrainConfig, evaluate, train

__all__ = ['IncentiveEnv', 'generate_environment', 'GACPolicy', 'TrainConfig', 'evaluate', 'train']

"""Reinforcement-learned adaptive experimental design.

Subpackages: numkit (numpy nets with manual backprop), prob (seeded
sampling and squashed-Gaussian policies), kernels (likelihood hot loops,
compiled when available), envs (design problems as episodic environments),
policy (history-pooling design policies), bounds (contrastive information
bounds), agents (actor-critic training), harness (CLI and run orchestration).
"""

__version__ = "0.1.0"

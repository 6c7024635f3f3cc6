"""Cooperative-cooking coordination stack: gridworld, strategy VAE, clustered
strategy space, conditioned cooperator, and fixed-share online adaptation."""

__version__ = "0.1.0"

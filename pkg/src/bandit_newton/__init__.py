"""Bandit convex optimisation with an online-Newton learner on an extended loss."""

__version__ = "0.1.0"

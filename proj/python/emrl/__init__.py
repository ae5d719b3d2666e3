"""Episodic meta-reinforcement learning core (C++ extension)."""

from ._emrl import *  # noqa: F401,F403
from ._emrl import ConfigError, NonFiniteError, __doc__  # noqa: F401

"""Long-run average POMDPs: exact evaluation of finite-memory strategies,
super-support block strategies and an anytime two-sided value approximation."""

__version__ = "0.1.0"

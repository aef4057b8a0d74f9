"""ScalingLab: throughput scaling experiments for opportunistic relaying."""

__version__ = "1.0.0"

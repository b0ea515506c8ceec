"""SRPT queues in heavy traffic with light-tailed processing times."""

__version__ = "0.1.0"

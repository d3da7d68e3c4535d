"""Exact simulation of finite open quantum systems and divisibility checks."""

__version__ = "0.1.0"

"""Nano-sensor field simulation with Bayesian class inference on a dual PoW ledger."""

from __future__ import annotations

__version__ = "0.1.0"

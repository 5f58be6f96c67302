"""Throughput and delay bounds for two opposite flows over an 802.11 DCF chain, with and without XOR coding."""

from .analytic import UnstableError, analyze
from .model import (ChainScenario, PerformanceReport, PhyMacParams, Scheme, SimResult,
                    derived_times, validate)

__all__ = ["ChainScenario", "PerformanceReport", "PhyMacParams", "Scheme", "SimResult",
           "UnstableError", "analyze", "derived_times", "validate"]
__version__ = "0.1.0"

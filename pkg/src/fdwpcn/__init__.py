"""Uplink sum-rate maximisation for full-duplex wireless-powered networks."""
from .assign import Assignment, coordinate_assign, enumerate_assign
from .engine import Allocation, SolveReport, algorithm1, algorithm2, audit, sum_rate, ul_snr
from .scenario import ChannelRealization, ConfigError, DLBudget, Duplex, EHModel, SystemConfig, sample_realization

__all__ = [
    "Allocation", "Assignment", "ChannelRealization", "ConfigError", "DLBudget", "Duplex", "EHModel",
    "SolveReport", "SystemConfig", "algorithm1", "algorithm2", "audit", "coordinate_assign",
    "enumerate_assign", "sample_realization", "sum_rate", "ul_snr",
]

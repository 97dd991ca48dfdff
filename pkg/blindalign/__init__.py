"""
blindalign - Blind interference alignment for MIMO broadcast channels with reconfigurable antennas
"""

__version__ = "0.1.0"

from .params import AntennaConfig, ConfigError, IcConfig, derive, ic_derive, ic_sum_ldof, region_vertices, sum_ldof
from .precoder import TransmitPlan, build_ic_plan, build_plan
from .switching import SelectionSchedule, assemble_schedule, simulate
from .receiver import BlindAlignmentSimulator, SimulationResult

__all__ = [
    'AntennaConfig', 'IcConfig', 'ConfigError', 'derive', 'ic_derive', 'sum_ldof', 'ic_sum_ldof',
    'region_vertices', 'TransmitPlan', 'build_plan', 'build_ic_plan', 'SelectionSchedule',
    'assemble_schedule', 'simulate', 'BlindAlignmentSimulator', 'SimulationResult',
]

"""
Scatter Kirchhoff Data Models

Pydantic models for run-configuration validation.
"""

from scatter_kirchhoff.models.run_config import (
    LineSpec,
    ObstacleSpec,
    PlaneSpec,
    RunConfig,
    RunMode,
    TargetSpec,
    WaveSpec,
)

__all__ = [
    'LineSpec',
    'ObstacleSpec',
    'PlaneSpec',
    'RunConfig',
    'RunMode',
    'TargetSpec',
    'WaveSpec',
]

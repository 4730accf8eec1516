"""Hybrid beamforming and adaptive RF-chain activation for uplink cell-free mmWave MIMO."""

from .config import ConfigError, ScenarioConfig
from .channel import PathLossModel, draw_channels, generate_topology
from .combining import achievable_rate, chbf, schbf
from .power import PowerModel

__all__ = ["ConfigError", "ScenarioConfig", "PathLossModel", "draw_channels",
           "generate_topology", "achievable_rate", "chbf", "schbf", "PowerModel"]

"""Receiver power consumption per activation scheme and energy efficiency.

All powers are in mW. Each antenna needs an LNA, a 90-degree hybrid with
LO buffer and two mixers; each RF chain needs an ADC and Nr phase shifters;
each AP has one LO that stays on even when the AP is fully deactivated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerModel:
    p_lo: float = 22.5
    p_lna: float = 20.0
    p_ps: float = 30.0
    p_rf: float = 40.0
    p_adc: float = 200.0
    p_mixer: float = 0.3
    p_hybrid: float = 3.0
    p_switch: float = 5.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")

    def chain(self, Nr: int) -> float:
        """One RF chain with its ADC and Nr phase shifters."""
        return Nr * self.p_ps + self.p_rf + self.p_adc

    @property
    def front_end(self) -> float:
        """Per-antenna LNA, two mixers and hybrid/LO buffer."""
        return self.p_lna + 2 * self.p_mixer + self.p_hybrid


DEFAULT_POWER = PowerModel()


@dataclass(frozen=True)
class PowerReport:
    scheme: str
    total_mw: float
    rate: float
    ee: float
    active_ap_count: int


def power_fixed(L: int, n_per_ap: int, Nr: int, pm: PowerModel = DEFAULT_POWER) -> float:
    """Every AP runs ``n_per_ap`` chains and all antenna front ends."""
    if n_per_ap < 0:
        raise ValueError("n_per_ap must be non-negative")
    return L * pm.p_lo + L * n_per_ap * pm.chain(Nr) + L * Nr * pm.front_end


def aps_selected(L: int, nbar: int, N: int) -> int:
    """Number of APs switched on by AP selection (floor of L*nbar/N)."""
    return math.floor(L * nbar / N)


def power_aps(L: int, nbar: int, N: int, Nr: int, pm: PowerModel = DEFAULT_POWER) -> float:
    """L*nbar chains spread over L*nbar/N fully-on APs; every LO stays on.

    The AP count enters as the ratio L*nbar/N, so it is fractional when N
    does not divide L*nbar (the selection itself keeps the floor).
    """
    return L * pm.p_lo + L * nbar * pm.chain(Nr) + (L * nbar / N) * Nr * pm.front_end


def power_as(L: int, Nr: int, Nr_as: int, pm: PowerModel = DEFAULT_POWER) -> float:
    """Antenna selection: Nr switches per AP, a full digital chain per kept antenna."""
    if Nr_as > Nr:
        raise ValueError("Nr_as cannot exceed Nr")
    per_antenna = pm.p_rf + pm.p_adc + pm.front_end
    return L * pm.p_lo + L * Nr * pm.p_switch + L * Nr_as * per_antenna


def power_arfa(n_vec, Nr: int, pm: PowerModel = DEFAULT_POWER) -> float:
    """Adaptive activation: an AP with no active chain keeps only its LO on."""
    n = np.asarray(n_vec, dtype=int)
    active_aps = int(np.count_nonzero(n))
    return len(n) * pm.p_lo + int(n.sum()) * pm.chain(Nr) + Nr * pm.front_end * active_aps


def energy_efficiency(rate: float, power_mw: float) -> float:
    """Rate per watt (bits/s/Hz/W)."""
    if not power_mw > 0:
        raise ValueError("power must be positive")
    return rate / (power_mw / 1000.0)

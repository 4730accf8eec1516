"""Scenario parameters shared by every stage of a simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised when a scenario or plan violates its parameter bounds."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Network dimensions, radio parameters and Monte-Carlo settings.

    Defaults reproduce the large-scale setup used for the rate/EE sweeps:
    40 APs with 64 antennas and 8 RF chains each, 8 four-antenna UEs in a
    200 m square, 28 GHz carrier, 4-bit phase shifters.
    """

    D: float = 200.0
    L: int = 40
    K: int = 8
    Nr: int = 64
    Nt: int = 4
    N: int = 8
    nbar: int = 2
    P_paths: int = 3
    b: int = 4
    fc: float = 28e9
    B: float = 100e6
    NF: float = 9.0
    Gtx: float = 15.0
    Grx: float = 24.5
    rho_dbm_list: tuple[float, ...] = (10.0, 20.0, 30.0, 40.0, 50.0)
    trials: int = 20
    master_seed: int = 2021
    # antennas kept per AP by the antenna-selection baseline; None means Nr // 2
    Nr_as: int | None = None
    # ULA element spacing in wavelengths, shared by APs and UEs
    spacing: float = 0.5
    # beam-steering search grid over [-pi/2, pi/2]
    angle_grid: int = 1024
    # tabu search: None means 8 * L iterations, stall limit half of that
    ts_max_iter: int | None = None
    ts_max_stall: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho_dbm_list", tuple(float(r) for r in self.rho_dbm_list))
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.L >= 1, "L must be >= 1"),
            (self.K >= 1, "K must be >= 1"),
            (self.Nt >= 1, "Nt must be >= 1"),
            (1 <= self.N <= self.Nr, "need 1 <= N <= Nr"),
            (0 <= self.nbar <= self.N, "need 0 <= nbar <= N"),
            (self.P_paths >= 1, "P_paths must be >= 1"),
            (self.b >= 1, "b must be >= 1"),
            (self.D > 0, "D must be positive"),
            (self.fc > 0 and self.B > 0, "fc and B must be positive"),
            (1 <= self.n_as <= self.Nr, "need 1 <= Nr_as <= Nr"),
            (self.angle_grid >= 2, "angle_grid must be >= 2"),
            (self.trials >= 1, "trials must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for name in ("L", "K", "Nr", "Nt", "N", "nbar", "P_paths", "b", "trials"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ConfigError(f"{name} must be an integer")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc

    @property
    def Ga_db(self) -> float:
        return self.Gtx + self.Grx

    @property
    def noise_dbm(self) -> float:
        """Receiver noise power N0 in dBm over the full bandwidth."""
        return -174.0 + 10.0 * math.log10(self.B) + self.NF

    def gamma(self, rho_dbm: float) -> float:
        """Linear transmit SNR scale rho / N0."""
        return 10.0 ** ((rho_dbm - self.noise_dbm) / 10.0)

    @property
    def n_as(self) -> int:
        return self.Nr_as if self.Nr_as is not None else max(1, self.Nr // 2)

    @property
    def total_active(self) -> int:
        return self.L * self.nbar

    @property
    def max_iter(self) -> int:
        return self.ts_max_iter if self.ts_max_iter is not None else 8 * self.L

    @property
    def max_stall(self) -> int:
        return self.ts_max_stall if self.ts_max_stall is not None else self.max_iter // 2

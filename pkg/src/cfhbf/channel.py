"""Network drops, link states, path loss and clustered mmWave channels.

Every AP and UE carries a half-wavelength ULA by default. Channels follow
the geometric Saleh-Valenzuela form: a few discrete paths, each a complex
gain times a receive/transmit array-response outer product, scaled by the
large-scale gain of the link. Links in outage carry an all-zero matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

AOA_SPREAD = math.pi / 12
AOD_SPREAD = math.pi / 6


class LinkKind(enum.IntEnum):
    OUTAGE = 0
    LOS = 1
    NLOS = 2


@dataclass(frozen=True)
class PathLossModel:
    """Close-in reference distance path loss with outage/LOS/NLOS states.

    Distances are in metres, losses and shadowing spreads in dB.
    ``a_out_inv`` and ``a_los_inv`` are the reciprocal decay constants
    (1/a_out and 1/a_LOS).
    """

    d0: float = 1.0
    beta0_db: float = 20.0 * math.log10(4.0 * math.pi * 28e9 / 299_792_458.0)
    eps_los: float = 1.9
    eps_nlos: float = 4.1
    xi_los: float = 1.1
    xi_nlos: float = 7.6
    a_out_inv: float = 45.5
    b_out: float = 3.3
    a_los_inv: float = 37.0
    Ga_db: float = 39.5

    def __post_init__(self):
        if self.eps_los <= 0 or self.eps_nlos <= 0:
            raise ValueError("path-loss exponents must be positive")
        if self.xi_los < 0 or self.xi_nlos < 0:
            raise ValueError("shadowing spreads must be non-negative")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, **overrides) -> "PathLossModel":
        """Reference loss at ``d0`` derived from the carrier, antenna gain from Gtx + Grx."""
        d0 = overrides.pop("d0", 1.0)
        beta0 = 20.0 * math.log10(4.0 * math.pi * d0 / cfg.wavelength)
        return cls(d0=d0, beta0_db=beta0, Ga_db=cfg.Ga_db, **overrides)

    @property
    def Ga_lin(self) -> float:
        return 10.0 ** (self.Ga_db / 10.0)


@dataclass(frozen=True)
class Topology:
    ap_positions: np.ndarray  # (L, 2)
    ue_positions: np.ndarray  # (K, 2)

    @property
    def distances(self) -> np.ndarray:
        """UE-AP distances, shape (K, L)."""
        diff = self.ue_positions[:, None, :] - self.ap_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True)
class LinkState:
    state: LinkKind
    beta_linear: float | None
    shadow_db: float | None
    short: bool = False  # distance below d0; formula still applied


@dataclass(frozen=True)
class ChannelRealization:
    """All UE-AP channels of one drop.

    ``H[l]`` is the per-AP aggregate H_l (Nr x K*Nt); the block of columns
    ``k*Nt:(k+1)*Nt`` is H_kl. Per-link arrays are indexed ``[k, l]`` and
    per-path arrays ``[k, l, p]``. ``beta_db`` is NaN on outage links.
    """

    H: np.ndarray
    alphas: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    state: np.ndarray
    beta_db: np.ndarray
    shadow_db: np.ndarray
    distances: np.ndarray
    Nt: int

    @property
    def L(self) -> int:
        return self.H.shape[0]

    @property
    def Nr(self) -> int:
        return self.H.shape[1]

    @property
    def K(self) -> int:
        return self.H.shape[2] // self.Nt

    def H_kl(self, k: int, l: int) -> np.ndarray:
        return self.H[l][:, k * self.Nt:(k + 1) * self.Nt]

    @property
    def stacked(self) -> np.ndarray:
        """The global L*Nr x K*Nt channel with APs stacked vertically."""
        return self.H.reshape(self.L * self.Nr, -1)

    @property
    def beta_linear(self) -> np.ndarray:
        """Linear path loss per link, +inf on outage links."""
        out = np.full(self.beta_db.shape, np.inf)
        ok = self.state != LinkKind.OUTAGE
        out[ok] = 10.0 ** (self.beta_db[ok] / 10.0)
        return out

    @property
    def short_links(self) -> int:
        return int(np.count_nonzero(self.distances < 1.0))


def generate_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> Topology:
    aps = rng.uniform(0.0, cfg.D, size=(cfg.L, 2))
    ues = rng.uniform(0.0, cfg.D, size=(cfg.K, 2))
    return Topology(aps, ues)


def link_state_probabilities(d, plm: PathLossModel):
    """Outage, LOS and NLOS probabilities at distance ``d`` (scalar or array)."""
    d = np.asarray(d, dtype=float)
    p_out = np.maximum(0.0, 1.0 - np.exp(-d / plm.a_out_inv + plm.b_out))
    p_los = (1.0 - p_out) * np.exp(-d / plm.a_los_inv)
    p_nlos = 1.0 - p_out - p_los
    if d.ndim == 0:
        return float(p_out), float(p_los), float(p_nlos)
    return p_out, p_los, p_nlos


def path_loss_db(d, kind, plm: PathLossModel, shadow_db=0.0):
    """Path loss in dB for LOS/NLOS links; shadowing is added as given."""
    d = np.asarray(d, dtype=float)
    kind = np.asarray(kind)
    eps = np.where(kind == LinkKind.LOS, plm.eps_los, plm.eps_nlos)
    with np.errstate(divide="ignore"):
        return plm.beta0_db + 10.0 * eps * np.log10(d / plm.d0) + shadow_db


def draw_link_states(d: np.ndarray, plm: PathLossModel, rng: np.random.Generator):
    """Vectorized link-state draw.

    Returns ``(state, beta_db, shadow_db)`` arrays shaped like ``d``. One
    uniform and one standard normal are consumed per link whatever its
    state, so the stream position never depends on the outcome.
    """
    d = np.asarray(d, dtype=float)
    u = rng.random(d.shape)
    z = rng.standard_normal(d.shape)
    p_out, p_los, _ = link_state_probabilities(d, plm)
    state = np.where(u < p_out, LinkKind.OUTAGE,
                     np.where(u < p_out + p_los, LinkKind.LOS, LinkKind.NLOS)).astype(np.int8)
    xi = np.where(state == LinkKind.LOS, plm.xi_los, plm.xi_nlos)
    shadow = np.where(state == LinkKind.OUTAGE, np.nan, xi * z)
    beta_db = np.where(state == LinkKind.OUTAGE, np.nan,
                       path_loss_db(d, state, plm, np.nan_to_num(shadow)))
    return state, beta_db, shadow


def draw_link_state(d: float, plm: PathLossModel, rng: np.random.Generator) -> LinkState:
    state, beta_db, shadow = draw_link_states(np.array([d]), plm, rng)
    kind = LinkKind(int(state[0]))
    short = d < plm.d0
    if kind == LinkKind.OUTAGE:
        return LinkState(kind, None, None, short)
    return LinkState(kind, float(10.0 ** (beta_db[0] / 10.0)), float(shadow[0]), short)


def array_response(angle, n_elems: int, spacing: float = 0.5) -> np.ndarray:
    """Normalized ULA response; a vector for a scalar angle, else (n_elems, len(angle))."""
    angle = np.asarray(angle, dtype=float)
    idx = np.arange(n_elems)
    phase = 2.0 * np.pi * spacing * np.multiply.outer(idx, np.sin(angle))
    return np.exp(1j * phase) / math.sqrt(n_elems)


def link_channel(alphas, aoa, aod, Nr, Nt, scale, spacing=0.5) -> np.ndarray:
    """Sum of path outer products, each ``alpha * a_r(aoa) a_t(aod)^H``, times ``scale``."""
    ar = array_response(np.atleast_1d(aoa), Nr, spacing)
    at = array_response(np.atleast_1d(aod), Nt, spacing)
    return scale * (ar * np.atleast_1d(alphas)) @ at.conj().T


def draw_channels(cfg: ScenarioConfig, topology: Topology, plm: PathLossModel,
                  rng: np.random.Generator) -> ChannelRealization:
    """Draw link states and small-scale paths for every UE-AP pair.

    Random draws happen in a fixed order (link states, shadowing, path
    gains, AoAs, AoDs) for all links at once, so the result is a pure
    function of the inputs and the generator state.
    """
    K, L, P = cfg.K, cfg.L, cfg.P_paths
    Nr, Nt = cfg.Nr, cfg.Nt
    d = topology.distances
    state, beta_db, shadow = draw_link_states(d, plm, rng)
    alphas = (rng.standard_normal((K, L, P)) + 1j * rng.standard_normal((K, L, P))) / math.sqrt(2.0)
    aoa = rng.uniform(-AOA_SPREAD, AOA_SPREAD, size=(K, L, P))
    aod = rng.uniform(-AOD_SPREAD, AOD_SPREAD, size=(K, L, P))

    ar = array_response(aoa, Nr, cfg.spacing)  # (Nr, K, L, P)
    at = array_response(aod, Nt, cfg.spacing)  # (Nt, K, L, P)
    with np.errstate(over="ignore"):
        gain = np.where(state == LinkKind.OUTAGE, 0.0,
                        np.sqrt(plm.Ga_lin / 10.0 ** (np.nan_to_num(beta_db) / 10.0) * Nr * Nt / P))
    # H[l, :, k*Nt + t] = gain[k,l] * sum_p alpha[k,l,p] ar[:,k,l,p] conj(at[t,k,l,p])
    Hk = np.einsum("klp,rklp,tklp->lrkt", alphas, ar, at.conj())
    Hk *= gain.T[:, None, :, None]
    H = Hk.reshape(L, Nr, K * Nt)
    return ChannelRealization(H=H, alphas=alphas, aoa=aoa, aod=aod, state=state,
                              beta_db=beta_db, shadow_db=shadow, distances=d, Nt=Nt)

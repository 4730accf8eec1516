"""Seeded Monte-Carlo batches over schemes and a sweep variable.

Every trial draws one topology and one channel realization and runs all
requested schemes on it, so scheme comparisons are paired. A trial's seed
is a 64-bit value derived from ``(master_seed, sweep index, trial index)``
through :class:`numpy.random.SeedSequence`; any row can be regenerated on
its own with :func:`run_trial`. Records are sorted by (sweep, trial,
scheme) before they are written, so the output bytes do not depend on the
number of worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .arfa import (ap_singular_values, aps_activation, exhaustive_arfa, fs_carfa, pl_activation,
                   sv_activation, ts_carfa, uniform_activation)
from .channel import ChannelRealization, PathLossModel, draw_channels, generate_topology
from .combining import (CHBFKernel, achievable_rate, antenna_selection, beam_steering,
                        chbf, schbf)
from .config import ConfigError, ScenarioConfig
from .power import (DEFAULT_POWER, PowerModel, energy_efficiency, power_aps, power_arfa,
                    power_as, power_fixed)

log = logging.getLogger(__name__)

SCHEMES = (
    "chbf-fixed-N", "chbf-fixed-nbar", "schbf", "beam-steering", "ts-carfa", "fs-carfa",
    "sv-scarfa", "pl-scarfa", "aps", "as", "exhaustive",
)
SWEEP_VARS = ("rho", "L", "nbar")
FORMATS = ("csv", "json")
REFERENCE_SCHEME = "chbf-fixed-N"

# Fronthaul load per AP in real units (a complex value counts twice).
# Each entry gives symbolic (complex, real) counts for uplink and downlink.
_FRONTHAUL = {
    "chbf-fixed-N": (("Nr*K*Nt", ""), ("", "Nr*N")),
    "chbf-fixed-nbar": (("Nr*K*Nt", ""), ("", "Nr*nbar")),
    "ts-carfa": (("Nr*K*Nt", ""), ("", "Nr*nbar")),
    "fs-carfa": (("Nr*K*Nt", ""), ("", "Nr*nbar")),
    "exhaustive": (("Nr*K*Nt", ""), ("", "Nr*nbar")),
    "aps": (("Nr*K*Nt", ""), ("", "Nr*N")),
    "schbf": (("N*K*Nt", ""), ("", "")),
    "beam-steering": (("N*K*Nt", ""), ("", "")),
    "sv-scarfa": (("nbar*K*Nt", "N"), ("", "1")),
    "pl-scarfa": (("nbar*K*Nt", ""), ("", "1")),
    "as": (("Nr_as*K*Nt", ""), ("", "")),
}


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run: scenario, schemes, one sweep axis and where to write.

    ``rho_dbm`` is the transmit power used when the sweep is over L or nbar.
    """

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    schemes: tuple[str, ...] = SCHEMES[:-1]
    sweep_var: str = "rho"
    sweep_values: tuple[float, ...] = ()
    rho_dbm: float = 50.0
    out: str | None = None
    fmt: str = "csv"
    pathloss: dict = field(default_factory=dict)
    power: PowerModel = DEFAULT_POWER

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        values = self.sweep_values
        if not values and self.sweep_var == "rho":
            values = self.scenario.rho_dbm_list
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in values))
        self.validate()

    def validate(self) -> None:
        if not self.schemes:
            raise ConfigError("scheme list is empty")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ConfigError(f"unknown scheme(s): {', '.join(unknown)}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("duplicate schemes")
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARS}")
        if not self.sweep_values:
            raise ConfigError("sweep has no values")
        if self.fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        for v in self.sweep_values:
            if not math.isfinite(v):
                raise ConfigError("sweep values must be finite")
            self.scenario_at(v)
        try:
            self.plm_for(self.scenario)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"path-loss settings: {exc}") from exc

    def scenario_at(self, value: float) -> ScenarioConfig:
        if self.sweep_var == "rho":
            return self.scenario
        if value != int(value):
            raise ConfigError(f"{self.sweep_var} sweep values must be integers")
        return dataclasses.replace(self.scenario, **{self.sweep_var: int(value)})

    def rho_at(self, value: float) -> float:
        return value if self.sweep_var == "rho" else self.rho_dbm

    def plm_for(self, cfg: ScenarioConfig) -> PathLossModel:
        return PathLossModel.from_config(cfg, **self.pathloss)


@dataclass(frozen=True)
class MetricsRecord:
    scheme: str
    sweep_value: float
    trial: int
    rate: float
    power_mw: float
    ee: float
    candidates_examined: int
    fronthaul_up: float
    fronthaul_down: float
    fronthaul_up_nominal: float
    fronthaul_down_nominal: float
    active_ap_count: int
    seed: int

    def sort_key(self, schemes: Sequence[str]):
        return (self.sweep_value, self.trial, schemes.index(self.scheme))


FIELDS = tuple(f.name for f in dataclasses.fields(MetricsRecord))


def trial_seed(master_seed: int, sweep_index: int, trial: int) -> int:
    """64-bit seed mixed from the master seed and the row coordinates."""
    ss = np.random.SeedSequence([int(master_seed), int(sweep_index), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _eval_terms(expr: str, values: dict) -> float:
    total = 0.0
    for term in filter(None, expr.split("+")):
        prod = 1.0
        for factor in term.split("*"):
            prod *= float(factor) if factor.isdigit() else values[factor]
        total += prod
    return total


def fronthaul_symbols(scheme: str) -> tuple[tuple[str, str], tuple[str, str]]:
    """Symbolic ((complex, real) uplink, (complex, real) downlink) counts."""
    if scheme not in _FRONTHAUL:
        raise ValueError(f"unknown scheme {scheme!r}")
    return _FRONTHAUL[scheme]


def fronthaul_load(scheme: str, cfg: ScenarioConfig, nbar: float | None = None) -> tuple[float, float]:
    """Per-AP (uplink, downlink) fronthaul load in real units.

    ``nbar`` replaces the nominal average chain count, e.g. by the realized
    mean of an activation vector.
    """
    (up_c, up_r), (down_c, down_r) = fronthaul_symbols(scheme)
    values = dict(Nr=cfg.Nr, K=cfg.K, Nt=cfg.Nt, N=cfg.N, Nr_as=cfg.n_as,
                  nbar=cfg.nbar if nbar is None else nbar)
    up = 2 * _eval_terms(up_c, values) + _eval_terms(up_r, values)
    down = 2 * _eval_terms(down_c, values) + _eval_terms(down_r, values)
    return up, down


@dataclass
class _Outcome:
    rate: float
    power_mw: float
    candidates: int = 0
    active: int = 0
    nbar: float | None = None
    n: np.ndarray | None = None
    history: list | None = None


@dataclass(frozen=True)
class TrialDetail:
    """Per-scheme internals of one trial, kept for inline invariant checks."""

    scheme: str
    sweep_value: float
    trial: int
    rate: float
    n: tuple[int, ...] | None
    rate_history: tuple[float, ...] | None


def _run_scheme(scheme: str, cfg: ScenarioConfig, ch: ChannelRealization, gamma: float,
                kernel: CHBFKernel, pm: PowerModel) -> _Outcome:
    L, N, Nr = cfg.L, cfg.N, cfg.Nr

    def arfa(n, rate, candidates=0, history=None):
        n = np.asarray(n)
        return _Outcome(rate, power_arfa(n, Nr, pm), candidates, int(np.count_nonzero(n)),
                        float(n.mean()), n, history)

    if scheme == "chbf-fixed-N":
        _, rb = chbf(ch, np.full(L, N), gamma, kernel=kernel)
        return _Outcome(rb.total_rate, power_fixed(L, N, Nr, pm), active=L)
    if scheme == "chbf-fixed-nbar":
        _, rb = chbf(ch, uniform_activation(cfg), gamma, kernel=kernel)
        return _Outcome(rb.total_rate, power_fixed(L, cfg.nbar, Nr, pm), active=L if cfg.nbar else 0)
    if scheme == "schbf":
        rate = achievable_rate(schbf(ch, np.full(L, N), kernel=kernel), ch, gamma)
        return _Outcome(rate, power_fixed(L, N, Nr, pm), active=L)
    if scheme == "beam-steering":
        comb = beam_steering(ch, np.full(L, N), cfg.angle_grid, kernel.cb, cfg.spacing, kernel=kernel)
        return _Outcome(achievable_rate(comb, ch, gamma), power_fixed(L, N, Nr, pm), active=L)
    if scheme == "ts-carfa":
        _, n, trace = ts_carfa(ch, cfg, gamma)
        return arfa(n, trace.best_rate, trace.candidates_examined, trace.rate_history)
    if scheme == "fs-carfa":
        _, n, trace = fs_carfa(ch, cfg, gamma)
        return arfa(n, trace.best_rate, trace.candidates_examined, trace.rate_history)
    if scheme == "exhaustive":
        _, n, trace = exhaustive_arfa(ch, cfg, gamma)
        return arfa(n, trace.best_rate, trace.candidates_examined, trace.rate_history)
    if scheme == "sv-scarfa":
        n = sv_activation(ap_singular_values(ch, N), cfg.nbar)
        return arfa(n, achievable_rate(schbf(ch, n, kernel=kernel), ch, gamma))
    if scheme == "pl-scarfa":
        n = pl_activation(ch.beta_linear, L, N, cfg.nbar)
        return arfa(n, achievable_rate(schbf(ch, n, kernel=kernel), ch, gamma))
    if scheme == "aps":
        n = aps_activation(ch, cfg)
        _, rb = chbf(ch, n, gamma, kernel=kernel)
        return _Outcome(rb.total_rate, power_aps(L, cfg.nbar, N, Nr, pm), active=int(np.count_nonzero(n)))
    if scheme == "as":
        _, rate = antenna_selection(ch, cfg.n_as, gamma)
        return _Outcome(rate, power_as(L, Nr, cfg.n_as, pm), active=L)
    raise ValueError(f"unknown scheme {scheme!r}")


def run_trial(plan: ExperimentPlan, sweep_index: int, trial: int, details: bool = False):
    """All schemes of one (sweep value, trial) cell on a shared channel draw.

    Returns the records, or ``(records, details)`` when ``details`` is set.
    """
    value = plan.sweep_values[sweep_index]
    cfg = plan.scenario_at(value)
    seed = trial_seed(cfg.master_seed, sweep_index, trial)
    rng = np.random.default_rng(seed)
    ch = draw_channels(cfg, generate_topology(cfg, rng), plan.plm_for(cfg), rng)
    gamma = cfg.gamma(plan.rho_at(value))
    kernel = CHBFKernel(ch, gamma, cfg.b)
    rows, extra = [], []
    for scheme in plan.schemes:
        out = _run_scheme(scheme, cfg, ch, gamma, kernel, plan.power)
        extra.append(TrialDetail(
            scheme, value, trial, float(out.rate),
            None if out.n is None else tuple(int(v) for v in out.n),
            None if out.history is None else tuple(float(r) for r in out.history)))
        up, down = fronthaul_load(scheme, cfg, out.nbar)
        up_nom, down_nom = fronthaul_load(scheme, cfg)
        rows.append(MetricsRecord(
            scheme=scheme, sweep_value=value, trial=trial, rate=float(out.rate),
            power_mw=float(out.power_mw), ee=energy_efficiency(out.rate, out.power_mw),
            candidates_examined=int(out.candidates), fronthaul_up=up, fronthaul_down=down,
            fronthaul_up_nominal=up_nom, fronthaul_down_nominal=down_nom,
            active_ap_count=int(out.active), seed=seed))
    return (rows, extra) if details else rows


def _run_cell(args):
    plan, sweep_index, trial = args
    return run_trial(plan, sweep_index, trial, details=True)


def run_plan(plan: ExperimentPlan, workers: int = 1, details: bool = False):
    """Run every (sweep value, trial) cell; rows come back sorted.

    With ``details`` the per-scheme :class:`TrialDetail` list is returned too.
    """
    cells = [(plan, i, t) for i in range(len(plan.sweep_values))
             for t in range(plan.scenario_at(plan.sweep_values[i]).trials)]
    records: list[MetricsRecord] = []
    extra: list[TrialDetail] = []

    def collect(j, result):
        records.extend(result[0])
        extra.extend(result[1])
        log.info("cell %d/%d done", j + 1, len(cells))

    if workers <= 1:
        for j, cell in enumerate(cells):
            collect(j, _run_cell(cell))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for j, result in enumerate(pool.map(_run_cell, cells)):
                collect(j, result)
    records.sort(key=lambda r: r.sort_key(plan.schemes))
    if details:
        extra.sort(key=lambda d: (d.sweep_value, d.trial, plan.schemes.index(d.scheme)))
        return records, extra
    return records


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


SUMMARY_METRICS = ("rate", "power_mw", "ee", "candidates_examined")


def summarize(records: Iterable[MetricsRecord]) -> list[dict]:
    """Mean and standard error per (scheme, sweep value), plus comparisons.

    ``loss_pct`` is the relative drop of the mean rate and ``ee_gain_pct``
    the relative increase of the mean EE, both against fixed-N C-HBF in
    the same sweep cell (NaN when it was not run). ``fs_over_ts`` is the
    ratio of mean candidate counts of the two searches and
    ``fs_candidate_reduction_pct`` the corresponding saving.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    groups: dict[tuple[str, float], list[MetricsRecord]] = defaultdict(list)
    order: list[str] = []
    for r in records:
        groups[(r.scheme, r.sweep_value)].append(r)
        if r.scheme not in order:
            order.append(r.scheme)
    rows = {}
    for key, rs in groups.items():
        row = {"scheme": key[0], "sweep_value": key[1], "trials": len(rs)}
        for m in SUMMARY_METRICS:
            row[f"{m}_mean"], row[f"{m}_stderr"] = _mean_stderr(np.array([getattr(r, m) for r in rs], float))
        rows[key] = row
    for (scheme, value), row in rows.items():
        ref = rows.get((REFERENCE_SCHEME, value))
        if ref is None:
            row["loss_pct"] = row["ee_gain_pct"] = math.nan
        else:
            row["loss_pct"] = 100.0 * (1.0 - row["rate_mean"] / ref["rate_mean"])
            row["ee_gain_pct"] = 100.0 * (row["ee_mean"] / ref["ee_mean"] - 1.0)
        ts, fs = rows.get(("ts-carfa", value)), rows.get(("fs-carfa", value))
        ratio = fs["candidates_examined_mean"] / ts["candidates_examined_mean"] if ts and fs else math.nan
        row["fs_over_ts"] = ratio
        row["fs_candidate_reduction_pct"] = 100.0 * (1.0 - ratio)
    return sorted(rows.values(), key=lambda r: (r["sweep_value"], order.index(r["scheme"])))


def records_to_csv(records: Sequence[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in records:
        w.writerow([repr(v) if isinstance(v, float) else v for v in dataclasses.astuple(r)])
    return buf.getvalue()


def records_to_json(records: Sequence[MetricsRecord]) -> str:
    return json.dumps([dataclasses.asdict(r) for r in records], indent=1) + "\n"


def write_records(records: Sequence[MetricsRecord], path: str | Path | None, fmt: str = "csv") -> str:
    """Serialize records; write to ``path`` when given. Returns the text."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    text = records_to_csv(records) if fmt == "csv" else records_to_json(records)
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def read_csv(path: str | Path) -> list[MetricsRecord]:
    types = {f.name: f.type for f in dataclasses.fields(MetricsRecord)}
    conv = {"int": int, "float": float, "str": str}
    with open(path, encoding="utf-8", newline="") as fh:
        return [MetricsRecord(**{k: conv[types[k]](v) for k, v in row.items()})
                for row in csv.DictReader(fh)]

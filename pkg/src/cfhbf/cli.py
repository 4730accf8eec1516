"""``simulate`` command: YAML config plus flag overrides, CSV/JSON rows out.

Config files have up to four sections, all optional::

    scenario:  ScenarioConfig fields (L, K, Nr, ..., trials, master_seed)
    pathloss:  PathLossModel overrides (eps_los, xi_nlos, ...)
    power:     PowerModel fields in mW (p_lo, p_adc, ...)
    plan:      schemes (list), sweep ("rho=10:10:50"), rho_dbm, out, format, workers

Unknown keys are rejected. Exit status is 0 on success, 1 for a bad
configuration and 2 when the run itself fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np
import yaml

from .channel import PathLossModel
from .config import ConfigError, ScenarioConfig
from .experiments import SCHEMES, ExperimentPlan, run_plan, write_records
from .power import PowerModel

PLAN_KEYS = ("schemes", "sweep", "rho_dbm", "out", "format", "workers")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _check_keys(section: str, data: dict, allowed) -> None:
    extra = set(data) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(sorted(extra))}")


def parse_sweep(text: str) -> tuple[str, tuple[float, ...]]:
    """``var=start:step:stop`` (inclusive) or ``var=v1,v2,...``."""
    var, sep, spec = text.partition("=")
    if not sep or not spec:
        raise ConfigError(f"bad sweep {text!r}; expected var=start:step:stop or var=a,b,c")
    try:
        if ":" in spec:
            start, step, stop = (float(x) for x in spec.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"bad sweep range {spec!r}")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = tuple(float(start + i * step) for i in range(count))
        else:
            values = tuple(float(x) for x in spec.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {spec!r}") from exc
    return var.strip(), values


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("top level", data, ("scenario", "pathloss", "power", "plan"))
    for name in data:
        if not isinstance(data[name] or {}, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
    return {k: dict(v or {}) for k, v in data.items()}


def build_plan(raw: dict, args: argparse.Namespace) -> tuple[ExperimentPlan, int]:
    scen = raw.get("scenario", {})
    plm = raw.get("pathloss", {})
    pw = raw.get("power", {})
    pl = raw.get("plan", {})
    _check_keys("scenario", scen, _fields(ScenarioConfig))
    _check_keys("pathloss", plm, _fields(PathLossModel) - {"Ga_db", "beta0_db"})
    _check_keys("power", pw, _fields(PowerModel))
    _check_keys("plan", pl, PLAN_KEYS)
    if args.trials is not None:
        scen["trials"] = args.trials
    if args.seed is not None:
        scen["master_seed"] = args.seed
    try:
        scenario = ScenarioConfig(**scen)
        power = PowerModel(**pw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    schemes = pl.get("schemes", list(SCHEMES[:-1]))
    if args.scheme:
        schemes = [s.strip() for s in args.scheme.split(",") if s.strip()]
    if isinstance(schemes, str):
        schemes = [s.strip() for s in schemes.split(",")]
    sweep = args.sweep or pl.get("sweep")
    var, values = parse_sweep(sweep) if sweep else ("rho", ())
    workers = args.workers if args.workers is not None else int(pl.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    plan = ExperimentPlan(
        scenario=scenario, schemes=tuple(schemes), sweep_var=var, sweep_values=values,
        rho_dbm=float(pl.get("rho_dbm", 50.0)), out=args.out or pl.get("out"),
        fmt=args.format or pl.get("format", "csv"), pathloss=plm, power=power)
    return plan, workers


def resolved_config(plan: ExperimentPlan) -> dict:
    cfg = plan.scenario
    plm = plan.plm_for(cfg)
    return {
        "scenario": dataclasses.asdict(cfg) | {
            "wavelength_m": cfg.wavelength, "Ga_db": cfg.Ga_db, "noise_dbm": cfg.noise_dbm,
            "Nr_as_resolved": cfg.n_as, "ts_max_iter_resolved": cfg.max_iter,
            "ts_max_stall_resolved": cfg.max_stall},
        "pathloss": dataclasses.asdict(plm),
        "power": dataclasses.asdict(plan.power),
        "plan": {"schemes": list(plan.schemes), "sweep_var": plan.sweep_var,
                 "sweep_values": list(plan.sweep_values), "rho_dbm": plan.rho_dbm,
                 "out": plan.out, "format": plan.fmt},
    }


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="simulate", description="Monte-Carlo rate/EE sweeps for cell-free hybrid beamforming.")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--scheme", help=f"comma-separated subset of: {', '.join(SCHEMES)}")
    p.add_argument("--sweep", help="var=start:step:stop or var=a,b,c with var in rho, L, nbar")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int, help="worker processes (output does not depend on it)")
    p.add_argument("--echo-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        plan, workers = build_plan(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if args.echo_config:
        print(json.dumps(resolved_config(plan), indent=2))
        return 0
    try:
        records = run_plan(plan, workers=workers)
        text = write_records(records, plan.out, plan.fmt)
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if plan.out is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Configuration ingestion, scan orchestration and result emission.

Runs are driven by a single YAML file with nested sections and explicit
units in the key names; every default is filled in eagerly and echoed into
the provenance sidecar so output files are self-describing. Subcommands:

    simulate run --config cfg.yaml [--workers N] [--mode ...] [--out path]
    simulate validate --config cfg.yaml
    simulate pathways dump
    simulate oracle [--benchmark three-level]

The environment variable SIM_LOG (error|warn|info|debug) controls logging.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import crosscheck
from .biphoton import (BiphotonAmplitude, CrystalSpec, FrequencyGrid, GridAxis,
                       PumpSpec, build_jsa, default_grid)
from .model import ExcitonSystem, Level, LiouvilleOperatorSet
from .pathways import HomSpec, format_term_table
from .signal import (QuadratureSpec, default_quadrature, reference_time, scan,
                     system_hash)

log = logging.getLogger("homspec")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


class ConfigError(ValueError):
    """Validation failure carrying the offending field's path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(mapping: Dict[str, Any], key: str, path: str) -> Any:
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"{path}.{key}", "required field is missing")
    return mapping[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _complex_entry(value: Any, path: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_number(value[0], path), _number(value[1], path))
    raise ConfigError(path, f"expected number or [re, im] pair, got {value!r}")


def _axis(value: Any, path: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.array([float(value)])
    if isinstance(value, list):
        return np.array([_number(v, path) for v in value])
    if isinstance(value, dict):
        start = _number(_require(value, "start", path), f"{path}.start")
        stop = _number(_require(value, "stop", path), f"{path}.stop")
        if "num" in value:
            num = value["num"]
            if not isinstance(num, int) or num < 1:
                raise ConfigError(f"{path}.num", "expected a positive integer")
            return np.linspace(start, stop, num)
        if "step" in value:
            step = _number(value["step"], f"{path}.step")
            if step <= 0:
                raise ConfigError(f"{path}.step", "step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return start + step * np.arange(n)
        raise ConfigError(path, "axis range needs 'num' or 'step'")
    raise ConfigError(path, f"expected number, list or range mapping, got {value!r}")


@dataclass
class RunConfig:
    """Fully resolved run settings (defaults already applied)."""

    system: ExcitonSystem
    pump: Optional[PumpSpec]
    crystal: Optional[CrystalSpec]
    theta: float
    delay_arm: str
    hom_t: float
    hom_r: float
    bs_removed: bool
    tau_axis: np.ndarray
    T_axis: np.ndarray
    s_axis: np.ndarray
    grid_n: int
    grid_half_span: Optional[float]
    quad_step: Optional[float]
    quad_cutoff: Optional[float]
    quad_rule: str
    t_ref: Optional[float]
    t_ref_offset: float
    mode: str
    output: str
    workers: Optional[int]
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)


def _parse_system(data: Dict[str, Any]) -> ExcitonSystem:
    sec = _require(data, "system", "config")
    levels_raw = _require(sec, "levels", "system")
    if not isinstance(levels_raw, list) or not levels_raw:
        raise ConfigError("system.levels", "expected a non-empty list")
    levels = []
    for k, item in enumerate(levels_raw):
        path = f"system.levels[{k}]"
        label = str(_require(item, "label", path))
        manifold = str(_require(item, "manifold", path))
        energy = _number(_require(item, "energy_rad_per_fs", path),
                         f"{path}.energy_rad_per_fs")
        levels.append(Level(label, manifold, energy))
    n_g = sum(1 for lv in levels if lv.manifold == "g")
    n_e = sum(1 for lv in levels if lv.manifold == "e")
    n_f = sum(1 for lv in levels if lv.manifold == "f")

    def matrix(key, rows, cols, required):
        if key not in sec:
            if required:
                raise ConfigError(f"system.{key}", "required field is missing")
            return None
        raw = sec[key]
        if (not isinstance(raw, list) or len(raw) != rows
                or any(not isinstance(r, list) or len(r) != cols for r in raw)):
            raise ConfigError(f"system.{key}",
                              f"expected a {rows}x{cols} matrix of entries")
        return np.array([[_complex_entry(v, f"system.{key}[{i}][{j}]")
                          for j, v in enumerate(row)]
                         for i, row in enumerate(raw)])

    dip_ge = matrix("dipoles_ge", n_e, n_g, required=True)
    dip_ef = matrix("dipoles_ef", n_f, n_e, required=n_f > 0)

    deph = sec.get("dephasing", {})
    default = _number(deph.get("default_per_fs", 0.0), "system.dephasing.default_per_fs")
    if default < 0:
        raise ConfigError("system.dephasing.default_per_fs", "rate must be >= 0")
    pairs = {}
    for k, item in enumerate(deph.get("pairs", []) or []):
        path = f"system.dephasing.pairs[{k}]"
        rate = _number(_require(item, "rate_per_fs", path), f"{path}.rate_per_fs")
        if rate < 0:
            raise ConfigError(f"{path}.rate_per_fs", "rate must be >= 0")
        pairs[(str(_require(item, "i", path)), str(_require(item, "j", path)))] = rate
    try:
        return ExcitonSystem(levels=levels, dipoles_ge=dip_ge, dipoles_ef=dip_ef,
                             dephasing_default=default, dephasing_pairs=pairs,
                             initial_label=sec.get("initial_level"))
    except (ValueError, KeyError) as exc:
        raise ConfigError("system", str(exc)) from exc


def load_config(path: str) -> RunConfig:
    """Parse and eagerly validate a run configuration file."""
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not parseable YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")

    system = _parse_system(data)
    mode = str(data.get("mode", "full"))
    if mode not in ("full", "short_Te", "bs_removed"):
        raise ConfigError("mode", f"must be full, short_Te or bs_removed, got {mode!r}")

    pump = crystal = None
    if mode != "short_Te":
        psec = _require(data, "pump", "config")
        try:
            pump = PumpSpec(
                omega_p=_number(_require(psec, "omega_p_rad_per_fs", "pump"),
                                "pump.omega_p_rad_per_fs"),
                sigma_p=_number(_require(psec, "sigma_p_rad_per_fs", "pump"),
                                "pump.sigma_p_rad_per_fs"),
            )
        except ValueError as exc:
            raise ConfigError("pump", str(exc)) from exc
        csec = _require(data, "crystal", "config")
        try:
            crystal = CrystalSpec(
                omega_a=_number(_require(csec, "omega_a_rad_per_fs", "crystal"),
                                "crystal.omega_a_rad_per_fs"),
                omega_b=_number(_require(csec, "omega_b_rad_per_fs", "crystal"),
                                "crystal.omega_b_rad_per_fs"),
                T_a=_number(_require(csec, "T_a_fs", "crystal"), "crystal.T_a_fs"),
                T_b=_number(_require(csec, "T_b_fs", "crystal"), "crystal.T_b_fs"),
            )
        except ValueError as exc:
            raise ConfigError("crystal", str(exc)) from exc

    prep = data.get("preparation", {})
    theta = _number(prep.get("theta_rad", 0.0), "preparation.theta_rad")
    delay_arm = str(prep.get("delay_arm", "a"))
    if delay_arm not in ("a", "b"):
        raise ConfigError("preparation.delay_arm", f"must be 'a' or 'b', got {delay_arm!r}")

    hom = data.get("hom", {})
    hom_t = _number(hom.get("t_coeff", 1.0 / np.sqrt(2.0)), "hom.t_coeff")
    hom_r = _number(hom.get("r_coeff", 1.0 / np.sqrt(2.0)), "hom.r_coeff")
    if abs(hom_t ** 2 + hom_r ** 2 - 1.0) > 1e-12:
        raise ConfigError("hom", "t_coeff^2 + r_coeff^2 must equal 1")
    bs_removed = bool(hom.get("bs_removed", False)) or mode == "bs_removed"

    ssec = _require(data, "scan", "config")
    tau_axis = _axis(_require(ssec, "tau_fs", "scan"), "scan.tau_fs")
    T_axis = _axis(_require(ssec, "T_fs", "scan"), "scan.T_fs")
    s_axis = _axis(_require(ssec, "s_fs", "scan"), "scan.s_fs")
    for name, ax in (("tau_fs", tau_axis), ("T_fs", T_axis), ("s_fs", s_axis)):
        if ax.size == 0:
            raise ConfigError(f"scan.{name}", "axis must be non-empty")
        if ax.size > 1 and not np.all(np.diff(ax) > 0):
            raise ConfigError(f"scan.{name}", "axis must be strictly increasing")

    gsec = data.get("grid", {})
    grid_n = gsec.get("n", 256)
    if not isinstance(grid_n, int) or grid_n < 4:
        raise ConfigError("grid.n", "expected an integer >= 4")
    half_span = gsec.get("half_span_rad_per_fs")
    if half_span is not None:
        half_span = _number(half_span, "grid.half_span_rad_per_fs")

    qsec = data.get("quadrature", {})
    quad_step = qsec.get("step_fs")
    quad_step = None if quad_step is None else _number(quad_step, "quadrature.step_fs")
    quad_cutoff = qsec.get("cutoff_fs")
    quad_cutoff = None if quad_cutoff is None else _number(quad_cutoff,
                                                           "quadrature.cutoff_fs")
    quad_rule = str(qsec.get("rule", "trapezoid"))
    if quad_rule not in ("trapezoid", "simpson"):
        raise ConfigError("quadrature.rule", f"must be trapezoid or simpson, "
                                             f"got {quad_rule!r}")
    t_ref = qsec.get("t_ref_fs")
    t_ref = None if t_ref is None else _number(t_ref, "quadrature.t_ref_fs")
    t_ref_offset = _number(qsec.get("t_ref_offset_fs", 0.0),
                           "quadrature.t_ref_offset_fs")

    workers = data.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError("workers", "expected a positive integer")

    return RunConfig(
        system=system, pump=pump, crystal=crystal, theta=theta,
        delay_arm=delay_arm, hom_t=hom_t, hom_r=hom_r, bs_removed=bs_removed,
        tau_axis=tau_axis, T_axis=T_axis, s_axis=s_axis, grid_n=grid_n,
        grid_half_span=half_span, quad_step=quad_step, quad_cutoff=quad_cutoff,
        quad_rule=quad_rule, t_ref=t_ref, t_ref_offset=t_ref_offset, mode=mode,
        output=str(data.get("output", "signal.dat")), workers=workers, raw=data,
    )


def serialize_config(config: RunConfig) -> str:
    """YAML echo of the resolved configuration (defaults included)."""
    sys_sec: Dict[str, Any] = {
        "levels": [{"label": lv.label, "manifold": lv.manifold,
                    "energy_rad_per_fs": float(lv.energy)}
                   for lv in config.system.levels],
        "dipoles_ge": [[[float(v.real), float(v.imag)] for v in row]
                       for row in config.system.dipoles_ge],
        "dephasing": {
            "default_per_fs": float(config.system.dephasing_default),
            "pairs": [{"i": a, "j": b, "rate_per_fs": float(r)}
                      for (a, b), r in sorted(config.system.dephasing_pairs.items())],
        },
    }
    if config.system.n_f:
        sys_sec["dipoles_ef"] = [[[float(v.real), float(v.imag)] for v in row]
                                 for row in config.system.dipoles_ef]
    if config.system.initial_label is not None:
        sys_sec["initial_level"] = config.system.initial_label
    doc: Dict[str, Any] = {"system": sys_sec}
    if config.pump is not None:
        doc["pump"] = {"omega_p_rad_per_fs": config.pump.omega_p,
                       "sigma_p_rad_per_fs": config.pump.sigma_p}
    if config.crystal is not None:
        doc["crystal"] = {"omega_a_rad_per_fs": config.crystal.omega_a,
                          "omega_b_rad_per_fs": config.crystal.omega_b,
                          "T_a_fs": config.crystal.T_a,
                          "T_b_fs": config.crystal.T_b}
    doc["preparation"] = {"theta_rad": config.theta, "delay_arm": config.delay_arm}
    doc["hom"] = {"t_coeff": config.hom_t, "r_coeff": config.hom_r,
                  "bs_removed": config.bs_removed}
    doc["scan"] = {"tau_fs": config.tau_axis.tolist(),
                   "T_fs": config.T_axis.tolist(),
                   "s_fs": config.s_axis.tolist()}
    doc["grid"] = {"n": config.grid_n,
                   "half_span_rad_per_fs": config.grid_half_span}
    doc["quadrature"] = {"step_fs": config.quad_step,
                         "cutoff_fs": config.quad_cutoff,
                         "rule": config.quad_rule,
                         "t_ref_fs": config.t_ref,
                         "t_ref_offset_fs": config.t_ref_offset}
    doc["mode"] = config.mode
    doc["output"] = config.output
    doc["workers"] = config.workers
    return yaml.safe_dump(doc, sort_keys=False)


def _build_amplitude(config: RunConfig) -> Optional[BiphotonAmplitude]:
    if config.mode == "short_Te":
        return None
    if config.grid_half_span is None:
        grid = default_grid(config.pump, config.crystal, n=config.grid_n,
                            theta=config.theta)
    else:
        half = config.grid_half_span
        center = 0.5 * (config.crystal.omega_a + config.crystal.omega_b)
        axis = GridAxis(center, 2 * half / config.grid_n, config.grid_n)
        grid = FrequencyGrid(axis, axis)
    s0 = float(config.s_axis[0])
    return build_jsa(config.pump, config.crystal, config.theta, grid, s=s0,
                     delay_arm=config.delay_arm)


def run(config: RunConfig) -> int:
    """Execute the configured scan; writes the grid file plus a sidecar."""
    started = time.time()
    ops = LiouvilleOperatorSet(config.system)
    amp = _build_amplitude(config)
    q = default_quadrature(ops, amp, step=config.quad_step,
                           cutoff=config.quad_cutoff, rule=config.quad_rule,
                           t_ref=config.t_ref, t_ref_offset=config.t_ref_offset)
    hom = HomSpec(T=0.0, t_coeff=config.hom_t, r_coeff=config.hom_r)
    mode = "bs_removed" if config.bs_removed and config.mode == "full" else config.mode
    log.info("scan: mode=%s grid=%dx%dx%d workers=%s", mode,
             config.tau_axis.size, config.T_axis.size, config.s_axis.size,
             config.workers or "auto")
    grid = scan(config.tau_axis, config.T_axis, config.s_axis, mode, amp, ops,
                q, hom=hom, workers=config.workers)
    grid.save(config.output)
    sidecar = {
        "config": yaml.safe_load(serialize_config(config)),
        "system_hash": system_hash(ops),
        "amplitude_hash": amp.content_hash() if amp is not None else None,
        "wall_time_s": time.time() - started,
        "workers": config.workers,
    }
    with open(config.output + ".meta", "w") as fh:
        yaml.safe_dump(sidecar, fh, sort_keys=False)
    log.info("wrote %s (+.meta) in %.1f s", config.output, sidecar["wall_time_s"])
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=_LOG_LEVELS.get(os.environ.get("SIM_LOG", "warn").lower(),
                              logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="two-photon interferometric coincidence simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured scan")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--mode", choices=("full", "short_Te", "bs_removed"))
    p_run.add_argument("--out", default=None)

    p_val = sub.add_parser("validate", help="check a config file and exit")
    p_val.add_argument("--config", required=True)

    p_path = sub.add_parser("pathways", help="pathway bookkeeping utilities")
    path_sub = p_path.add_subparsers(dest="pathways_command", required=True)
    path_sub.add_parser("dump", help="print the 20-row contribution ledger")

    p_oracle = sub.add_parser("oracle", help="run a brute-force cross-check")
    p_oracle.add_argument("--benchmark", default="three-level",
                          choices=sorted(crosscheck.BENCHMARKS))

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            if args.workers is not None:
                config = dataclasses.replace(config, workers=args.workers)
            if args.mode is not None:
                config = dataclasses.replace(config, mode=args.mode,
                                             bs_removed=args.mode == "bs_removed"
                                             or config.bs_removed)
            if args.out is not None:
                config = dataclasses.replace(config, output=args.out)
            return run(config)
        if args.command == "validate":
            load_config(args.config)
            print("config ok")
            return 0
        if args.command == "pathways":
            print(format_term_table())
            return 0
        if args.command == "oracle":
            result = crosscheck.run_benchmark(args.benchmark)
            print(f"benchmark: {args.benchmark} (s = {result['s']} fs)")
            print("  tau      T      pipeline(norm)  brute(norm)")
            for (tau, T), p, b in zip(result["points"],
                                      result["pipeline_normalized"],
                                      result["brute_force_normalized"]):
                print(f"  {tau:6.2f} {T:6.2f}  {p:14.6f} {b:12.6f}")
            print(f"max relative deviation: {result['max_rel_dev']:.3e}")
            return 0 if result["max_rel_dev"] < 1e-2 else 1
    except ConfigError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Declarative experiment configurations for the CLI runner.

A scenario is a nested key-value tree (JSON on disk). Defaults mirror the
published parameter choices; desk-scale run lengths are 10-100x smaller
and --paper-scale restores the originals. Validation errors carry the
config field path.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

FAMILIES = ("langevin1d", "lj-eos", "scaling", "estimator-checks")


class ConfigError(ValueError):
    """A scenario configuration violation, reported with its field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _langevin1d_defaults() -> dict:
    return {
        "name": "langevin1d",
        "system": {
            "n_equilibrium": 100,
            "n_strong": 50,
            "dim": 1,
            "kernel": "bounded",
            "alpha": "mean-field",
            "lambda": 2.5,
        },
        "integrator": {"scheme": "baoab", "gamma": 2.5, "beta": 1.0},
        "rbm": {"enabled": True, "p": 2},
        "run": {
            "seed": 20260811,
            "phases": ["equilibrium", "strong"],
            "equilibrium": {
                "taus": [0.125],
                "ref_tau": 2.0**-8,
                "t_end": 150.0,
                "burn_in": 50.0,
                "sample_dt": 0.5,
                "hist_range": [-3.0, 3.0],
                "hist_bins": 12,
            },
            "strong": {
                "taus": [2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7, 2.0**-8],
                "ref_tau": 2.0**-14,
                "t_end": 2.0,
                "repetitions": 8,
            },
        },
        "output": {"write_samples": True},
    }


def _langevin1d_paper() -> dict:
    return {
        "system": {"n_equilibrium": 500},
        "run": {
            "equilibrium": {
                "taus": [1.0, 0.5, 0.25, 0.125],
                "ref_tau": 2.0**-10,
                "t_end": 300.0,
            },
            "strong": {"ref_tau": 2.0**-18},
        },
    }


def _lj_eos_defaults() -> dict:
    return {
        "name": "lj-eos",
        "system": {
            "n": 100,
            "dim": 3,
            "kernel": "lj",
            "alpha": "molecular",
            "densities": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        },
        "integrator": {
            "beta": 0.5,
            "schedule": "fixed",
            "tau": 0.001,
            "thermostats": [
                {"kind": "andersen", "nu": 10.0},
                {"kind": "langevin", "gamma": 10.0},
            ],
        },
        "rbm": {"enabled": True, "p": 2, "split": True},
        "run": {"seed": 20260811, "burn_in": 10.0, "pressure_samples": 10000},
        "output": {"trace_every": 100},
    }


def _lj_eos_paper() -> dict:
    return {"run": {"burn_in": 50.0, "pressure_samples": 100000}}


def _scaling_defaults() -> dict:
    return {
        "name": "scaling",
        "system": {
            "density": 0.5,
            "n_sweep": [512, 1024, 2048, 4096],
            "dim": 3,
            "kernel": "lj",
        },
        "integrator": {
            "beta": 0.5,
            "schedule": "fixed",
            "tau": 2.0**-10,
            "thermostat": {"kind": "langevin", "gamma": 10.0},
        },
        "rbm": {"enabled": True, "p": 2, "split": True},
        "run": {
            "seed": 20260811,
            "series": ["split-rbm", "full"],
            "thermalize_steps": 1024,
            "warmup_steps": 5,
            "repeats": 3,
        },
        "output": {},
    }


def _estimator_defaults() -> dict:
    return {
        "name": "estimator-checks",
        "system": {"dim": 3, "kernel": "bounded"},
        "rbm": {"p": 2},
        "run": {
            "seed": 20260811,
            "exhaustive_n": [4, 6],
            "position_sets": 20,
            "mc_n": 20,
            "mc_p": 4,
            "mc_draws": 100000,
        },
        "output": {},
    }


_DEFAULTS = {
    "langevin1d": _langevin1d_defaults,
    "lj-eos": _lj_eos_defaults,
    "scaling": _scaling_defaults,
    "estimator-checks": _estimator_defaults,
}

_PAPER_OVERLAYS = {
    "langevin1d": _langevin1d_paper,
    "lj-eos": _lj_eos_paper,
    "scaling": lambda: {},
    "estimator-checks": lambda: {"run": {"mc_draws": 1000000}},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(where, "unknown configuration key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(where, "expected a nested block")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def _check_divisible(n: int, p: int, path: str) -> None:
    _require(p >= 2, path, f"batch size p={p} must be >= 2")
    _require(
        n % p == 0,
        path,
        f"batch size p={p} must divide the particle count n={n}",
    )


def _is_pow2(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


def _validate_langevin1d(cfg: dict) -> None:
    sys_ = cfg["system"]
    _require(sys_["dim"] == 1, "system.dim", "the 1D benchmark requires dim=1")
    _require(sys_["kernel"] == "bounded", "system.kernel", "must be 'bounded'")
    run = cfg["run"]
    for phase in run["phases"]:
        _require(
            phase in ("equilibrium", "strong"),
            "run.phases",
            f"unknown phase {phase!r}",
        )
    if cfg["rbm"]["enabled"]:
        _check_divisible(sys_["n_equilibrium"], cfg["rbm"]["p"], "rbm.p")
        _check_divisible(sys_["n_strong"], cfg["rbm"]["p"], "rbm.p")
    eq = run["equilibrium"]
    _require(eq["burn_in"] < eq["t_end"], "run.equilibrium.burn_in", "must be < t_end")
    for tau in list(eq["taus"]) + list(run["strong"]["taus"]):
        _require(tau > 0, "run", f"tau {tau} must be positive")
    for phase_name, phase in (("equilibrium", eq), ("strong", run["strong"])):
        ref = phase["ref_tau"]
        for tau in phase["taus"]:
            ratio = tau / ref
            _require(
                abs(ratio - round(ratio)) < 1e-9 and _is_pow2(round(ratio)),
                f"run.{phase_name}.taus",
                f"tau {tau} must be a power-of-2 multiple of ref_tau {ref}",
            )
    _require(eq["hist_bins"] >= 1, "run.equilibrium.hist_bins", "must be >= 1")


def _validate_lj_eos(cfg: dict) -> None:
    sys_ = cfg["system"]
    _require(sys_["dim"] == 3, "system.dim", f"dim={sys_['dim']} unsupported; LJ runs are 3D")
    _require(sys_["kernel"] in ("lj", "none"), "system.kernel", "must be 'lj' or 'none'")
    for rho in sys_["densities"]:
        _require(rho > 0, "system.densities", f"density {rho} must be positive")
    integ = cfg["integrator"]
    _require(integ["beta"] > 0, "integrator.beta", "must be positive")
    _require(integ["tau"] > 0, "integrator.tau", "must be positive")
    _require(
        integ["schedule"] in ("fixed", "decreasing"),
        "integrator.schedule",
        "must be 'fixed' or 'decreasing'",
    )
    for i, th in enumerate(integ["thermostats"]):
        kind = th.get("kind")
        path = f"integrator.thermostats[{i}]"
        _require(kind in ("andersen", "langevin"), path, f"unknown kind {kind!r}")
        coeff = th.get("nu" if kind == "andersen" else "gamma", 0.0)
        _require(coeff > 0, path, "collision/friction coefficient must be positive")
    if cfg["rbm"]["enabled"]:
        _check_divisible(sys_["n"], cfg["rbm"]["p"], "rbm.p")
        _require(cfg["rbm"]["split"], "rbm.split", "raw LJ needs kernel splitting")
    run = cfg["run"]
    _require(run["burn_in"] >= 0, "run.burn_in", "must be >= 0")
    _require(run["pressure_samples"] >= 1, "run.pressure_samples", "must be >= 1")


def _validate_scaling(cfg: dict) -> None:
    _require(cfg["system"]["density"] > 0, "system.density", "must be positive")
    for n in cfg["system"]["n_sweep"]:
        _require(n >= 2, "system.n_sweep", "needs n >= 2")
        if cfg["rbm"]["enabled"]:
            _check_divisible(n, cfg["rbm"]["p"], "rbm.p")
    for series in cfg["run"]["series"]:
        _require(
            series in ("split-rbm", "full"),
            "run.series",
            f"unknown series {series!r}",
        )


def _validate_estimator(cfg: dict) -> None:
    run = cfg["run"]
    for n in run["exhaustive_n"]:
        _check_divisible(n, 2, "run.exhaustive_n")
    _check_divisible(run["mc_n"], run["mc_p"], "run.mc_p")
    _require(run["mc_draws"] >= 1, "run.mc_draws", "must be >= 1")
    _require(run["position_sets"] >= 1, "run.position_sets", "must be >= 1")


_VALIDATORS = {
    "langevin1d": _validate_langevin1d,
    "lj-eos": _validate_lj_eos,
    "scaling": _validate_scaling,
    "estimator-checks": _validate_estimator,
}


@dataclass(frozen=True)
class Scenario:
    family: str
    config: dict

    @property
    def name(self) -> str:
        return self.config["name"]

    @property
    def seed(self) -> int:
        return int(self.config["run"]["seed"])

    def hash(self) -> str:
        payload = {k: v for k, v in self.config.items() if k != "output"}
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def validate(self) -> "Scenario":
        _VALIDATORS[self.family](self.config)
        return self


def default_config(family: str, paper_scale: bool = False) -> dict:
    if family not in FAMILIES:
        raise ConfigError("family", f"unknown scenario family {family!r}")
    cfg = _DEFAULTS[family]()
    if paper_scale:
        cfg = _merge(cfg, _PAPER_OVERLAYS[family]())
    return cfg


def load_scenario(
    family: str,
    *,
    config_path: Optional[str] = None,
    seed: Optional[int] = None,
    paper_scale: bool = False,
    no_rbm: bool = False,
) -> Scenario:
    cfg = default_config(family, paper_scale)
    if config_path is not None:
        try:
            with open(config_path) as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {config_path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON in {config_path}: {exc}")
        if not isinstance(overrides, dict):
            raise ConfigError("config", "top level must be an object")
        cfg = _merge(cfg, overrides)
    if seed is not None:
        cfg["run"]["seed"] = int(seed)
    if no_rbm and "enabled" in cfg.get("rbm", {}):
        cfg["rbm"]["enabled"] = False
    return Scenario(family=family, config=cfg).validate()

"""Experiment runners behind the CLI: they execute scenarios and write
long-format CSV results plus a JSON run manifest.

CSV schema (documented in the README): a first comment line
`# scenario=<name> hash=<hash> units=reduced`, then the header row
series,seed,x_name,x,observable,unit,value. Values are written with
repr() so re-runs with the same seed are bit-identical.
"""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from . import __version__
from .batching import chi, enumerate_pair_partitions, lambda_i, random_partition, same_batch_indicator, single_batch
from .core import (
    ParticleState,
    RngStream,
    box_from_density,
    lattice_init,
    velocity_init,
)
from .forces import BATCH, FULL, SPLIT, ForceField
from .integrators import (
    CoupledNoiseTape,
    StepSchedule,
    fixed_schedule,
    make_coupled_noise_fn,
    run_baoab,
    run_verlet_andersen,
)
from .kernels import bounded_kernel, lj_kernel, lj_split
from .observables import (
    histogram_l1_distance,
    instantaneous_temperature,
    mean_report,
    pressure,
    strong_error,
    weak_error,
)
from .scenario import Scenario

CSV_COLUMNS = ("series", "seed", "x_name", "x", "observable", "unit", "value")

PAPER_TEST_FUNCTIONS = {
    "exp2x": lambda x: np.exp(2.0 * x),
    "x2": lambda x: x**2,
    "inv_shift": lambda x: 1.0 / ((x - 0.1) ** 2 + 0.001),
    "lorentz": lambda x: 1.0 / (1.0 + x**2),
}


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, scenario: Scenario, rows: Iterable[tuple]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario={scenario.name} hash={scenario.hash()} units=reduced\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_manifest(
    out_dir: Path,
    scenario: Scenario,
    status: str,
    phase_seconds: Optional[dict] = None,
    outputs: Optional[list] = None,
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "scenario": scenario.name,
        "family": scenario.family,
        "hash": scenario.hash(),
        "master_seed": scenario.seed,
        "code_version": __version__,
        "config": scenario.config,
        "status": status,
        "phase_seconds": phase_seconds or {},
        "outputs": outputs or [],
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _sample_positions(
    sink: list, every: int, first_k: int
) -> Callable[[int, ParticleState], None]:
    def cb(k: int, state: ParticleState) -> None:
        if k >= first_k and (k - first_k) % every == 0:
            sink.append(state.positions.copy())

    return cb


def _langevin1d_field(n: int, lam: float, strategy: str) -> ForceField:
    return ForceField(
        strategy,
        alpha_n=1.0 / (n - 1),
        kernel=bounded_kernel(),
        external=lambda x: -lam * x,
    )


def run_langevin1d(scenario: Scenario, out_dir: Path) -> dict:
    cfg = scenario.config
    out_dir = Path(out_dir)
    lam = cfg["system"]["lambda"]
    gamma = cfg["integrator"]["gamma"]
    beta = cfg["integrator"]["beta"]
    rbm_on = cfg["rbm"]["enabled"]
    p = cfg["rbm"]["p"]
    outputs = {}
    timings = {}

    if "equilibrium" in cfg["run"]["phases"]:
        t0 = time.perf_counter()
        eq = cfg["run"]["equilibrium"]
        n = cfg["system"]["n_equilibrium"]
        stream = RngStream(scenario.seed).substream(1)
        x0 = stream.generator("posinit").uniform(-0.5, 0.5, (n, 1))
        v0 = velocity_init(n, 1, beta, stream.generator("velinit"))
        tape = CoupledNoiseTape(stream, n, 1)
        ref_tau = eq["ref_tau"]

        def equilibrium_run(tau: float, strategy: str, rbm_p) -> np.ndarray:
            m = round(tau / ref_tau)
            first_k = math.ceil(eq["burn_in"] / tau - 1e-9)
            every = round(eq["sample_dt"] / tau)
            first_k = ((first_k + every - 1) // every) * every
            sink: list = []
            state = ParticleState(x0.copy(), v0.copy())
            run_baoab(
                state,
                _langevin1d_field(n, lam, strategy),
                fixed_schedule(tau),
                round(eq["t_end"] / tau),
                gamma,
                beta,
                stream,
                p=rbm_p,
                noise_fn=make_coupled_noise_fn(tape, m, gamma, ref_tau, beta),
                callback=_sample_positions(sink, every, first_k),
            )
            return np.concatenate(sink).ravel()

        ref_samples = equilibrium_run(ref_tau, FULL, None)
        edges = np.linspace(
            eq["hist_range"][0], eq["hist_range"][1], eq["hist_bins"] + 1
        )
        sample_rows = []
        weak_rows = []
        sweep_strategy = BATCH if rbm_on else FULL
        sweep_p = p if rbm_on else None
        for tau in eq["taus"]:
            samples = equilibrium_run(tau, sweep_strategy, sweep_p)
            series = f"rbm_tau_{tau:g}" if rbm_on else f"full_tau_{tau:g}"
            for fname, f in PAPER_TEST_FUNCTIONS.items():
                weak_rows.append(
                    (
                        series,
                        scenario.seed,
                        "tau",
                        tau,
                        f"weak_err[{fname}]",
                        "relative",
                        weak_error(samples, ref_samples, f),
                    )
                )
            weak_rows.append(
                (
                    series,
                    scenario.seed,
                    "tau",
                    tau,
                    "hist_l1",
                    "density",
                    histogram_l1_distance(samples, ref_samples, edges),
                )
            )
            weak_rows.append(
                (series, scenario.seed, "tau", tau, "n_samples", "count", samples.size)
            )
            if cfg["output"]["write_samples"]:
                t_grid = _sample_times(eq, tau)
                sample_rows.extend(
                    _position_rows(series, scenario.seed, t_grid, samples, n)
                )
        if cfg["output"]["write_samples"]:
            t_grid = _sample_times(eq, ref_tau)
            sample_rows.extend(
                _position_rows("reference", scenario.seed, t_grid, ref_samples, n)
            )
            outputs["equilibrium_samples"] = write_csv(
                out_dir / "equilibrium_samples.csv", scenario, sample_rows
            )
        outputs["weak_errors"] = write_csv(
            out_dir / "weak_errors.csv", scenario, weak_rows
        )
        timings["equilibrium"] = time.perf_counter() - t0

    if "strong" in cfg["run"]["phases"]:
        t0 = time.perf_counter()
        sp = cfg["run"]["strong"]
        n = cfg["system"]["n_strong"]
        ref_tau = sp["ref_tau"]
        strong_rows = []
        for rep in range(sp["repetitions"]):
            stream = RngStream(scenario.seed).substream(2, rep)
            x0 = stream.generator("posinit").uniform(-0.5, 0.5, (n, 1))
            v0 = velocity_init(n, 1, beta, stream.generator("velinit"))
            tape = CoupledNoiseTape(stream, n, 1)
            ref_state = ParticleState(x0.copy(), v0.copy())
            run_baoab(
                ref_state,
                _langevin1d_field(n, lam, FULL),
                fixed_schedule(ref_tau),
                round(sp["t_end"] / ref_tau),
                gamma,
                beta,
                stream,
                noise_fn=make_coupled_noise_fn(tape, 1, gamma, ref_tau, beta),
            )
            for tau in sp["taus"]:
                m = round(tau / ref_tau)
                state = ParticleState(x0.copy(), v0.copy())
                run_baoab(
                    state,
                    _langevin1d_field(n, lam, BATCH if rbm_on else FULL),
                    fixed_schedule(tau),
                    round(sp["t_end"] / tau),
                    gamma,
                    beta,
                    stream,
                    p=p if rbm_on else None,
                    noise_fn=make_coupled_noise_fn(tape, m, gamma, ref_tau, beta),
                )
                strong_rows.append(
                    (
                        "rbm" if rbm_on else "full",
                        rep,
                        "tau",
                        tau,
                        "strong_err",
                        "relative",
                        strong_error(state, ref_state),
                    )
                )
        outputs["strong_errors"] = write_csv(
            out_dir / "strong_errors.csv", scenario, strong_rows
        )
        timings["strong"] = time.perf_counter() - t0

    return {"outputs": outputs, "timings": timings}


def _sample_times(eq: dict, tau: float) -> np.ndarray:
    first_k = math.ceil(eq["burn_in"] / tau - 1e-9)
    every = round(eq["sample_dt"] / tau)
    first_k = ((first_k + every - 1) // every) * every
    ks = np.arange(first_k, round(eq["t_end"] / tau) + 1, every)
    return ks * tau


def _position_rows(series, seed, t_grid, samples, n):
    per_time = samples.reshape(len(t_grid), n)
    rows = []
    for t, block in zip(t_grid, per_time):
        for value in block:
            rows.append((series, seed, "time", t, "position", "length", value))
    return rows


def run_lj_eos(scenario: Scenario, out_dir: Path) -> dict:
    cfg = scenario.config
    out_dir = Path(out_dir)
    n = cfg["system"]["n"]
    beta = cfg["integrator"]["beta"]
    temperature = 1.0 / beta
    rbm_on = cfg["rbm"]["enabled"]
    interacting = cfg["system"]["kernel"] == "lj"
    schedule = StepSchedule(cfg["integrator"]["schedule"], cfg["integrator"]["tau"])
    trace_every = cfg["output"]["trace_every"]
    summary_rows = []
    trace_rows = []
    timings = {}

    for di, rho in enumerate(cfg["system"]["densities"]):
        box = box_from_density(n, rho)
        for ti, thermo in enumerate(cfg["integrator"]["thermostats"]):
            t0 = time.perf_counter()
            series = f"{thermo['kind']}-{'rbm' if rbm_on else 'full'}"
            stream = RngStream(scenario.seed).substream(di, ti, int(rbm_on))
            state = ParticleState(
                lattice_init(n, box),
                velocity_init(n, 3, beta, stream.generator("velinit")),
            )
            if not interacting:
                field = ForceField(
                    FULL, kernel=None, external=lambda x: np.zeros_like(x), box=box
                )
                rbm_p = None
            elif rbm_on:
                field = ForceField(
                    SPLIT, alpha_n=1.0, split=lj_split(), box=box, use_cutoff=True
                )
                rbm_p = cfg["rbm"]["p"]
            else:
                field = ForceField(
                    FULL, alpha_n=1.0, kernel=lj_kernel(), box=box, use_cutoff=True
                )
                rbm_p = None

            pressures: list = []
            temps: list = []
            times: list = []

            def sample(k: int, s: ParticleState) -> None:
                t_inst = instantaneous_temperature(s)
                pressures.append(
                    pressure(
                        s,
                        box,
                        t_inst,
                        include_virial=interacting,
                        include_tail=interacting,
                    )
                )
                temps.append(t_inst)
                times.append(s.time)

            burn_steps = schedule.steps_until(cfg["run"]["burn_in"])
            n_samples = cfg["run"]["pressure_samples"]
            common = dict(p=rbm_p)
            if thermo["kind"] == "andersen":
                run_verlet_andersen(
                    state, field, schedule, burn_steps, thermo["nu"], temperature,
                    stream, **common,
                )
                run_verlet_andersen(
                    state, field, schedule, n_samples, thermo["nu"], temperature,
                    stream, callback=sample, start_step=burn_steps + 1, **common,
                )
            else:
                run_baoab(
                    state, field, schedule, burn_steps, thermo["gamma"], beta,
                    stream, **common,
                )
                run_baoab(
                    state, field, schedule, n_samples, thermo["gamma"], beta,
                    stream, callback=sample, start_step=burn_steps + 1, **common,
                )

            p_report = mean_report("pressure", np.asarray(pressures))
            t_report = mean_report("temperature", np.asarray(temps))
            summary_rows.extend(
                [
                    (series, scenario.seed, "density", rho, "pressure_mean",
                     "reduced", p_report.value),
                    (series, scenario.seed, "density", rho, "pressure_se",
                     "reduced", p_report.standard_error),
                    (series, scenario.seed, "density", rho, "temperature_mean",
                     "reduced", t_report.value),
                    (series, scenario.seed, "density", rho, "n_samples",
                     "count", p_report.sample_count),
                ]
            )
            for idx in range(0, len(pressures), trace_every):
                trace_rows.append(
                    (series, scenario.seed, "time", times[idx], f"pressure[rho={rho:g}]",
                     "reduced", pressures[idx])
                )
                trace_rows.append(
                    (series, scenario.seed, "time", times[idx], f"temperature[rho={rho:g}]",
                     "reduced", temps[idx])
                )
            timings[f"{series}[rho={rho:g}]"] = time.perf_counter() - t0

    outputs = {
        "lj_eos": write_csv(out_dir / "lj_eos.csv", scenario, summary_rows),
        "lj_eos_trace": write_csv(out_dir / "lj_eos_trace.csv", scenario, trace_rows),
    }
    return {"outputs": outputs, "timings": timings}


def _scaling_steps(n: int, series: str) -> int:
    if series == "full":
        return max(5, 8192 // n)
    return max(16, 32768 // n)


def run_scaling(scenario: Scenario, out_dir: Path) -> dict:
    """Per-step wall time of the stepping loop only (init and I/O excluded).

    Each size is thermalized once off the lattice, then every series is
    timed over several repeats; the minimum per-step time is reported
    (least sensitive to scheduler noise).
    """
    cfg = scenario.config
    out_dir = Path(out_dir)
    beta = cfg["integrator"]["beta"]
    gamma = cfg["integrator"]["thermostat"]["gamma"]
    schedule = fixed_schedule(cfg["integrator"]["tau"])
    repeats = cfg["run"]["repeats"]
    rows = []
    timings = {}
    for n in cfg["system"]["n_sweep"]:
        box = box_from_density(n, cfg["system"]["density"])
        stream = RngStream(scenario.seed).substream(n)
        split_field = ForceField(
            SPLIT, alpha_n=1.0, split=lj_split(), box=box, use_cutoff=True
        )
        state0 = ParticleState(
            lattice_init(n, box),
            velocity_init(n, 3, beta, stream.generator("velinit")),
        )
        # melt the lattice so the timed steps see fluid-like cell occupancy;
        # larger steps are unstable here (batch variance grows like N^2)
        run_baoab(
            state0, split_field, schedule,
            cfg["run"]["thermalize_steps"], gamma, beta, stream,
            p=cfg["rbm"]["p"],
        )
        for series in cfg["run"]["series"]:
            if series == "split-rbm":
                field, rbm_p = split_field, cfg["rbm"]["p"]
            else:
                field = ForceField(
                    FULL, alpha_n=1.0, kernel=lj_kernel(), box=box, use_cutoff=True
                )
                rbm_p = None
            state = state0.copy()
            warmup = cfg["run"]["warmup_steps"]
            run_baoab(state, field, schedule, warmup, gamma, beta, stream, p=rbm_p)
            steps = _scaling_steps(n, series)
            best = math.inf
            k0 = warmup + 1
            for _ in range(repeats):
                t0 = time.perf_counter()
                run_baoab(
                    state, field, schedule, steps, gamma, beta, stream,
                    p=rbm_p, start_step=k0,
                )
                best = min(best, (time.perf_counter() - t0) / steps)
                k0 += steps
            rows.append(
                (series, scenario.seed, "n_particles", n, "step_time", "seconds",
                 best)
            )
            rows.append(
                (series, scenario.seed, "n_particles", n, "steps", "count",
                 steps * repeats)
            )
            timings[f"{series}[n={n}]"] = best * steps * repeats
    outputs = {"scaling": write_csv(out_dir / "scaling.csv", scenario, rows)}
    return {"outputs": outputs, "timings": timings}


def run_estimator_checks(scenario: Scenario, out_dir: Path) -> dict:
    cfg = scenario.config
    out_dir = Path(out_dir)
    run = cfg["run"]
    dim = cfg["system"]["dim"]
    kernel = bounded_kernel().force
    stream = RngStream(scenario.seed)
    rows = []
    t0 = time.perf_counter()

    gen = stream.generator("positions")
    for n in run["exhaustive_n"]:
        parts = list(enumerate_pair_partitions(n))
        worst_bias = 0.0
        worst_var = 0.0
        for _ in range(run["position_sets"]):
            pos = gen.normal(0.0, 1.0, (n, dim))
            for i in range(n):
                chis = np.stack([chi(pos, kernel, part, i) for part in parts])
                bias = float(np.max(np.abs(chis.mean(axis=0))))
                m2 = float(np.mean(np.sum(chis**2, axis=1)))
                lam = lambda_i(pos, kernel, i)
                expected = (1.0 / (2 - 1) - 1.0 / (n - 1)) * lam
                rel = abs(m2 - expected) / abs(m2) if m2 else 0.0
                worst_bias = max(worst_bias, bias)
                worst_var = max(worst_var, rel)
        rows.append(("exhaustive", scenario.seed, "n", n, "pairings", "count",
                     len(parts)))
        rows.append(("exhaustive", scenario.seed, "n", n, "chi_bias_max", "force",
                     worst_bias))
        rows.append(("exhaustive", scenario.seed, "n", n, "var_identity_rel_err_max",
                     "relative", worst_var))

    # Monte-Carlo indicator moments
    n, p, draws = run["mc_n"], run["mc_p"], run["mc_draws"]
    gen = stream.generator("mc-partitions")
    hits_12 = 0
    hits_12_13 = 0
    for _ in range(draws):
        part = random_partition(n, p, gen)
        i12 = same_batch_indicator(part, 0, 1)
        hits_12 += i12
        hits_12_13 += i12 * same_batch_indicator(part, 0, 2)
    for name, hits, expected in (
        ("ei", hits_12, (p - 1) / (n - 1)),
        ("eii", hits_12_13, (p - 1) * (p - 2) / ((n - 1) * (n - 2))),
    ):
        mean = hits / draws
        se = math.sqrt(max(mean * (1 - mean), 1e-300) / draws)
        rows.append(("mc", scenario.seed, "n", n, f"{name}_mean", "probability", mean))
        rows.append(("mc", scenario.seed, "n", n, f"{name}_expected", "probability",
                     expected))
        rows.append(("mc", scenario.seed, "n", n, f"{name}_se", "probability", se))

    # p = N degenerate case: chi vanishes identically
    pos = gen.normal(0.0, 1.0, (run["mc_p"], dim))
    part = single_batch(run["mc_p"])
    worst = max(
        float(np.max(np.abs(chi(pos, kernel, part, i)))) for i in range(run["mc_p"])
    )
    rows.append(("single-batch", scenario.seed, "n", run["mc_p"],
                 "chi_single_batch_max", "force", worst))

    outputs = {
        "estimator_checks": write_csv(out_dir / "estimator_checks.csv", scenario, rows)
    }
    return {"outputs": outputs, "timings": {"all": time.perf_counter() - t0}}


_RUNNERS = {
    "langevin1d": run_langevin1d,
    "lj-eos": run_lj_eos,
    "scaling": run_scaling,
    "estimator-checks": run_estimator_checks,
}


def run_scenario(scenario: Scenario, out_dir) -> dict:
    """Execute a scenario: manifest before, results, manifest after."""
    out_dir = Path(out_dir)
    write_manifest(out_dir, scenario, status="running")
    result = _RUNNERS[scenario.family](scenario, out_dir)
    write_manifest(
        out_dir,
        scenario,
        status="completed",
        phase_seconds={k: round(v, 3) for k, v in result["timings"].items()},
        outputs=[str(par) for par in result["outputs"].values()],
    )
    return result

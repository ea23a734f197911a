"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <name>: PASS/FAIL` line (run with -s to
see them live) and asserts both the tolerance and the runtime cap. The
heavyweight molecular-dynamics criteria take minutes each; the whole
module is sized to finish in well under the summed caps on a desktop.
"""

import csv
import math
import time
from pathlib import Path

import numpy as np
import pytest

from rbmsim.batching import (
    chi,
    enumerate_pair_partitions,
    lambda_i,
    random_partition,
    same_batch_indicator,
)
from rbmsim.core import (
    ParticleState,
    RngStream,
    box_from_density,
    lattice_init,
    minimal_image,
    velocity_init,
)
from rbmsim.forces import FULL, ForceField
from rbmsim.integrators import fixed_schedule, run_baoab, run_verlet_andersen
from rbmsim.kernels import R0_LJ_SPLIT, bounded_kernel, lj_force, lj_potential, lj_split
from rbmsim.neighbor import build_cell_list, pairs_within
from rbmsim.observables import instantaneous_temperature
from rbmsim.scenario import load_scenario
from rbmsim.experiments import (
    run_langevin1d,
    run_lj_eos,
    run_scaling,
    run_scenario,
)

ACCEPTANCE_SEED = 20260811


def report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} — {detail}")


def read_csv(path):
    with open(path) as fh:
        fh.readline()
        return list(csv.DictReader(fh))


def rows_value(rows, **match):
    out = [
        float(r["value"])
        for r in rows
        if all(r[k] == str(v) for k, v in match.items())
    ]
    assert out, f"no rows matching {match}"
    return out


# ---------------------------------------------------------------- criterion 1


def test_estimator_lemmas_exact():
    t0 = time.perf_counter()
    kernel = bounded_kernel().force
    gen = RngStream(ACCEPTANCE_SEED).generator("acc-lemmas")
    worst_bias = 0.0
    worst_var = 0.0
    for n in (4, 6):
        parts = list(enumerate_pair_partitions(n))
        for _ in range(20):
            pos = gen.normal(0.0, 1.0, (n, 3))
            for i in range(n):
                chis = np.stack([chi(pos, kernel, part, i) for part in parts])
                worst_bias = max(worst_bias, float(np.max(np.abs(chis.mean(0)))))
                m2 = float(np.mean(np.sum(chis**2, axis=1)))
                expected = (1.0 - 1.0 / (n - 1)) * lambda_i(pos, kernel, i)
                worst_var = max(worst_var, abs(m2 - expected) / m2)
    elapsed = time.perf_counter() - t0
    ok = worst_bias < 1e-12 and worst_var < 1e-10 and elapsed < 1.0
    report(
        "estimator-lemmas",
        ok,
        f"max|mean chi|={worst_bias:.2e}, var-identity rel={worst_var:.2e}, "
        f"{elapsed:.2f}s",
    )
    assert worst_bias < 1e-12
    assert worst_var < 1e-10
    assert elapsed < 1.0


# ---------------------------------------------------------------- criterion 2


def test_indicator_moments_statistical():
    t0 = time.perf_counter()
    n, p, draws = 20, 4, 100_000
    gen = RngStream(ACCEPTANCE_SEED).generator("acc-indicators")
    s12 = s123 = 0
    for _ in range(draws):
        part = random_partition(n, p, gen)
        i12 = same_batch_indicator(part, 0, 1)
        s12 += i12
        if i12:
            s123 += same_batch_indicator(part, 0, 2)
    elapsed = time.perf_counter() - t0
    checks = []
    for total, expected in ((s12, 3 / 19), (s123, 6 / 342)):
        mean = total / draws
        se = math.sqrt(expected * (1 - expected) / draws)
        checks.append((mean, expected, abs(mean - expected) / se))
    ok = all(dev < 4 for _, _, dev in checks) and elapsed < 5.0
    report(
        "indicator-moments",
        ok,
        f"EI12={checks[0][0]:.5f} ({checks[0][2]:.2f} SE), "
        f"EI12I13={checks[1][0]:.5f} ({checks[1][2]:.2f} SE), {elapsed:.1f}s",
    )
    for mean, expected, dev in checks:
        assert dev < 4
    assert elapsed < 5.0


# ---------------------------------------------------------------- criterion 3


def test_strong_convergence_slope(tmp_path):
    t0 = time.perf_counter()
    scenario = load_scenario("langevin1d", seed=ACCEPTANCE_SEED)
    cfg = dict(scenario.config)
    cfg["run"] = dict(cfg["run"], phases=["strong"])
    from rbmsim.scenario import Scenario

    scenario = Scenario("langevin1d", cfg).validate()
    result = run_langevin1d(scenario, tmp_path)
    rows = read_csv(result["outputs"]["strong_errors"])
    taus = sorted({float(r["x"]) for r in rows})
    means = [np.mean(rows_value(rows, x=repr(t), observable="strong_err")) for t in taus]
    slope = float(np.polyfit(np.log(taus), np.log(means), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = 0.40 <= slope <= 0.80 and elapsed < 600
    report(
        "strong-convergence-slope",
        ok,
        f"slope={slope:.3f} over tau in [2^-8, 2^-4], "
        f"err range [{min(means):.4f}, {max(means):.4f}], {elapsed:.0f}s",
    )
    assert 0.40 <= slope <= 0.80
    assert elapsed < 600


# ---------------------------------------------------------------- criterion 4


def test_weak_error_and_equilibrium(tmp_path):
    t0 = time.perf_counter()
    scenario = load_scenario("langevin1d", seed=ACCEPTANCE_SEED)
    cfg = dict(scenario.config)
    cfg["run"] = dict(cfg["run"], phases=["equilibrium"])
    cfg["output"] = dict(cfg["output"], write_samples=False)
    from rbmsim.scenario import Scenario

    scenario = Scenario("langevin1d", cfg).validate()
    result = run_langevin1d(scenario, tmp_path)
    rows = read_csv(result["outputs"]["weak_errors"])
    weak = {
        f: rows_value(rows, observable=f"weak_err[{f}]")[0]
        for f in ("exp2x", "x2", "inv_shift", "lorentz")
    }
    l1 = rows_value(rows, observable="hist_l1")[0]
    elapsed = time.perf_counter() - t0
    ok = all(v < 0.05 for v in weak.values()) and l1 < 0.05 and elapsed < 600
    report(
        "weak-error-equilibrium",
        ok,
        "weak errs "
        + ", ".join(f"{k}={v:.4f}" for k, v in weak.items())
        + f"; hist L1={l1:.4f}; {elapsed:.0f}s",
    )
    for v in weak.values():
        assert v < 0.05
    assert l1 < 0.05
    assert elapsed < 600


# ---------------------------------------------------------------- criterion 5


def test_kernel_splitting_identities():
    t0 = time.perf_counter()
    sk = lj_split()
    rng = RngStream(ACCEPTANCE_SEED).generator("acc-split")
    radii = rng.uniform(0.8, 5.0, 1000)
    dirs = rng.normal(size=(1000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    x = radii[:, None] * dirs

    full_force = lj_force(x)
    force_rel = np.max(
        np.abs(sk.k1.force(x) + sk.k2.force(x) - full_force)
        / np.maximum(np.abs(full_force), 1e-30)
    )
    full_pot = lj_potential(radii)
    pot_rel = np.max(
        np.abs(sk.k1.potential(x) + sk.k2.potential(x) - full_pot)
        / np.maximum(np.abs(full_pot), 1e-30)
    )
    at_r0 = np.array([[R0_LJ_SPLIT, 0.0, 0.0]])
    phi1_r0 = float(sk.k1.potential(at_r0)[0])
    phi_r0 = float(lj_potential(R0_LJ_SPLIT))
    f_r0 = float(np.linalg.norm(lj_force(at_r0)))
    elapsed = time.perf_counter() - t0
    ok = (
        force_rel < 1e-12
        and pot_rel < 1e-12
        and phi1_r0 == 0.0
        and abs(phi_r0 + 1.0) < 1e-14
        and f_r0 < 1e-13
        and elapsed < 1.0
    )
    report(
        "kernel-splitting",
        ok,
        f"force rel={force_rel:.2e}, potential rel={pot_rel:.2e}, "
        f"phi1(r0)={phi1_r0}, phi(r0)={phi_r0:.16f}, |K(r0)|={f_r0:.2e}, "
        f"{elapsed:.2f}s",
    )
    assert force_rel < 1e-12 and pot_rel < 1e-12
    assert phi1_r0 == 0.0 and abs(phi_r0 + 1.0) < 1e-14 and f_r0 < 1e-13
    assert elapsed < 1.0


# ---------------------------------------------------------------- criterion 6


def test_cell_list_oracle_equivalence():
    t0 = time.perf_counter()
    gen = RngStream(ACCEPTANCE_SEED).generator("acc-cells")
    sk = lj_split()
    worst_force = 0.0
    for _ in range(200):
        n = int(gen.integers(27, 201))  # n >= 27 keeps r_c = L/2 above r0
        rho = float(gen.uniform(0.2, 0.7))
        box = box_from_density(n, rho)
        # jittered lattice: random but without deep overlaps, so the force
        # comparison is meaningful at the stated absolute tolerance
        pos = box.wrap(lattice_init(n, box) + gen.uniform(-0.08, 0.08, (n, 3)))
        radius = float(gen.uniform(R0_LJ_SPLIT, box.cutoff))
        cl = build_cell_list(pos, box, radius)

        i, j, disp = pairs_within(cl, radius)
        got = set(zip(i.tolist(), j.tolist()))
        # independent row-scan oracle (no cells)
        oracle_pairs = set()
        for a in range(n - 1):
            d = minimal_image(pos[a] - pos[a + 1 :], box)
            hits = np.nonzero(np.sum(d**2, axis=1) < radius**2)[0]
            oracle_pairs.update((a, a + 1 + int(h)) for h in hits)
        assert got == oracle_pairs, f"pair sets differ for n={n}"

        # K1 force assembled from the cell list vs direct row scan
        i1, j1, disp1 = pairs_within(build_cell_list(pos, box, sk.r0), sk.r0)
        f_cells = np.zeros((n, 3))
        if i1.size:
            f1 = sk.k1.force(disp1)
            np.add.at(f_cells, i1, f1)
            np.add.at(f_cells, j1, -f1)
        f_oracle = np.zeros((n, 3))
        for a in range(n):
            d = minimal_image(pos[a] - np.delete(pos, a, axis=0), box)
            f_oracle[a] = np.sum(sk.k1.force(d), axis=0)
        worst_force = max(worst_force, float(np.max(np.abs(f_cells - f_oracle))))
    elapsed = time.perf_counter() - t0
    ok = worst_force < 1e-12 and elapsed < 30
    report(
        "cell-list-equivalence",
        ok,
        f"200 configs: pair sets identical, max |K1 diff|={worst_force:.2e}, "
        f"{elapsed:.0f}s",
    )
    assert worst_force < 1e-12
    assert elapsed < 30


# ---------------------------------------------------------------- criterion 7


def _block_se(series: np.ndarray, blocks: int = 20) -> float:
    usable = (len(series) // blocks) * blocks
    means = series[:usable].reshape(blocks, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(blocks))


def _eos_run(tmp_path, tag, densities, thermostats, no_rbm, samples, burn,
             schedule="fixed", tau=0.001, n=100, trace_every=10):
    overrides = {
        "system": {"n": n, "densities": densities},
        "integrator": {"schedule": schedule, "tau": tau, "thermostats": thermostats},
        "run": {"burn_in": burn, "pressure_samples": samples},
        "output": {"trace_every": trace_every},
    }
    import json

    cfg_path = tmp_path / f"{tag}.json"
    cfg_path.write_text(json.dumps(overrides))
    scenario = load_scenario(
        "lj-eos", config_path=str(cfg_path), seed=ACCEPTANCE_SEED, no_rbm=no_rbm
    )
    out = tmp_path / tag
    result = run_lj_eos(scenario, out)
    return (
        read_csv(result["outputs"]["lj_eos"]),
        read_csv(result["outputs"]["lj_eos_trace"]),
    )


def _trace_series(trace_rows, series, rho):
    return np.array(
        [
            float(r["value"])
            for r in trace_rows
            if r["series"] == series and r["observable"] == f"pressure[rho={rho:g}]"
        ]
    )


def test_lj_pressure_consistency(tmp_path):
    t0 = time.perf_counter()
    densities = [0.3, 0.5, 0.7]
    thermostats = [
        {"kind": "andersen", "nu": 50.0},
        {"kind": "langevin", "gamma": 50.0},
    ]
    rbm_rows, rbm_trace = _eos_run(
        tmp_path, "rbm", densities, thermostats, False, 10_000, 10.0
    )
    full_rows, full_trace = _eos_run(
        tmp_path, "full", densities, thermostats, True, 10_000, 10.0
    )
    details = []
    ok = True
    for rho in densities:
        for kind in ("andersen", "langevin"):
            p_rbm = rows_value(
                rbm_rows, series=f"{kind}-rbm", observable="pressure_mean",
                x=repr(rho),
            )[0]
            p_full = rows_value(
                full_rows, series=f"{kind}-full", observable="pressure_mean",
                x=repr(rho),
            )[0]
            se_rbm = _block_se(_trace_series(rbm_trace, f"{kind}-rbm", rho))
            se_full = _block_se(_trace_series(full_trace, f"{kind}-full", rho))
            combined = math.hypot(se_rbm, se_full)
            tol = max(0.10 * abs(p_full), 3.0 * combined)
            diff = abs(p_rbm - p_full)
            ok = ok and diff <= tol
            details.append(
                f"{kind}@rho={rho}: rbm={p_rbm:.3f} full={p_full:.3f} "
                f"diff={diff:.3f} tol={tol:.3f}"
            )
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1800
    report("lj-pressure-consistency", ok, "; ".join(details) + f"; {elapsed:.0f}s")
    for line in details:
        pass
    assert ok
    assert elapsed < 1800


# ---------------------------------------------------------------- criterion 8


def test_numerical_heating_mitigation(tmp_path):
    t0 = time.perf_counter()
    rho, n, samples, burn = 0.7, 500, 5000, 6.0
    thermostats10 = [
        {"kind": "andersen", "nu": 10.0},
        {"kind": "langevin", "gamma": 10.0},
    ]
    thermostats50 = [
        {"kind": "andersen", "nu": 50.0},
        {"kind": "langevin", "gamma": 50.0},
    ]
    oracle_rows, _ = _eos_run(
        tmp_path, "oracle", [rho], thermostats10, True, samples, burn, n=n
    )
    base_rows, _ = _eos_run(
        tmp_path, "base10", [rho], thermostats10, False, samples, burn, n=n
    )
    strong_rows, _ = _eos_run(
        tmp_path, "strong50", [rho], thermostats50, False, samples, burn, n=n
    )
    dec_rows, _ = _eos_run(
        tmp_path, "dec10", [rho], thermostats10, False, samples, burn, n=n,
        schedule="decreasing",
    )
    details = []
    ok = True
    for kind in ("andersen", "langevin"):
        p_oracle = rows_value(
            oracle_rows, series=f"{kind}-full", observable="pressure_mean"
        )[0]
        bias = {
            "fixed10": abs(
                rows_value(base_rows, series=f"{kind}-rbm",
                           observable="pressure_mean")[0] - p_oracle
            ),
            "fixed50": abs(
                rows_value(strong_rows, series=f"{kind}-rbm",
                           observable="pressure_mean")[0] - p_oracle
            ),
            "decreasing10": abs(
                rows_value(dec_rows, series=f"{kind}-rbm",
                           observable="pressure_mean")[0] - p_oracle
            ),
        }
        ok = ok and bias["fixed50"] < bias["fixed10"]
        ok = ok and bias["decreasing10"] < bias["fixed10"]
        details.append(
            f"{kind}: bias(nu=gamma=10)={bias['fixed10']:.3f}, "
            f"bias(50)={bias['fixed50']:.3f}, bias(dec)={bias['decreasing10']:.3f}"
        )
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 2700
    report("numerical-heating-mitigation", ok, "; ".join(details) + f"; {elapsed:.0f}s")
    assert ok
    assert elapsed < 2700


# ---------------------------------------------------------------- criterion 9


def test_linear_scaling(tmp_path):
    t0 = time.perf_counter()
    scenario = load_scenario("scaling", seed=ACCEPTANCE_SEED)
    result = run_scaling(scenario, tmp_path)
    rows = read_csv(result["outputs"]["scaling"])
    sizes = sorted({int(float(r["x"])) for r in rows})
    slopes = {}
    for series in ("split-rbm", "full"):
        times = [
            rows_value(rows, series=series, observable="step_time", x=n)[0]
            for n in sizes
        ]
        slopes[series] = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = 0.8 <= slopes["split-rbm"] <= 1.3 and slopes["full"] > 1.7 and elapsed < 600
    report(
        "linear-scaling",
        ok,
        f"split-rbm slope={slopes['split-rbm']:.2f}, full slope={slopes['full']:.2f} "
        f"over N={sizes}, {elapsed:.0f}s",
    )
    assert 0.8 <= slopes["split-rbm"] <= 1.3
    assert slopes["full"] > 1.7
    assert elapsed < 600


# --------------------------------------------------------------- criterion 10


def test_thermostat_sanity():
    t0 = time.perf_counter()
    beta = 0.5
    temperature = 1.0 / beta
    n, steps = 100, 1000  # 1e5 particle-steps
    zero = ForceField(FULL, kernel=None, external=lambda x: np.zeros_like(x))
    results = {}

    stream = RngStream(ACCEPTANCE_SEED).substream(10)
    state = ParticleState(
        np.zeros((n, 3)), velocity_init(n, 3, beta, stream.generator("velinit"))
    )
    temps = []
    run_baoab(state, zero, fixed_schedule(0.01), steps, 2.5, beta, stream,
              callback=lambda k, s: temps.append(instantaneous_temperature(s)))
    results["langevin"] = float(np.mean(temps))

    stream = RngStream(ACCEPTANCE_SEED).substream(11)
    state = ParticleState(
        np.zeros((n, 3)), velocity_init(n, 3, beta, stream.generator("velinit"))
    )
    temps = []
    run_verlet_andersen(state, zero, fixed_schedule(0.01), steps, 10.0,
                        temperature, stream,
                        callback=lambda k, s: temps.append(instantaneous_temperature(s)))
    results["andersen"] = float(np.mean(temps))
    elapsed = time.perf_counter() - t0
    ok = all(abs(v - temperature) / temperature < 0.05 for v in results.values())
    report(
        "thermostat-sanity",
        ok,
        f"langevin avg T={results['langevin']:.4f}, "
        f"andersen avg T={results['andersen']:.4f}, target {temperature}, "
        f"{elapsed:.1f}s",
    )
    for v in results.values():
        assert abs(v - temperature) / temperature < 0.05


# --------------------------------------------------------------- criterion 11


def test_csv_determinism(tmp_path):
    import json

    t0 = time.perf_counter()
    checked = []
    # estimator-checks and a small lj-eos + langevin1d scenario, twice each
    for family, overrides in (
        ("estimator-checks", {"run": {"mc_draws": 20000}}),
        (
            "lj-eos",
            {
                "system": {"n": 64, "densities": [0.4]},
                "run": {"burn_in": 0.2, "pressure_samples": 50},
            },
        ),
        (
            "langevin1d",
            {
                "system": {"n_equilibrium": 20, "n_strong": 8},
                "run": {
                    "equilibrium": {
                        "taus": [0.25],
                        "ref_tau": 2.0**-4,
                        "t_end": 4.0,
                        "burn_in": 2.0,
                        "sample_dt": 0.5,
                    },
                    "strong": {
                        "taus": [0.25],
                        "ref_tau": 2.0**-7,
                        "t_end": 0.5,
                        "repetitions": 2,
                    },
                },
            },
        ),
    ):
        cfg_path = tmp_path / f"{family}.json"
        cfg_path.write_text(json.dumps(overrides))
        digests = []
        for attempt in ("a", "b"):
            scenario = load_scenario(
                family, config_path=str(cfg_path), seed=ACCEPTANCE_SEED
            )
            out = tmp_path / f"{family}-{attempt}"
            result = run_scenario(scenario, out)
            digests.append(
                {
                    name: Path(path).read_bytes()
                    for name, path in result["outputs"].items()
                }
            )
        assert digests[0].keys() == digests[1].keys()
        for name in digests[0]:
            assert digests[0][name] == digests[1][name], f"{family}:{name} differs"
        checked.append(family)
    elapsed = time.perf_counter() - t0
    report(
        "determinism",
        True,
        f"bit-identical CSVs for {', '.join(checked)}, {elapsed:.0f}s",
    )

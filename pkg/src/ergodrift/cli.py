"""Experiment runner: seeded, reproducible CSV/JSON reports.

One experiment per invocation: `ergodrift <subcommand> --config <file>
[--seed N] [--out DIR]`, flags overriding file values.  Configs are flat
JSON objects with keys listed per experiment below; unknown keys are
rejected.  Every run echoes its resolved config into the output
directory and writes report.json (schema "ergodrift-report/1").

Stream splitting: each experiment derives its base entropy as
mix64(seed, experiment_id), and replicated operations split further by
replica index, so identical config + seed reproduces every CSV body
byte for byte.  Exit codes: 0 success, 2 validation error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    contraction_fraction,
    limit_direction,
    lyapunov_furstenberg,
    lyapunov_norm_growth,
)
from .errors import InputError
from .kernels import BACKEND
from .lattices import (
    DEFAULT_HC_DRIFT,
    DEFAULT_LATTICE_DRIFT,
    DEFAULT_RECURRENCE_DRIFT,
    DRIFT_HEIGHT_PARAMS,
    RECURRENCE_HEIGHT_PARAMS,
    HeightParams,
    LatticeDriftShipped,
    UnimodularLattice,
    drift_check_lattice,
    hc_check,
    recurrence_compact_test,
    stratified_lattice_samples,
)
from .matrices import GeneratorSystem, parse_system
from .shift import (
    WordStream,
    last_jump_law_test,
    mix64,
    parse_cocycle,
    solve_coboundary,
    suspension_rate_check,
)
from .torus import (
    DEFAULT_TORUS_DRIFT,
    TorusDriftParams,
    TorusPoint,
    drift_check_torus,
    enumerate_finite_orbit,
    finite_orbit_equidistribution,
    recurrence_off_finite_test,
    walk_empirical_measure,
)

__all__ = ["ExperimentConfig", "run", "main", "EXPERIMENT_IDS"]

# stable ids feeding the stream-splitting rule; never renumber
EXPERIMENT_IDS = {
    "lyapunov": 1,
    "limit-direction": 2,
    "contraction": 3,
    "last-jump": 4,
    "coboundary": 5,
    "suspension": 6,
    "walk-torus": 7,
    "finite-orbits": 8,
    "drift-torus": 9,
    "recurrence-torus": 10,
    "drift-lattice": 11,
    "recurrence-lattice": 12,
    "hc-check": 13,
}

_COMMON_KEYS = {"experiment", "system", "seed", "output"}
_EXPERIMENT_KEYS = {
    "lyapunov": {"steps", "replicates", "burn_in", "samples"},
    "limit-direction": {"steps"},
    "contraction": {"v", "q", "trials", "r0", "eta"},
    "last-jump": {"roof", "ell", "samples"},
    "coboundary": {"theta", "epsilon0", "p_max", "samples"},
    "suspension": {"roof", "ell"},
    "walk-torus": {"x0", "n", "k_max"},
    "finite-orbits": {"q_list", "k_max", "cap"},
    "drift-torus": {"q", "include_zero", "delta", "samples", "n_steps", "cap"},
    "recurrence-torus": {
        "q",
        "include_zero",
        "x0",
        "n",
        "eps",
        "replicas",
        "cap",
    },
    "drift-lattice": {"kappa", "delta", "c0", "samples", "n_steps"},
    "recurrence-lattice": {"basis", "n", "eps", "replicas", "kappa"},
    "hc-check": {"kappa", "delta", "c0", "pairs", "n_steps"},
}


@dataclasses.dataclass
class ExperimentConfig:
    experiment: str
    system: str
    seed: int
    output: str
    params: dict
    config_dir: Path

    @property
    def entropy(self) -> int:
        return mix64(self.seed, EXPERIMENT_IDS[self.experiment])


def _load_system(source: str, config_dir: Path) -> GeneratorSystem:
    text = source
    if "\n" not in source and not source.startswith("d="):
        path = (config_dir / source).resolve()
        if not path.is_file():
            raise InputError(
                f"system source {source!r} is neither inline text nor a file"
            )
        text = path.read_text(encoding="utf-8")
    return parse_system(text)


def validate_config(raw: dict, experiment: str, config_dir: Path) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise InputError("config must be a flat JSON object")
    if experiment not in EXPERIMENT_IDS:
        raise InputError(f"unknown experiment {experiment!r}")
    conf_exp = raw.get("experiment", experiment)
    if conf_exp != experiment:
        raise InputError(
            f"config names experiment {conf_exp!r} but {experiment!r} was invoked"
        )
    allowed = _COMMON_KEYS | _EXPERIMENT_KEYS[experiment]
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    if "system" not in raw and experiment != "suspension":
        raise InputError("config key 'system' is required")
    if "seed" not in raw:
        raise InputError("config key 'seed' is required")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not (
        0 <= seed < 2**64
    ):
        raise InputError("config key 'seed' must be a 64-bit integer")
    output = raw.get("output", ".")
    if not isinstance(output, str):
        raise InputError("config key 'output' must be a directory path")
    params = {
        k: v for k, v in raw.items() if k not in ("experiment", "system", "seed", "output")
    }
    return ExperimentConfig(
        experiment=experiment,
        system=raw.get("system", "d=2\n1 0 0 1"),
        seed=seed,
        output=output,
        params=params,
        config_dir=config_dir,
    )


def _fmt(value) -> str:
    """CSV cell text; floats as repr for byte-stable round trips."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _json_ready(value):
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, Path):
        return str(value)
    return value


def _int_param(params: dict, key: str, default=None, minimum=None):
    if key not in params:
        if default is None:
            raise InputError(f"config key {key!r} is required")
        return default
    v = params[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise InputError(f"config key {key!r} must be an integer")
    if minimum is not None and v < minimum:
        raise InputError(f"config key {key!r} must be >= {minimum}")
    return v


def _real_param(params: dict, key: str, default=None):
    if key not in params:
        if default is None:
            raise InputError(f"config key {key!r} is required")
        return default
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"config key {key!r} must be a number")
    return float(v)


def _parse_point(spec, dim: int) -> TorusPoint:
    if isinstance(spec, str):
        toks = [t.strip() for t in spec.split(",")]
    elif isinstance(spec, list):
        toks = [str(t) for t in spec]
    else:
        raise InputError("torus point must be 'a/b,c/d' text or a list")
    if len(toks) != dim:
        raise InputError(f"torus point needs {dim} coordinates")
    if any("." in t or "e" in t.lower() for t in toks):
        try:
            return TorusPoint.double([float(t) for t in toks])
        except ValueError as exc:
            raise InputError(f"bad torus point {spec!r}") from exc
    try:
        return TorusPoint.rational([Fraction(t) for t in toks])
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad torus point {spec!r}") from exc


def _orbit_with_zero(system: GeneratorSystem, params: dict):
    q = _int_param(params, "q", minimum=2)
    cap = _int_param(params, "cap", default=250_000, minimum=1)
    base = TorusPoint.rational([Fraction(1, q)] + [Fraction(0)] * (system.dim - 1))
    orbit = enumerate_finite_orbit(system, base, cap=cap)
    if not isinstance(orbit, tuple):
        raise InputError(f"orbit of 1/{q} exceeded the cap {cap}")
    pts = list(orbit)
    if params.get("include_zero", True):
        zero = TorusPoint.rational([Fraction(0)] * system.dim)
        if zero not in pts:
            pts.append(zero)
    return tuple(pts)


def _run_lyapunov(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    steps = _int_param(config.params, "steps", minimum=100)
    replicates = _int_param(config.params, "replicates", default=8, minimum=2)
    burn_in = _int_param(config.params, "burn_in", default=100, minimum=50)
    samples = _int_param(config.params, "samples", default=4000, minimum=1)
    ent = config.entropy
    norm = lyapunov_norm_growth(system, steps, replicates, ent)
    furst = lyapunov_furstenberg(system, burn_in, samples, ent)
    rows = [
        ["norm_growth", norm.steps, norm.replicates, norm.value, norm.stderr, config.seed],
        ["furstenberg", furst.steps, furst.replicates, furst.value, furst.stderr, config.seed],
    ]
    _write_csv(out / "lyapunov.csv", ["method", "steps", "replicates", "value", "stderr", "seed"], rows)
    diff = abs(norm.value - furst.value)
    sigma = (norm.stderr**2 + furst.stderr**2) ** 0.5
    # rounding floor keeps deterministic systems (stderr 0) agreeing
    tol = 3.0 * sigma + 1e-12 * max(1.0, abs(norm.value))
    return {
        "norm_growth": {"value": norm.value, "stderr": norm.stderr},
        "furstenberg": {
            "value": furst.value,
            "stderr": furst.stderr,
            "refusals": furst.refusals,
        },
        "difference": diff,
        "combined_stderr": sigma,
        "agree_3sigma": bool(diff <= tol),
    }


def _run_limit_direction(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    steps = _int_param(config.params, "steps", minimum=10)
    stream = WordStream.for_system(system, mix64(config.entropy, 0))
    ld = limit_direction(system, stream, steps)
    rows = [
        [i, float(ld.v_b[i, 0]), float(ld.v_prime_b[i, 0])]
        for i in range(ld.v_b.shape[0])
    ]
    _write_csv(out / "direction.csv", ["component", "v_b", "v_prime_b"], rows)
    return {
        "residual": ld.residual,
        "gap": ld.gap,
        "low_confidence": bool(ld.low_confidence),
        "confident": bool(ld.confident),
        "steps": steps,
    }


def _run_contraction(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    q = _int_param(config.params, "q", minimum=1)
    trials = _int_param(config.params, "trials", default=400, minimum=100)
    r0 = _real_param(config.params, "r0")
    eta = _real_param(config.params, "eta", default=0.05)
    vspec = config.params.get("v")
    if vspec is None:
        raise InputError("config key 'v' is required")
    v = np.array([float(t) for t in (vspec if isinstance(vspec, list) else str(vspec).split(","))])
    rep = contraction_fraction(system, v, q, trials, r0, eta, config.entropy)
    _write_csv(
        out / "contraction.csv",
        ["q", "trials", "r0", "eta", "frac_a", "frac_b", "seed"],
        [[rep.q, rep.trials, rep.r0, rep.eta, rep.frac_a, rep.frac_b, config.seed]],
    )
    return {"frac_a": rep.frac_a, "frac_b": rep.frac_b, "q": q, "trials": trials}


def _cocycle_from(config: ExperimentConfig, key: str, system: GeneratorSystem):
    spec = config.params.get(key)
    if not isinstance(spec, str):
        raise InputError(f"config key {key!r} must be a cocycle spec string")

    def loader(fname: str) -> str:
        path = (config.config_dir / fname).resolve()
        if not path.is_file():
            raise InputError(f"cocycle table file {fname!r} not found")
        return path.read_text(encoding="utf-8")

    return parse_cocycle(spec, system.n_letters, loader)


def _run_last_jump(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    roof = _cocycle_from(config, "roof", system)
    ell = _real_param(config.params, "ell")
    samples = _int_param(config.params, "samples", minimum=100)
    rep = last_jump_law_test(system, roof, ell, samples, config.entropy)
    freq = rep.frequencies_single()
    wts = system.weight_floats()
    rows = [
        [a, int(rep.counts_single[a]), float(freq[a]), float(wts[a])]
        for a in range(system.n_letters)
    ]
    _write_csv(out / "lastjump.csv", ["letter", "count", "frequency", "expected"], rows)
    pair_rows = []
    for a1 in range(system.n_letters):
        for a0 in range(system.n_letters):
            pair_rows.append(
                [
                    a1,
                    a0,
                    int(rep.counts_pair[a1, a0]),
                    float(wts[a1] * wts[a0]),
                ]
            )
    _write_csv(out / "lastjump_pairs.csv", ["a1", "a0", "count", "expected"], pair_rows)
    return {
        "samples": rep.samples,
        "ell": rep.ell,
        "pvalue_single": rep.pvalue_single,
        "pvalue_pair": rep.pvalue_pair,
        "single_hypothesis_met": bool(rep.single_hypothesis_met),
        "pair_hypothesis_met": bool(rep.pair_hypothesis_met),
        "mean_q": rep.mean_q,
    }


def _run_coboundary(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    theta = _cocycle_from(config, "theta", system)
    epsilon0 = _real_param(config.params, "epsilon0")
    p_max = _int_param(config.params, "p_max", minimum=1)
    samples = _int_param(config.params, "samples", default=2000, minimum=1)
    stream = WordStream.for_system(system, mix64(config.entropy, 0))
    sol = solve_coboundary(theta, epsilon0, p_max, stream)
    psi, stab = sol.psi_values(stream, samples)
    tau, _ = sol.tau_values(stream, samples)
    phi, _ = sol.phi_values(stream, samples)
    theta_vals = theta.values_from_letters(
        stream.letters(samples + theta.depth - 1), samples
    )
    shifted_phi, _ = sol.phi_values(stream.advance(1), samples)
    residual = np.abs(theta_vals - (tau + shifted_phi - phi))
    rows = [
        [i, float(psi[i]), float(tau[i]), float(phi[i]), bool(stab[i]), float(residual[i])]
        for i in range(samples)
    ]
    _write_csv(
        out / "coboundary.csv",
        ["index", "psi", "tau", "phi", "stabilized", "identity_residual"],
        rows,
    )
    stab_frac = float(np.mean(stab))
    return {
        "mean_theta": sol.mean_theta,
        "mean_source": sol.mean_source,
        "epsilon0": epsilon0,
        "p_max": p_max,
        "stabilized_fraction": stab_frac,
        "max_identity_residual_on_stabilized": float(
            residual[np.asarray(stab, dtype=bool)].max() if stab_frac > 0 else np.nan
        ),
        "min_tau": float(tau.min()),
    }


def _run_suspension(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    roof = _cocycle_from(config, "roof", system)
    ell = _real_param(config.params, "ell")
    stream = WordStream.for_system(system, mix64(config.entropy, 0))
    rep = suspension_rate_check(roof, stream, ell)
    _write_csv(
        out / "suspension.csv",
        ["ell", "jumps", "jump_rate", "birkhoff_average", "mean_roof", "final_fiber"],
        [
            [
                ell,
                rep["jumps"],
                rep["jump_rate"],
                rep["birkhoff_average"],
                rep["mean_roof"],
                rep["final_fiber"],
            ]
        ],
    )
    return rep


def _run_walk_torus(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    x0 = _parse_point(config.params.get("x0", "0,0"), system.dim)
    n = _int_param(config.params, "n", minimum=1)
    k_max = _int_param(config.params, "k_max", default=5, minimum=1)
    summary = walk_empirical_measure(system, x0, n, config.entropy, k_max)
    rows = []
    for i in range(summary.kvecs.shape[0]):
        k = summary.kvecs[i]
        c = summary.coefficients[i]
        rows.append(list(k) + [float(c.real), float(c.imag), float(abs(c))])
    kcols = [f"k_{j}" for j in range(system.dim)]
    _write_csv(out / "walk_fourier.csv", kcols + ["re", "im", "abs"], rows)
    return {
        "n": summary.n,
        "k_max": summary.k_max,
        "sup_nonzero": summary.sup_nonzero,
        "exact": bool(summary.exact),
        "include_start": bool(summary.include_start),
        "detected_torsion": {str(k): abs(v) for k, v in summary.detected.items()},
        "convention": "forward products g_n...g_1 x0",
    }


def _run_finite_orbits(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    q_list = config.params.get("q_list")
    if not isinstance(q_list, list) or not q_list or not all(
        isinstance(q, int) and not isinstance(q, bool) and q >= 2 for q in q_list
    ):
        raise InputError("config key 'q_list' must be a list of integers >= 2")
    k_max = _int_param(config.params, "k_max", default=3, minimum=1)
    cap = _int_param(config.params, "cap", default=250_000, minimum=1)
    rows = finite_orbit_equidistribution(system, q_list, k_max, cap=cap)
    _write_csv(
        out / "orbits.csv",
        ["q", "orbit_size", "sup_fourier"],
        [[r.q, r.orbit_size, r.sup_fourier] for r in rows],
    )
    for r in rows:
        base = TorusPoint.rational(
            [Fraction(1, r.q)] + [Fraction(0)] * (system.dim - 1)
        )
        orbit = enumerate_finite_orbit(system, base, cap=cap)
        dump = []
        for pt in orbit:
            dump.append(list(pt.nums) + [pt.den])
        cols = [f"num_{j}" for j in range(system.dim)] + ["den"]
        _write_csv(out / f"orbit_q{r.q}.csv", cols, dump)
    return {
        "q_list": q_list,
        "k_max": k_max,
        "all_exact": bool(all(r.exact for r in rows)),
        "sup_fourier": {str(r.q): str(r.sup_fourier) for r in rows},
        "aliased_counts": {str(r.q): r.aliased_count for r in rows},
        "strictly_decreasing": bool(
            all(
                float(rows[i].sup_fourier) > float(rows[i + 1].sup_fourier)
                for i in range(len(rows) - 1)
            )
        ),
        "convention": "forward products g_n...g_1 x0",
    }


def _drift_json(out: Path, params: dict, rep, seed: int, count_key: str, count: int):
    payload = {
        "params": params,
        "a_hat": rep.a_hat,
        "C_hat": rep.C_hat,
        "violation_rate": rep.violation_rate,
        count_key: count,
        "seed": seed,
    }
    (out / "drift.json").write_text(
        json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return payload


def _run_drift_torus(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    F = _orbit_with_zero(system, config.params)
    delta = _real_param(config.params, "delta", default=DEFAULT_TORUS_DRIFT.delta)
    samples = _int_param(config.params, "samples", default=400, minimum=100)
    n_steps = _int_param(
        config.params, "n_steps", default=DEFAULT_TORUS_DRIFT.n_steps, minimum=1
    )
    rep = drift_check_torus(system, F, delta, samples, config.entropy, n_steps=n_steps)
    params = {
        "delta": delta,
        "n_steps": n_steps,
        "plateau": rep.plateau,
        "orbit_size": len(F),
        "shipped_a": DEFAULT_TORUS_DRIFT.a,
        "shipped_C": DEFAULT_TORUS_DRIFT.C,
    }
    return _drift_json(out, params, rep, config.seed, "samples", rep.samples)


def _run_recurrence_torus(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    F = _orbit_with_zero(system, config.params)
    x0 = _parse_point(config.params.get("x0", "0.1234,0.567"), system.dim)
    n = _int_param(config.params, "n", minimum=1)
    eps = _real_param(config.params, "eps", default=0.1)
    replicas = _int_param(config.params, "replicas", default=200, minimum=1)
    rep = recurrence_off_finite_test(system, F, x0, n, eps, config.entropy, replicas)
    rows = [
        [rep.n_grid[i], rep.fraction_in_K[i], rep.diagnostic_fraction[i]]
        for i in range(len(rep.n_grid))
    ]
    _write_csv(
        out / "occupation.csv", ["n", "fraction_in_K", "diagnostic_fraction"], rows
    )
    return {
        "onset_n": rep.onset_n,
        "threshold": rep.threshold,
        "radius": rep.radius,
        "diagnostic_radius": rep.diagnostic_radius,
        "replicas": rep.replicas,
        "final_fraction": rep.fraction_in_K[-1],
    }


def _lattice_params(params: dict, defaults: HeightParams) -> HeightParams:
    return HeightParams(
        kappa=_real_param(params, "kappa", default=defaults.kappa),
        delta=_real_param(params, "delta", default=defaults.delta),
        c0=_real_param(params, "c0", default=defaults.c0),
    )


def _run_drift_lattice(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    hp = _lattice_params(config.params, DRIFT_HEIGHT_PARAMS)
    samples = _int_param(config.params, "samples", default=300, minimum=100)
    n_steps = _int_param(
        config.params, "n_steps", default=DEFAULT_LATTICE_DRIFT.n_steps, minimum=1
    )
    rep = drift_check_lattice(system, hp, samples, config.entropy, n_steps=n_steps)
    anchors = stratified_lattice_samples(samples, config.entropy)
    rows = [
        [
            float(x.basis[0, 0]),
            float(x.basis[0, 1]),
            float(x.basis[1, 0]),
            float(x.basis[1, 1]),
            x.lambda_min,
        ]
        for x in anchors
    ]
    _write_csv(
        out / "lattices.csv", ["b00", "b01", "b10", "b11", "lambda_min"], rows
    )
    params = {
        "kappa": hp.kappa,
        "delta": hp.delta,
        "c0": hp.c0,
        "n_steps": n_steps,
        "shipped_a": DEFAULT_LATTICE_DRIFT.a,
        "shipped_C": DEFAULT_LATTICE_DRIFT.C,
    }
    return _drift_json(out, params, rep, config.seed, "samples", rep.samples)


def _run_recurrence_lattice(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    basis = config.params.get("basis")
    if (
        not isinstance(basis, list)
        or len(basis) != 4
        or not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in basis)
    ):
        raise InputError("config key 'basis' must be 4 numbers, row-major")
    x0 = UnimodularLattice(np.array(basis, dtype=float).reshape(2, 2))
    n = _int_param(config.params, "n", minimum=1)
    eps = _real_param(config.params, "eps", default=0.1)
    replicas = _int_param(config.params, "replicas", default=200, minimum=1)
    kappa = _real_param(config.params, "kappa", default=RECURRENCE_HEIGHT_PARAMS.kappa)
    hp = HeightParams(
        kappa=kappa,
        delta=RECURRENCE_HEIGHT_PARAMS.delta,
        c0=RECURRENCE_HEIGHT_PARAMS.c0,
    )
    rep = recurrence_compact_test(
        system, x0, n, eps, config.entropy, replicas, params=hp
    )
    rows = [
        [rep.n_grid[i], rep.fraction_in_K[i]] for i in range(len(rep.n_grid))
    ]
    _write_csv(out / "occupation.csv", ["n", "fraction_in_K"], rows)
    return {
        "onset_n": rep.onset_n,
        "threshold": rep.threshold,
        "height_bound": rep.height_bound,
        "replicas": rep.replicas,
        "final_fraction": rep.fraction_in_K[-1],
        "shipped_a": DEFAULT_RECURRENCE_DRIFT.a,
        "shipped_C": DEFAULT_RECURRENCE_DRIFT.C,
    }


def _run_hc_check(config: ExperimentConfig, system: GeneratorSystem, out: Path):
    hp = _lattice_params(config.params, DRIFT_HEIGHT_PARAMS)
    pairs = _int_param(config.params, "pairs", default=200, minimum=100)
    n_steps = _int_param(
        config.params, "n_steps", default=DEFAULT_HC_DRIFT.n_steps, minimum=1
    )
    rep = hc_check(system, hp, pairs, config.entropy, n_steps=n_steps)
    params = {
        "kappa": hp.kappa,
        "delta": hp.delta,
        "c0": hp.c0,
        "n_steps": n_steps,
        "shipped_a": DEFAULT_HC_DRIFT.a,
        "shipped_C": DEFAULT_HC_DRIFT.C,
    }
    payload = {
        "params": params,
        "a_hat": rep.a_hat,
        "C_hat": rep.C_hat,
        "violation_rate": rep.violation_rate,
        "pairs": rep.pairs,
        "seed": config.seed,
    }
    (out / "hc.json").write_text(
        json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return payload


_RUNNERS = {
    "lyapunov": _run_lyapunov,
    "limit-direction": _run_limit_direction,
    "contraction": _run_contraction,
    "last-jump": _run_last_jump,
    "coboundary": _run_coboundary,
    "suspension": _run_suspension,
    "walk-torus": _run_walk_torus,
    "finite-orbits": _run_finite_orbits,
    "drift-torus": _run_drift_torus,
    "recurrence-torus": _run_recurrence_torus,
    "drift-lattice": _run_drift_lattice,
    "recurrence-lattice": _run_recurrence_lattice,
    "hc-check": _run_hc_check,
}


def run(config: ExperimentConfig) -> int:
    """Execute the configured experiment; returns the process exit code."""
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    echo = {"experiment": config.experiment, "system": config.system, "seed": config.seed, "output": str(config.output)}
    echo.update(config.params)
    (out / "config_echo.json").write_text(
        json.dumps(_json_ready(echo), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    report = {
        "schema": "ergodrift-report/1",
        "experiment": config.experiment,
        "version": __version__,
        "backend": BACKEND,
        "seed": config.seed,
        "config": _json_ready(echo),
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "summary": None,
        "error": None,
    }
    code = 0
    try:
        system = _load_system(config.system, config.config_dir)
        report["summary"] = _json_ready(_RUNNERS[config.experiment](config, system, out))
    except InputError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 2
    except RuntimeError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 3
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ergodrift",
        description="Random matrix products, suspension flows, and drift diagnostics.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENT_IDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
    args = parser.parse_args(argv)
    config_path = Path(args.config)
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        print(f"config file {args.config!r} not found", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if isinstance(raw, dict):
            raw["seed"] = args.seed
    if args.out is not None:
        if isinstance(raw, dict):
            raw["output"] = args.out
    try:
        config = validate_config(raw, args.experiment, config_path.parent)
    except InputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    code = run(config)
    if code != 0:
        rep = json.loads((Path(config.output) / "report.json").read_text())
        err = rep.get("error") or {}
        print(f"{err.get('type', 'Error')}: {err.get('message', '')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

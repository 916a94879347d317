"""Command-line front end: ``zfdd --config run.json``.

Exit codes: 0 success, 2 configuration error, 3 physics-domain error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .grape import (DEFAULT_PAIR_TAUS, ErrorEnsemble, default_ensemble, figure_of_merit,
                    ideal_pi_pair, optimize_pair, seed_pair)
from .hamiltonians import A_PAR_MHZ, D_ZFS_MHZ, GAMMA_NV_MHZ_PER_G, StrainParams, SystemParams
from .kernel import ContractError, dominant_frequencies
from .sequences import LDD_NAMES, PhaseSequence, get_sequence, ldd_phases
from .experiments import (AcField, SensitivityParams, d_ramsey, damped_cosine_fit, dd_ac_scan,
                          dd_sensitivity, dip_position, eta_at, hyperfine_from_lines, point_rngs,
                          rabi, ramsey, ramsey_sensitivity, resolve_threads, robustness_map,
                          robustness_trace, shot_noise, strain_robustness, write_csv, write_sidecar)
from .experiments.parallel import THREADS_ENV

COMMANDS = {
    "rabi": "|0> population under continuous drive and its spectral lines",
    "ramsey": "double-quantum Ramsey trace, spectrum and hyperfine estimate",
    "ddscan": "DD readout versus pulse spacing, optionally with an AC field",
    "robustness": "mean readout over the standard spacing window (decoupling metric)",
    "robustness_map": "|+> fidelity over a (Rabi error, detuning) grid",
    "dramsey": "D-Ramsey thermometry trace with damped-cosine fit",
    "strain": "robustness map under transverse and longitudinal strain",
    "grape": "optimise a cooperative pulse pair on an error ensemble",
    "sensitivity": "shot-noise limited Ramsey and DD sensitivity",
    "ldd_phases": "phase table of a decoupling sequence",
}


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


SYSTEM_KEYS = {
    "omega_mhz": ("Omega", 20.0), "delta_mhz": ("Delta", 0.0), "omega0_mhz": ("omega0", 0.0),
    "d_mhz": ("D", D_ZFS_MHZ), "omega_c_mhz": ("omega_c", D_ZFS_MHZ), "phi_rad": ("phi", 0.0),
    "a_par_mhz": ("A_par", A_PAR_MHZ), "gamma_nv_mhz_per_g": ("gamma_nv", GAMMA_NV_MHZ_PER_G),
}
STRAIN_KEYS = {"xi_perp_mhz": ("xi_perp", 0.0), "chi_rad": ("chi", 0.0),
               "d_par_pi_z_mhz": ("d_par_Pi_z", 0.0)}
AC_KEYS = {"delta_amp_mhz": 0.0, "freq_mhz": 0.3, "phase0_rad": "average", "n_phase": 16}
GRAPE_KEYS = {"pulse_ns": 100.0, "dt_ns": 1.0, "omega_max_mhz": 20.0, "max_iters": 500,
              "target_phi": 1.0 - 1e-6, "pair_tau_us": list(DEFAULT_PAIR_TAUS), "seed_noise": 0.25,
              "target": "qubit"}
SWEEP_KEYS = {
    "t_max_us": 1.0, "dt_us": 0.001, "b_gauss": 0.0, "nuclear_avg": True,
    "tau_start_us": None, "tau_stop_us": None, "tau_step_us": None, "repetitions": 1,
    "delta_axis_mhz": [-4.32, 4.32, 21], "alpha_axis": [-0.2, 0.2, 21], "tau_us": 1.0 / 0.6,
    "pulse_kind": "standard", "n_pulses": 8, "delta_d_mhz": 1.0, "n_peaks": 3,
}
SENS_KEYS = {"kind": "ramsey", "contrast": 0.355, "t2_us": 2.1, "p": 2.1, "t_i_us": 0.0226,
             "t_r_us": 1.3, "n_avg": 0.045, "tau_us": None, "delta_ms": 2, "k": None, "s": 0.0}
NOISE_KEYS = {"n_avg": 0.045, "n_shots": 100000}
TOP_KEYS = {"command", "system", "strain", "sequence", "ac", "grape", "sweep", "sensitivity",
            "noise", "output", "seed"}

TAU_DEFAULTS = {"ramsey": (0.0, 20.0, 0.005), "ddscan": (1.45, 1.9, 0.005),
                "robustness": (0.125, 2.105, 0.02), "dramsey": (0.1, 2.6, 0.01)}


@dataclass
class RunConfig:
    command: str
    system: SystemParams
    strain: StrainParams | None
    sequence: object
    ac: AcField | None
    grape: dict
    sweep: dict
    sensitivity: dict
    noise: dict | None
    output: str
    seed: int
    echo: dict = field(default_factory=dict)


def _block(raw, name, allowed):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"'{name}' must be an object")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key '{name}.{unknown[0]}'; allowed: {', '.join(sorted(allowed))}")
    return raw


def _num(v, key, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"'{key}' must be an integer, got {v!r}")
        return int(v)
    return float(v)


def _merge(raw, name, defaults):
    raw = _block(raw, name, defaults)
    out = {}
    for k, d in defaults.items():
        v = raw.get(k, d)
        if v is None:
            out[k] = None
        elif isinstance(d, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"'{name}.{k}' must be true or false")
            out[k] = v
        elif isinstance(d, (int, float)) and not isinstance(d, bool):
            out[k] = _num(v, f"{name}.{k}", int if isinstance(d, int) else float)
        elif isinstance(d, list):
            if not isinstance(v, list) or not all(isinstance(x, (int, float)) for x in v):
                raise ConfigError(f"'{name}.{k}' must be a list of numbers")
            out[k] = [float(x) for x in v]
        elif isinstance(d, str) and k != "phase0_rad":
            if not isinstance(v, str):
                raise ConfigError(f"'{name}.{k}' must be a string")
            out[k] = v
        else:
            out[k] = v if isinstance(v, str) else _num(v, f"{name}.{k}")
    return out


def _sequence(raw):
    if raw is None:
        return None
    try:
        if isinstance(raw, str):
            if raw == "OC":
                return "OC"
            return get_sequence(raw)
        if isinstance(raw, dict):
            _block(raw, "sequence", {"name", "phases_rad", "n_pulses"})
            if "phases_rad" not in raw:
                return get_sequence(raw.get("name", ""))
            ph = raw["phases_rad"]
            if not isinstance(ph, list) or not all(isinstance(x, (int, float)) for x in ph):
                raise ConfigError("'sequence.phases_rad' must be a list of numbers")
            return PhaseSequence.from_dict({"name": str(raw.get("name", "custom")), **raw})
    except ContractError as exc:
        raise ConfigError(f"'sequence': {exc}") from None
    raise ConfigError("'sequence' must be a name or an object with 'phases_rad'")


def parse_config(doc: dict) -> RunConfig:
    """Strictly validate a decoded JSON configuration and fill in defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(doc) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'; allowed: {', '.join(sorted(TOP_KEYS))}")
    cmd = doc.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"'command' must be one of: {', '.join(COMMANDS)}")
    sys_raw = _block(doc.get("system"), "system", SYSTEM_KEYS)
    sys_kw = {}
    for k, (attr, d) in SYSTEM_KEYS.items():
        sys_kw[attr] = _num(sys_raw.get(k, d), f"system.{k}")
    try:
        system = SystemParams(**sys_kw)
    except ContractError as exc:
        raise ConfigError(f"'system': {exc}") from None
    strain = None
    if doc.get("strain") is not None:
        st_raw = _block(doc["strain"], "strain", STRAIN_KEYS)
        strain = StrainParams(**{a: _num(st_raw.get(k, d), f"strain.{k}")
                                 for k, (a, d) in STRAIN_KEYS.items()})
    ac = None
    ac_echo = None
    if doc.get("ac") is not None:
        ac_echo = _merge(doc["ac"], "ac", AC_KEYS)
        try:
            ac = AcField(ac_echo["delta_amp_mhz"], ac_echo["freq_mhz"], ac_echo["phase0_rad"],
                         int(ac_echo["n_phase"]))
        except ContractError as exc:
            raise ConfigError(f"'ac': {exc}") from None
    grape = _merge(doc.get("grape"), "grape", GRAPE_KEYS)
    sweep = _merge(doc.get("sweep"), "sweep", SWEEP_KEYS)
    sens = _merge(doc.get("sensitivity"), "sensitivity", SENS_KEYS)
    noise = _merge(doc["noise"], "noise", NOISE_KEYS) if doc.get("noise") is not None else None
    raw_seq = doc.get("sequence")
    if cmd in ("ddscan", "robustness", "robustness_map", "strain", "ldd_phases") and raw_seq is None:
        raise ConfigError(f"command '{cmd}' needs 'sequence'")
    if cmd == "ldd_phases":
        name = raw_seq.get("name") if isinstance(raw_seq, dict) else raw_seq
        if name not in LDD_NAMES:
            raise ConfigError(f"'sequence': unknown LDD sequence {name!r}; valid names: {', '.join(LDD_NAMES)}")
    seq = _sequence(raw_seq)
    seed = doc.get("seed", 0)
    seed = _num(seed, "seed", int)
    if seed < 0:
        raise ConfigError("'seed' must be non-negative")
    output = doc.get("output", "zfdd_out")
    if not isinstance(output, str):
        raise ConfigError("'output' must be a path string")
    echo = {
        "command": cmd,
        "system": {k: sys_kw[a] for k, (a, _) in SYSTEM_KEYS.items()},
        "strain": None if strain is None else {k: getattr(strain, a) for k, (a, _) in STRAIN_KEYS.items()},
        "sequence": seq if isinstance(seq, str) or seq is None else seq.to_dict(),
        "ac": ac_echo, "grape": grape, "sweep": sweep, "sensitivity": sens, "noise": noise,
        "output": output, "seed": seed,
    }
    return RunConfig(cmd, system, strain, seq, ac, grape, sweep, sens, noise, output, seed, echo)


def _tau_grid(cfg: RunConfig):
    start, stop, step = TAU_DEFAULTS[cfg.command]
    sw = cfg.sweep
    start = sw["tau_start_us"] if sw["tau_start_us"] is not None else start
    stop = sw["tau_stop_us"] if sw["tau_stop_us"] is not None else stop
    step = sw["tau_step_us"] if sw["tau_step_us"] is not None else step
    if step <= 0 or stop < start:
        raise ConfigError("'sweep' tau grid needs tau_step_us > 0 and tau_stop_us >= tau_start_us")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _axis(v, key):
    if len(v) != 3 or v[2] < 1 or int(v[2]) != v[2]:
        raise ConfigError(f"'sweep.{key}' must be [start, stop, count]")
    return np.linspace(v[0], v[1], int(v[2]))


def _grape_pair(cfg: RunConfig, ensemble: ErrorEnsemble | None = None, target: str | None = None):
    g = cfg.grape
    n = g["pulse_ns"] / g["dt_ns"]
    if abs(n - round(n)) > 1e-9:
        raise ConfigError("'grape.dt_ns' must divide 'grape.pulse_ns'")
    ens = ensemble or default_ensemble()
    seeds = seed_pair(int(round(n)), g["dt_ns"], g["omega_max_mhz"], cfg.seed, g["seed_noise"])
    res = optimize_pair(seeds, ens, g["max_iters"], g["target_phi"], taus=tuple(g["pair_tau_us"]),
                        target=target or g["target"])
    return res, ens


def _noisy(cfg, y):
    if cfg.noise is None:
        return y
    rngs = point_rngs(cfg.seed, len(y))
    return np.array([shot_noise([v], cfg.noise["n_avg"], int(cfg.noise["n_shots"]), r)[0]
                     for v, r in zip(y, rngs)])


def execute(cfg: RunConfig, threads: int | None = None):
    """Run one command; returns ``(columns, results)`` for the CSV and the sidecar."""
    p, sw = cfg.system, cfg.sweep
    cmd = cfg.command
    if cmd == "rabi":
        ts = rabi(p, sw["t_max_us"], sw["dt_us"])
        peaks = dominant_frequencies(ts, k=int(sw["n_peaks"]))
        return {"t_us": ts.t, "p0": _noisy(cfg, ts.y)}, {"peaks_mhz": peaks.frequencies}
    if cmd == "ramsey":
        ts, peaks = ramsey(p, sw["b_gauss"], _tau_grid(cfg), sw["nuclear_avg"], int(sw["n_peaks"]))
        res = {"peaks_mhz": peaks.frequencies, "resolution_mhz": peaks.resolution}
        if sw["b_gauss"] == 0:
            try:
                res["a_par_estimate_mhz"] = hyperfine_from_lines(peaks)
            except ContractError:
                res["a_par_estimate_mhz"] = None
        return {"tau_us": ts.t, "p0": _noisy(cfg, ts.y)}, res
    if cmd == "ddscan":
        seq = cfg.sequence
        res = {}
        if seq == "OC":
            gres, _ = _grape_pair(cfg)
            seq = gres.pulses
            res["grape_phi"] = gres.phi
        ts = dd_ac_scan(seq, p, cfg.ac, _tau_grid(cfg), repetitions=int(sw["repetitions"]),
                        nuclear_avg=sw["nuclear_avg"], threads=threads)
        res.update(dip_tau_us=dip_position(ts), mean=float(np.mean(ts.y)))
        return {"tau_us": ts.t, "p0": _noisy(cfg, ts.y)}, res
    if cmd == "robustness":
        seq = cfg.sequence
        if seq == "OC":
            seq = _grape_pair(cfg)[0].pulses
        ts = robustness_trace(seq, p, _tau_grid(cfg), repetitions=int(sw["repetitions"]))
        return {"tau_us": ts.t, "p0": ts.y}, {"metric": float(np.mean(ts.y))}
    if cmd in ("robustness_map", "strain"):
        da = _axis(sw["delta_axis_mhz"], "delta_axis_mhz")
        aa = _axis(sw["alpha_axis"], "alpha_axis")
        if cmd == "strain":
            grid = strain_robustness(cfg.sequence, cfg.strain or StrainParams(), aa, da,
                                     Omega=p.Omega, tau=sw["tau_us"])
        else:
            grid = robustness_map(cfg.sequence, da, aa, Omega=p.Omega, tau=sw["tau_us"])
        A, Dl = np.meshgrid(aa, da, indexing="ij")
        return ({"alpha": A.ravel(), "delta_mhz": Dl.ravel(), "fidelity": grid.values.ravel()},
                {"median": grid.median})
    if cmd == "dramsey":
        pair = None
        res = {}
        if sw["pulse_kind"] == "OC pair":
            # optimise at the operating point: nuclear detunings, drive offset delta_d +- 0.1 MHz
            dd = sw["delta_d_mhz"]
            ens = ErrorEnsemble.grid([-p.A_par, 0.0, p.A_par], [0.0], [dd - 0.1, dd, dd + 0.1])
            gres, _ = _grape_pair(cfg, ens, target="block")
            pair = gres.pulses
            res["grape_phi"] = gres.phi
        ts = d_ramsey(sw["delta_d_mhz"], int(sw["n_pulses"]), sw["pulse_kind"], _tau_grid(cfg),
                      Omega=p.Omega, nuclear_avg=sw["nuclear_avg"], A_par=p.A_par, oc_pair=pair)
        peaks = dominant_frequencies(ts, k=int(sw["n_peaks"]))
        params, rms = damped_cosine_fit(ts)
        res.update(peaks_mhz=peaks.frequencies, fit_params=list(params), fit_rms=rms)
        return {"tau_us": ts.t, "p0": _noisy(cfg, ts.y)}, res
    if cmd == "grape":
        gres, ens = _grape_pair(cfg)
        g = cfg.grape
        taus = tuple(g["pair_tau_us"])
        b = 1 - figure_of_merit(ideal_pi_pair(g["omega_max_mhz"]), ens, taus=taus, target=g["target"])
        p1, p2 = gres.pulses
        cols = {"bin_index": np.arange(p1.n_bins), "time_ns": np.arange(p1.n_bins) * p1.dt,
                "pulse1_MHz": p1.amplitudes, "pulse2_MHz": p2.amplitudes}
        return cols, {"final_phi": gres.phi, "baseline_infidelity": b, "infidelity": 1 - gres.phi,
                      "history": gres.history, "converged": gres.converged,
                      "flip_quality": list(gres.flip_quality), "ensemble": ens.to_dict()}
    if cmd == "sensitivity":
        s = cfg.sensitivity
        try:
            sp = SensitivityParams(s["contrast"], s["t2_us"], s["p"], s["t_i_us"], s["t_r_us"],
                                   s["n_avg"], int(s["delta_ms"]), s["tau_us"])
        except ContractError as exc:
            raise ConfigError(f"'sensitivity': {exc}") from None
        if s["kind"] == "ramsey":
            eta, tau = ramsey_sensitivity(sp)
            grid = np.linspace(0.05, 3 * sp.T2, 300)
            return ({"tau_us": grid, "eta_T_per_rtHz": [eta_at(sp, t) for t in grid]},
                    {"eta_T_per_rtHz": eta, "tau_opt_us": tau})
        if s["kind"] == "dd":
            k = None if s["k"] is None else int(s["k"])
            eta, k = dd_sensitivity(sp, k, s["s"])
            ks = np.arange(1, 4 * k + 1)
            return ({"k": ks, "eta_T_per_rtHz": [dd_sensitivity(sp, int(j), s["s"])[0] for j in ks]},
                    {"eta_T_per_rtHz": eta, "k": k})
        raise ConfigError("'sensitivity.kind' must be 'ramsey' or 'dd'")
    if cmd == "ldd_phases":
        seq = cfg.sequence
        return ({"k": np.arange(1, seq.n_pulses + 1), "phase_rad": seq.phases}, seq.to_dict())
    raise ConfigError(f"unhandled command {cmd!r}")


def list_commands() -> str:
    return "\n".join(f"{name:<15} {help_}" for name, help_ in COMMANDS.items())


def run(config_path, output=None, seed=None, threads=None) -> int:
    """Execute a configuration file; returns the process exit code."""
    t0 = time.perf_counter()
    try:
        try:
            doc = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if isinstance(doc, dict):
            if output is not None:
                doc["output"] = output
            if seed is not None:
                doc["seed"] = seed
        cfg = parse_config(doc)
        try:
            nthreads = resolve_threads(threads)
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
        out = Path(cfg.output)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"'output': cannot create {out}: {exc}") from None
        columns, results = execute(cfg, nthreads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, ValueError, FloatingPointError) as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return 3
    write_csv(out / "result.csv", columns)
    write_sidecar(out / "meta.json", cfg.echo, cfg.seed, results=results, threads=nthreads,
                  wall_time_s=time.perf_counter() - t0)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="zfdd", description="Zero-field spin-1 decoupling simulator.")
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--output", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")
    ap.add_argument("--list", action="store_true", help="list commands and exit")
    ap.add_argument("--version", action="version", version=f"zfdd {__version__}")
    args = ap.parse_args(argv)
    if args.list:
        print(list_commands())
        return 0
    if not args.config:
        ap.print_usage(sys.stderr)
        print("zfdd: error: --config is required", file=sys.stderr)
        return 2
    return run(args.config, args.output, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())

"""Configuration-driven experiments that emit plot-ready data files.

Every experiment is a pure function of its validated parameters and seed.
Independent work items run through :func:`parallel_map`, which preserves
item order, so the thread count never changes any output byte.
"""
from __future__ import annotations

import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import curve_fit

from . import __version__
from .applications import (CompressiveConfig, SpectrumScanConfig, SpreadSpectrumConfig,
                           apsk_demodulate, code_sync, code_templates, cosamp_recover,
                           dominant_peaks, make_spread_signal, measure, plant_sparse, pn_code,
                           random_symbols, reconstruction_snr_db, spectrum_scan, synthesize, tone)
from .calibration import (GAMMA_PER_N, MetricsReport, apply_inverse, compute_hdr, compute_spg,
                          enob_from_hdr, estimate_transient_energy, fit_inverse_map,
                          random_protocol, rms_error, tops_per_watt)
from .correlator import (gen_correlated_batch, gen_sinusoid_pair, mac_correlate,
                         make_rng, mp_correlate_batch)
from .dynamics import (CircuitParams, DeviceModel, Trajectory, branch_operands,
                       integrate_first_order, integrate_first_order_batch,
                       integrate_second_order_batch, relu_dynamics_batch, relu_params)
from .errors import ConfigError
from .maxent import (EnergyTarget, ensemble_energy, maxent_distribution, maxent_to_mp_params,
                     solve_multipliers)
from .mp import MpProblem, Nonlinearity, mp_solve, symmetric

SCHEMA_VERSION = 1


def thread_count(configured: int | None = None) -> int:
    """Parallelism degree: ``MPCORR_THREADS`` beats the config, then core count."""
    env = os.environ.get("MPCORR_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"MPCORR_THREADS: expected an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError("MPCORR_THREADS: must be >= 1")
        return value
    if configured:
        return int(configured)
    return os.cpu_count() or 1


def parallel_map(fn, items, threads: int = 1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- formatting

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    return v


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------- schema

@dataclass(frozen=True)
class Param:
    kind: str  # int, float, bool, str, int_list, float_list
    default: object
    lo: float | None = None
    hi: float | None = None
    choices: tuple | None = None

    def validate(self, name, value):
        def scalar(v, kind):
            if kind == "int":
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigError(f"parameters.{name}: expected integer, got {type(v).__name__}")
            elif kind == "float":
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"parameters.{name}: expected number, got {type(v).__name__}")
                if not np.isfinite(v):
                    raise ConfigError(f"parameters.{name}: must be finite")
                v = float(v)
            elif kind == "bool":
                if not isinstance(v, bool):
                    raise ConfigError(f"parameters.{name}: expected boolean, got {type(v).__name__}")
                return v
            elif kind == "str":
                if not isinstance(v, str):
                    raise ConfigError(f"parameters.{name}: expected string, got {type(v).__name__}")
                if self.choices and v not in self.choices:
                    raise ConfigError(f"parameters.{name}: must be one of {list(self.choices)}, got {v!r}")
                return v
            if self.lo is not None and v < self.lo:
                raise ConfigError(f"parameters.{name}: must be >= {self.lo}, got {v}")
            if self.hi is not None and v > self.hi:
                raise ConfigError(f"parameters.{name}: must be <= {self.hi}, got {v}")
            return v

        if self.kind.endswith("_list"):
            if not isinstance(value, list) or not value:
                raise ConfigError(f"parameters.{name}: expected non-empty list")
            return [scalar(v, self.kind[:-5]) for v in value]
        return scalar(value, self.kind)


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    params: dict
    runner: Callable = field(repr=False)

    def resolve(self, given: dict) -> dict:
        if not isinstance(given, dict):
            raise ConfigError("parameters: expected an object")
        unknown = sorted(set(given) - set(self.params))
        if unknown:
            raise ConfigError(f"parameters.{unknown[0]}: unknown parameter for {self.name}")
        out = {}
        for name, spec in self.params.items():
            out[name] = spec.validate(name, given[name]) if name in given else spec.default
        return out


@dataclass
class Result:
    """Named data files plus a short human-readable summary."""

    files: dict
    summary: str
    ok: bool = True


# -------------------------------------------------------------- shared cores

def spg_point(n: int, seed: int, n_train: int = 500, n_test: int = 1000,
              gamma_per_n: float = GAMMA_PER_N, order: int = 5) -> dict:
    """SPG of calibrated static MP and of the MAC baseline at length ``n``."""
    raw_tr, r_tr, _ = random_protocol(n, n_train, seed, 2 * n, gamma_per_n=gamma_per_n)
    raw_te, r_te, emp_te = random_protocol(n, n_test, seed, 2 * n + 1, gamma_per_n=gamma_per_n)
    model = fit_inverse_map(raw_tr, r_tr, order)
    train_pred = apply_inverse(model, raw_tr)
    test_pred = apply_inverse(model, raw_te)
    return {
        "n": n,
        "spg_mp_db": compute_spg(test_pred, r_te).spg_db,
        "spg_mac_db": compute_spg(emp_te, r_te).spg_db,
        "train_rms_db": compute_spg(train_pred, r_tr).rms_error_db,
        "test_rms_db": compute_spg(test_pred, r_te).rms_error_db,
        "monotone": model.monotone,
    }


def slope_per_doubling(ns, values) -> float:
    return float(np.polyfit(np.log2(np.asarray(ns, dtype=float)), np.asarray(values), 1)[0])


def maxent_trial(seed: int, k: int, eta: float = 2.0, n_max: int = 16) -> dict:
    """Random ensemble solved both ways; returns the z gap and residuals."""
    rng = make_rng(seed, 41, k)
    n = int(rng.integers(2, n_max + 1))
    x = rng.uniform(-1, 1, n)
    y = rng.uniform(-1, 1, n)
    # non-negative energies with E0 = 0, the domain where beta > 0
    u = {sign: float(rng.uniform(0.05, 0.95) * np.max(np.abs(o)))
         for sign, o in (("plus", x + y), ("minus", x - y))}
    target = EnergyTarget(u["plus"], u["minus"])
    nl = Nonlinearity("power", eta=eta)
    out = {"n": n, "z_gap": 0.0, "norm_residual": 0.0, "energy_residual": 0.0}
    for sign, o in (("plus", x + y), ("minus", x - y)):
        alpha, beta = solve_multipliers(x, y, eta, target, sign)
        z_me, gamma = maxent_to_mp_params(alpha, beta, eta)
        z_mp = mp_solve(MpProblem(symmetric(o), gamma), nl, tol=min(1e-10, 1e-12 * gamma)).z
        p, q = maxent_distribution(x, y, eta, alpha, beta, sign)
        out["z_gap"] = max(out["z_gap"], abs(z_me - z_mp))
        out["norm_residual"] = max(out["norm_residual"], abs(float(np.sum(p + q)) - 1.0))
        out["energy_residual"] = max(out["energy_residual"],
                                     abs(ensemble_energy(x, y, p, q, sign) - target.net(sign)))
        out[f"z_{sign}"] = z_me
    return out


def relu_monotonicity(n: int = 256, trials: int = 500, r_grid=None, steps=(2, 10),
                      seed: int = 0, threads: int = 1) -> dict:
    """Monte-Carlo mean and standard error of relu-dynamics outputs per R."""
    if r_grid is None:
        r_grid = np.round(np.arange(-0.9, 0.91, 0.1), 10)
    r_grid = np.asarray(r_grid, dtype=float)
    r, c = relu_params(n)

    def point(k):
        x, y = gen_correlated_batch(np.full(trials, r_grid[k]), n, "gaussian", seed, 100 + k)
        return relu_dynamics_batch(x, y, r, c, 1e-5, steps)

    res = parallel_map(point, range(r_grid.size), threads)
    keys = [*sorted(steps), "steady"]
    mean = {key: np.array([p[key].mean() for p in res]) for key in keys}
    se = {key: np.array([p[key].std(ddof=1) / np.sqrt(trials) for p in res]) for key in keys}
    return {"r_grid": r_grid, "keys": keys, "mean": mean, "se": se}


def monotone_within_se(mean, se, k: float = 2.0) -> bool:
    drops = np.diff(mean)
    allowed = k * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    return bool(np.all(drops >= -allowed))


def exponential_fit(t, v):
    """Fit ``A (1 - exp(-t / tau))``; returns ``(A, tau, r2)``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    a0 = v[-1]
    target = a0 * (1 - np.exp(-1))
    idx = np.flatnonzero(np.abs(v) >= abs(target))
    tau0 = t[idx[0]] if idx.size else t[-1] / 3
    f = lambda tt, a, tau: a * (1 - np.exp(-tt / tau))
    (a, tau), _ = curve_fit(f, t, v, p0=(a0, max(tau0, t[1])), maxfev=10000)
    resid = v - f(t, a, tau)
    ss = np.sum((v - v.mean()) ** 2)
    return float(a), float(tau), float(1 - np.sum(resid**2) / ss)


def sinusoid_batch(phases, n, cycles):
    pairs = [gen_sinusoid_pair(float(p), n, cycles) for p in phases]
    return np.array([p.x for p in pairs]), np.array([p.y for p in pairs])


def device_defaults(n, r_sink):
    """Drive current that puts the steady state at the relu-dynamics operating point."""
    return DeviceModel(i0=25.0 / (n * r_sink))


def transient_tradeoff(n=256, r_sink=2800.0, c_par=7e-12, noise_v=3e-3, n_reads=10, cycles=4,
                       vdd=1.0, e_sampling=1e-12, dt_tau=1e-3, seed=0) -> dict:
    """ENOB and TOPS/W versus readout time over one decade below ``tau_out``."""
    model = device_defaults(n, r_sink)
    tau = r_sink * c_par
    dt = dt_tau * tau
    phases = np.arange(181.0)
    x, y = sinusoid_batch(phases, n, cycles)
    plus, minus = branch_operands(x, y, model)
    steps, vp, vm, ip, im = integrate_first_order_batch(plus, minus, model.i0, model.i0, r_sink,
                                                        c_par, dt, tau)
    times = steps * dt
    v_out = vp - vm
    _, tau_out, _ = exponential_fit(times, v_out[:, 0])
    # whole steps, widened outward so the grid spans at least a full decade
    first = max(1, int(np.floor(0.1 * tau_out / dt)))
    last = int(np.ceil(tau_out / dt))
    reads = np.unique(np.round(np.logspace(np.log10(first), np.log10(last), n_reads)).astype(int))
    rng = make_rng(seed, 51)
    noise_train = noise_v * rng.standard_normal(phases.size)
    noise_test = noise_v * rng.standard_normal(phases.size)
    truth = np.cos(np.deg2rad(phases))
    traj0 = Trajectory(times, vp[:, 0], vm[:, 0], ip[:, 0], im[:, 0])
    i_static = float(ip[-1, 0] + im[-1, 0])
    rows = []
    for s in reads:
        model_s = fit_inverse_map(v_out[s] + noise_train, truth, 5)
        hdr = compute_hdr(apply_inverse(model_s, v_out[s] + noise_test), truth).hdr_db
        enob = enob_from_hdr(hdr)
        energy = estimate_transient_energy(traj0, i_static, c_par, vdd, s * dt)
        system, core = tops_per_watt(n, enob, e_sampling, energy)
        rows.append({"t_read": s * dt, "t_over_tau_out": s * dt / tau_out, "hdr_db": hdr,
                     "enob": enob, "energy_j": energy, "tops_w_core": core,
                     "tops_w_system": system})
    return {"tau_out": tau_out, "tau": tau, "rows": rows}


# ------------------------------------------------------------- experiments

def _run_mp_demo(p, seed, threads):
    n = p["n"]
    phases = np.arange(0.0, 180.0 + 1e-9, p["phase_step"])
    x, y = sinusoid_batch(phases, n, p["cycles"])
    g = p["gamma_per_n"] * n
    cols = {"mac": np.array([mac_correlate(gen_sinusoid_pair(ph, n, p["cycles"])).raw_output
                             for ph in phases])}
    for kind in ("relu", "softplus", "power"):
        nl = Nonlinearity(kind, eta=p["eta"], temperature=p["temperature"])
        cols[kind] = mp_correlate_batch(x, y, g, nl=nl)
    rows = zip(phases, np.cos(np.deg2rad(phases)), cols["mac"], cols["relu"], cols["softplus"],
               cols["power"])
    data = csv_text(["phase_deg", "cos_phase", "mac", "mp_relu", "mp_softplus", "mp_power"], rows)
    mono = {k: bool(np.all(np.diff(v) <= 0)) for k, v in cols.items()}
    summary = {"n": n, "gamma": g, "monotone_decreasing_in_phase": mono}
    return Result({"mp_demo.csv": data, "summary.json": json_text(summary)},
                  f"mp-demo: n={n}, gamma={g:g}, monotone={mono}")


def _run_maxent_check(p, seed, threads):
    trials = parallel_map(lambda k: maxent_trial(seed, k, p["eta"], p["n_max"]),
                          range(p["trials"]), threads)
    rows = [(k, t["n"], t["z_plus"], t["z_minus"], t["z_gap"], t["norm_residual"],
             t["energy_residual"]) for k, t in enumerate(trials)]
    data = csv_text(["trial", "n", "z_plus", "z_minus", "z_gap", "norm_residual",
                     "energy_residual"], rows)
    worst = {key: max(t[key] for t in trials) for key in ("z_gap", "norm_residual", "energy_residual")}
    ok = worst["z_gap"] <= 1e-7 and worst["norm_residual"] <= 1e-8 and worst["energy_residual"] <= 1e-8
    return Result({"maxent_check.csv": data, "summary.json": json_text(worst)},
                  f"maxent-check: worst {worst}", ok)


def _run_spg_scaling(p, seed, threads):
    pts = parallel_map(lambda n: spg_point(n, seed, p["n_train"], p["n_test"], p["gamma_per_n"],
                                           p["order"]), p["n_list"], threads)
    ns = [q["n"] for q in pts]
    rows = [(q["n"], q["spg_mp_db"], q["spg_mac_db"], q["train_rms_db"], q["test_rms_db"])
            for q in pts]
    data = csv_text(["n", "spg_mp_db", "spg_mac_db", "train_rms_db", "test_rms_db"], rows)
    summary = {
        "slope_mp_db_per_doubling": slope_per_doubling(ns, [q["spg_mp_db"] for q in pts]),
        "slope_mac_db_per_doubling": slope_per_doubling(ns, [q["spg_mac_db"] for q in pts]),
        "points": pts,
    }
    return Result({"spg_scaling.csv": data, "summary.json": json_text(summary)},
                  f"spg-scaling: mp slope {summary['slope_mp_db_per_doubling']:.3f} dB/doubling")


def _run_dynamics_rc(p, seed, threads):
    n, r_sink, c_par = p["n"], p["r_sink"], p["c_par"]
    model = device_defaults(n, r_sink)
    params = CircuitParams(r_sink, c_par, n=n)
    tau = params.tau

    def one(ph):
        pair = gen_sinusoid_pair(ph, n, p["cycles"])
        return ph, integrate_first_order(pair, model, params, p["t_end_tau"] * tau, p["dt_tau"] * tau)

    files, rows = {}, []
    for ph, traj in parallel_map(one, p["phases"], threads):
        path = f"trajectory_phase{fmt(ph)}.csv"
        files[path] = _trajectory_text(traj)
        final = traj.v_out[-1]
        if abs(traj.steady_state) > 1e-9:
            a, tau_out, r2 = exponential_fit(traj.times, traj.v_out)
            rel = abs(final - traj.steady_state) / abs(traj.steady_state)
        else:
            a = tau_out = r2 = float("nan")
            rel = abs(final - traj.steady_state)
        rows.append((ph, traj.steady_state, final, rel, a, tau_out, r2))
    files["fits.csv"] = csv_text(["phase_deg", "steady_state", "final", "rel_error", "fit_a",
                                  "fit_tau_out", "fit_r2"], rows)
    return Result(files, f"dynamics-rc: {len(rows)} trajectories, tau = {tau:.4g} s")


def _trajectory_text(traj: Trajectory) -> str:
    rows = zip(traj.times, traj.v_plus, traj.v_minus, traj.v_out, traj.i_plus, traj.i_minus)
    return csv_text(["time", "v_plus", "v_minus", "v_out", "i_plus", "i_minus"], rows)


def rlc_family(n=1024, r_sink=1000.0, c_par=1e-10, l_par=2e-9, phases=(0, 30, 60, 90, 120, 150, 180),
               t_end_tau=2.0, dt=None, cycles=4, record_every=10):
    """RLC trajectories for a sinusoid phase family; returns times and outputs."""
    model = device_defaults(n, r_sink)
    tau = r_sink * c_par
    if dt is None:
        dt = 0.05 * np.sqrt(l_par * c_par)
    x, y = sinusoid_batch(phases, n, cycles)
    plus, minus = branch_operands(x, y, model)
    n_steps = int(round(t_end_tau * tau / dt))
    record = range(0, n_steps + 1, record_every)
    steps, vp, vm, ip, im = integrate_second_order_batch(plus, minus, model.i0, r_sink, c_par,
                                                         l_par, dt, n_steps * dt, record=record)
    return {"times": steps * dt, "v_out": vp - vm, "i_plus": ip, "i_minus": im, "tau": tau,
            "phases": np.asarray(phases, dtype=float)}


def _run_dynamics_rlc(p, seed, threads):
    fam = rlc_family(p["n"], p["r_sink"], p["c_par"], p["l_par"], p["phases"], p["t_end_tau"],
                     None, p["cycles"], p["record_every"])
    v = fam["v_out"]
    order = np.argsort(-np.cos(np.deg2rad(fam["phases"])))
    monotone = bool(np.all(np.diff(v[1:, order], axis=1) <= 1e-12))
    final = v[-1]
    overshoot = [float(np.max(np.abs(v[:, k])) / abs(final[k])) if abs(final[k]) > 1e-9 else 1.0
                 for k in range(v.shape[1])]
    rows = []
    for i, t in enumerate(fam["times"]):
        rows.append((t, *v[i]))
    header = ["time"] + [f"v_out_phase{fmt(ph)}" for ph in fam["phases"]]
    summary = {"readout_monotone_at_every_time": monotone, "peak_over_final": overshoot,
               "final_v_out": final}
    return Result({"rlc_trajectories.csv": csv_text(header, rows), "summary.json": json_text(summary)},
                  f"dynamics-rlc: monotone readout map = {monotone}", monotone)


def _run_transient_tradeoff(p, seed, threads):
    res = transient_tradeoff(p["n"], p["r_sink"], p["c_par"], p["noise_v"], p["n_reads"],
                             p["cycles"], p["vdd"], p["e_sampling"], p["dt_tau"], seed)
    keys = ["t_read", "t_over_tau_out", "hdr_db", "enob", "energy_j", "tops_w_core", "tops_w_system"]
    data = csv_text(keys, [[r[k] for k in keys] for r in res["rows"]])
    enob = [r["enob"] for r in res["rows"]]
    tops = [r["tops_w_core"] for r in res["rows"]]
    shape = bool(np.all(np.diff(enob) >= 0) and np.all(np.diff(tops) <= 0))
    summary = {"tau": res["tau"], "tau_out": res["tau_out"], "tradeoff_shape": shape}
    return Result({"tradeoff.csv": data, "summary.json": json_text(summary)},
                  f"transient-tradeoff: ENOB {enob[0]:.2f}->{enob[-1]:.2f} bits, "
                  f"core TOPS/W {tops[0]:.0f}->{tops[-1]:.0f}", shape)


def _run_calibration(p, seed, threads):
    n, cycles = p["n"], p["cycles"]
    g = p["gamma_per_n"] * n
    phases = np.arange(0.0, 181.0)
    held = np.arange(0.5, 180.0)
    raw = mp_correlate_batch(*sinusoid_batch(phases, n, cycles), g)
    raw_h = mp_correlate_batch(*sinusoid_batch(held, n, cycles), g)
    truth, truth_h = np.cos(np.deg2rad(phases)), np.cos(np.deg2rad(held))
    rows = []
    for order in p["orders"]:
        m = fit_inverse_map(raw, truth, order)
        rows.append((order, rms_error(apply_inverse(m, raw), truth),
                     rms_error(apply_inverse(m, raw_h), truth_h), m.monotone))
    point = spg_point(n, seed, p["n_train"], p["n_test"], p["gamma_per_n"], 5)
    summary = {"random_protocol": point}
    return Result({"calibration_orders.csv": csv_text(["order", "train_rms", "heldout_rms",
                                                       "monotone"], rows),
                   "summary.json": json_text(summary)},
                  f"calibration: order-5 test RMS {point['test_rms_db']:.2f} dB")


def three_tone_signal(config: SpectrumScanConfig, freqs, seed):
    rng = make_rng(seed, 31)
    return sum(tone(config, f, 1.0, rng.uniform(0, 2 * np.pi)) for f in freqs)


def _run_spectrum_scan(p, seed, threads):
    cfg = SpectrumScanConfig(p["sample_rate"], p["n"], p["bins"], p["use_iq"])
    x = three_tone_signal(cfg, p["tones"], seed)
    mags = spectrum_scan(x, cfg, p["backend"])
    peaks = dominant_peaks(mags, len(p["tones"]))
    expected = sorted(cfg.bin_of(f) for f in p["tones"])
    ok = bool(np.all(np.abs(np.asarray(peaks) - np.asarray(expected)) <= 2))
    data = csv_text(["bin", "freq_hz", "magnitude"], zip(range(cfg.bins), cfg.frequencies(), mags))
    summary = {"peaks": peaks, "expected": expected, "peak_freqs_hz": cfg.frequencies()[peaks],
               "match": ok}
    return Result({"spectrum.csv": data, "summary.json": json_text(summary)},
                  f"spectrum-scan: peaks {list(map(int, peaks))} expected {expected}", ok)


def cosamp_run(k, bins, sparsity, backend, seed):
    cfg = CompressiveConfig(k, sparsity, bins, seed)
    truth = plant_sparse(cfg, seed)
    y = measure(synthesize(truth, bins), cfg, backend)
    res = cosamp_recover(y, seed, cfg)
    return cfg, truth, res


def _run_cosamp(p, seed, threads):
    cfg, truth, res = cosamp_run(p["k_templates"], p["bins"], p["sparsity"], p["backend"], seed)
    support_ok = bool(set(res.support) == set(np.flatnonzero(truth)))
    snr = reconstruction_snr_db(truth, res.estimate)
    summary = {"support_recovered": support_ok, "snr_db": snr, "converged": res.converged,
               "iterations": res.iterations, "max_coef_error": float(np.max(np.abs(res.estimate - truth)))}
    data = csv_text(["bin", "truth", "estimate"], zip(range(cfg.bins), truth, res.estimate))
    return Result({"cosamp.csv": data, "summary.json": json_text(summary)},
                  f"cosamp: support {support_ok}, SNR {snr:.1f} dB", support_ok)


def code_comm(code_length=1024, chip_rate=5e9, carrier=2e9, snr_db=0.0, symbols=200,
              backend="mac", blockers=0, seed=0):
    cfg = SpreadSpectrumConfig(code_length, chip_rate, carrier, snr_db, "apsk64")
    sym = random_symbols(symbols, cfg, seed)
    x = make_spread_signal(sym, cfg, seed, blockers)
    i_t, q_t = code_templates(pn_code(code_length, seed), cfg)
    decided, evm, est = apsk_demodulate(x, i_t, q_t, "apsk64", backend)
    bpsk = SpreadSpectrumConfig(code_length, chip_rate, carrier, snr_db, "bpsk")
    rx = make_spread_signal(np.array([1.0]), bpsk, seed, blockers)
    codes = {"matched": code_templates(pn_code(code_length, seed), bpsk),
             "unmatched": code_templates(pn_code(code_length, seed, 1000), bpsk)}
    sync = code_sync(rx, codes, backend)
    ser = float(np.mean(decided != sym))
    return {"evm_db": evm, "sync": sync, "ratio": sync["matched"] / sync["unmatched"],
            "symbol_error_rate": ser, "decided": decided, "estimates": est, "sent": sym}


def _run_code_comm(p, seed, threads):
    res = code_comm(p["code_length"], p["chip_rate"], p["carrier_freq"], p["snr_db"], p["symbols"],
                    p["backend"], p["blockers"], seed)
    est, dec = res["estimates"], res["decided"]
    data = csv_text(["i", "q", "decided_i", "decided_q"], zip(est.real, est.imag, dec.real, dec.imag))
    summary = {"evm_db": res["evm_db"], "sync_magnitudes": res["sync"], "sync_ratio": res["ratio"],
               "symbol_error_rate": res["symbol_error_rate"],
               # indicative only: bit mapping is unspecified, assume one bit error per symbol error
               "ber_estimate": res["symbol_error_rate"] / 6.0}
    return Result({"constellation.csv": data, "summary.json": json_text(summary)},
                  f"code-comm: EVM {res['evm_db']:.2f} dB, sync ratio {res['ratio']:.1f}")


def _run_energy_report(p, seed, threads):
    n = p["n"]
    model = device_defaults(n, p["r_sink"])
    params = CircuitParams(p["r_sink"], p["c_par"], n=n)
    pair = gen_sinusoid_pair(0.0, n, 4)
    t_compute = p["t_compute_tau"] * params.tau
    traj = integrate_first_order(pair, model, params, t_compute, params.tau / 200)
    i_static = float(traj.i_plus[-1] + traj.i_minus[-1])
    energy = estimate_transient_energy(traj, i_static, p["c_par"], p["vdd"], t_compute)
    system, core = tops_per_watt(n, p["enob"], p["e_sampling"], energy)
    ref_sys, ref_core = tops_per_watt(n, p["enob"], p["e_sampling"], p["e_compute_ref"])
    report = MetricsReport(hdr_db=p["enob"] * 6.02 + 1.76, energy_j=energy,
                           tops_per_watt_system=system, tops_per_watt_core=core)
    summary = {"simulated": report.to_dict(),
               "reference": {"e_compute_j": p["e_compute_ref"], "tops_w_core": ref_core,
                             "tops_w_system": ref_sys}}
    return Result({"metrics.json": report.to_json() + "\n", "summary.json": json_text(summary)},
                  f"energy-report: simulated {energy:.3e} J, core {core:.0f} TOPS/W; "
                  f"reference core {ref_core:.1f} TOPS/W")


def _p(kind, default, lo=None, hi=None, choices=None):
    return Param(kind, default, lo, hi, choices)


EXPERIMENTS = {e.name: e for e in [
    Experiment("mp-demo", "static MP correlator outputs over a sinusoid phase sweep", {
        "n": _p("int", 256, 4, 1 << 16), "gamma_per_n": _p("float", GAMMA_PER_N, 1e-6),
        "phase_step": _p("float", 1.0, 0.01, 180.0), "cycles": _p("int", 4, 1),
        "eta": _p("float", 1.5, 1.0 + 1e-9, 2.0), "temperature": _p("float", 0.1, 1e-6),
    }, _run_mp_demo),
    Experiment("maxent-check", "maximum-entropy multipliers versus MP solutions", {
        "trials": _p("int", 100, 1), "eta": _p("float", 2.0, 1.0 + 1e-9, 2.0),
        "n_max": _p("int", 16, 2, 64),
    }, _run_maxent_check),
    Experiment("spg-scaling", "SPG versus correlator length for calibrated MP and MAC", {
        "n_list": _p("int_list", [64, 128, 256, 512, 1024, 2048, 4096], 8, 1 << 16),
        "n_train": _p("int", 500, 10), "n_test": _p("int", 1000, 10),
        "gamma_per_n": _p("float", GAMMA_PER_N, 1e-6), "order": _p("int", 5, 1, 12),
    }, _run_spg_scaling),
    Experiment("dynamics-rc", "first-order transient trajectories for sinusoid pairs", {
        "n": _p("int", 256, 4), "r_sink": _p("float", 2800.0, 1e-9), "c_par": _p("float", 7e-12, 1e-18),
        "phases": _p("float_list", [0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0], 0.0, 180.0),
        "t_end_tau": _p("float", 10.0, 1e-3), "dt_tau": _p("float", 0.005, 1e-6, 0.05),
        "cycles": _p("int", 4, 1),
    }, _run_dynamics_rc),
    Experiment("dynamics-rlc", "second-order transients with parasitic inductance", {
        "n": _p("int", 1024, 4), "r_sink": _p("float", 1000.0, 1e-9), "c_par": _p("float", 1e-10, 1e-18),
        "l_par": _p("float", 2e-9, 1e-18),
        "phases": _p("float_list", [0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0], 0.0, 180.0),
        "t_end_tau": _p("float", 2.0, 1e-3), "cycles": _p("int", 4, 1),
        "record_every": _p("int", 10, 1),
    }, _run_dynamics_rlc),
    Experiment("transient-tradeoff", "ENOB and TOPS/W versus transient readout time", {
        "n": _p("int", 256, 8), "r_sink": _p("float", 2800.0, 1e-9), "c_par": _p("float", 7e-12, 1e-18),
        "noise_v": _p("float", 3e-3, 0.0), "n_reads": _p("int", 10, 2, 100), "cycles": _p("int", 4, 1),
        "vdd": _p("float", 1.0, 1e-6), "e_sampling": _p("float", 1e-12, 0.0),
        "dt_tau": _p("float", 1e-3, 1e-6, 0.05),
    }, _run_transient_tradeoff),
    Experiment("calibration", "inverse-map order sweep and random-input generalization", {
        "n": _p("int", 1024, 8), "gamma_per_n": _p("float", GAMMA_PER_N, 1e-6),
        "orders": _p("int_list", [1, 2, 3, 4, 5, 6, 7], 1, 12), "cycles": _p("int", 4, 1),
        "n_train": _p("int", 500, 10), "n_test": _p("int", 1000, 10),
    }, _run_calibration),
    Experiment("spectrum-scan", "template-sweep spectrum sensing of a multi-tone input", {
        "sample_rate": _p("float", 5e9, 1e-9), "n": _p("int", 1024, 2), "bins": _p("int", 1000, 1),
        "tones": _p("float_list", [0.5e9, 1.365e9, 2.435e9], 0.0),
        "backend": _p("str", "mp", choices=("mp", "mac")), "use_iq": _p("bool", True),
    }, _run_spectrum_scan),
    Experiment("cosamp", "compressive spectrum recovery from correlator measurements", {
        "k_templates": _p("int", 128, 2), "bins": _p("int", 1024, 4), "sparsity": _p("int", 4, 1),
        "backend": _p("str", "mp", choices=("mp", "mac")),
    }, _run_cosamp),
    Experiment("code-comm", "code synchronization and 64-APSK despreading", {
        "code_length": _p("int", 1024, 2), "chip_rate": _p("float", 5e9, 1e-9),
        "carrier_freq": _p("float", 2e9, 1e-9), "snr_db": _p("float", 0.0),
        "symbols": _p("int", 200, 1), "backend": _p("str", "mac", choices=("mp", "mac")),
        "blockers": _p("int", 0, 0, 16),
    }, _run_code_comm),
    Experiment("energy-report", "transient energy estimate and TOPS/W figures", {
        "n": _p("int", 256, 2), "r_sink": _p("float", 2800.0, 1e-9), "c_par": _p("float", 7e-12, 1e-18),
        "t_compute_tau": _p("float", 1.0, 1e-3), "vdd": _p("float", 1.0, 1e-6),
        "enob": _p("float", 8.0, 0.0), "e_sampling": _p("float", 0.0, 0.0),
        "e_compute_ref": _p("float", 6.27e-12, 1e-30),
    }, _run_energy_report),
]}


def load_config(text: str) -> dict:
    """Parse and validate a JSON experiment configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    allowed = {"schema_version", "experiment", "parameters", "seed", "output_dir", "threads"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown top-level field")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    name = doc.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {name!r}")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: expected a non-negative integer")
    threads = doc.get("threads")
    if threads is not None and (isinstance(threads, bool) or not isinstance(threads, int) or threads < 1):
        raise ConfigError("threads: expected a positive integer")
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir: expected a string")
    EXPERIMENTS[name].resolve(doc.get("parameters", {}))
    return doc


def run_experiment(doc: dict, seed: int | None = None, threads: int | None = None) -> tuple:
    """Execute a validated config; returns ``(resolved parameters, seed, Result)``."""
    exp = EXPERIMENTS[doc["experiment"]]
    params = exp.resolve(doc.get("parameters", {}))
    seed = doc.get("seed", 0) if seed is None else seed
    threads = thread_count(doc.get("threads")) if threads is None else threads
    return params, seed, exp.runner(params, seed, threads)


def manifest_text(doc: dict, params: dict, seed: int, files) -> str:
    return json_text({"config": doc, "resolved_parameters": params, "seed": seed,
                      "library_version": __version__, "schema_version": SCHEMA_VERSION,
                      "files": sorted(files)})

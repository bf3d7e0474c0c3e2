"""Acceptance criteria shared by ``mpcorr verify`` and the test suite.

Each criterion returns a :class:`CriterionResult`; :func:`run_suite` prints
one pass/fail line per criterion.
"""
from __future__ import annotations

import contextlib
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .applications import reconstruction_snr_db
from .calibration import tops_per_watt
from .correlator import gen_correlated, gen_sinusoid_pair, make_rng
from .dynamics import CircuitParams, integrate_first_order, integrate_second_order
from .experiments import (code_comm, cosamp_run, device_defaults, exponential_fit, maxent_trial,
                          monotone_within_se, relu_monotonicity,
                          slope_per_doubling, spg_point, transient_tradeoff)
from .mp import DEFAULT_TOL, MpProblem, Nonlinearity, mp_gradient, mp_solve, symmetric

KINDS = (Nonlinearity("relu"), Nonlinearity("softplus", temperature=0.1),
         Nonlinearity("power", eta=1.5))


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d}. {self.title} ({self.seconds:.1f} s): {self.detail}"


# ------------------------------------------------------------------ oracles

def bisection_oracle(operands, gamma, nl: Nonlinearity) -> float:
    """Plain scalar bisection on ``sum h(o - z) = gamma`` (no Newton, no batching)."""
    o = np.asarray(operands, dtype=float)
    f = lambda z: float(np.sum(nl.evaluate(o - z))) - gamma
    lo, hi = float(o.min()) - 1.0, float(o.max())
    step = 1.0
    while f(lo) < 0:
        lo -= step
        step *= 2
    step = 1.0
    while f(hi) > 0:
        hi += step
        step *= 2
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_mp_instance(rng, max_len=64):
    n = int(rng.integers(1, max_len + 1))
    ops = rng.normal(0.0, rng.uniform(0.1, 3.0), n)
    gamma = float(10 ** rng.uniform(-1, 1.5))
    return ops, gamma, KINDS[int(rng.integers(len(KINDS)))]


# ---------------------------------------------------------------- criteria

def criterion_1(tol: float = DEFAULT_TOL, instances: int = 1000, seed: int = 0):
    rng = make_rng(seed, 101)
    worst = 0.0
    for _ in range(instances):
        ops, gamma, nl = random_mp_instance(rng)
        z = mp_solve(MpProblem(ops, gamma), nl, tol=tol).z
        worst = max(worst, abs(z - bisection_oracle(ops, gamma, nl)))
    return worst <= 1e-9, f"max |z - oracle| = {worst:.2e} over {instances} instances (gate 1e-9)"


def _hessian(o, gamma, nl):
    n = o.size
    if nl.smooth:
        h = 1e-5
        cols = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            gp = mp_gradient(MpProblem(o + e, gamma), nl, _z(o + e, gamma, nl))
            gm = mp_gradient(MpProblem(o - e, gamma), nl, _z(o - e, gamma, nl))
            cols.append((gp - gm) / (2 * h))
        hess = np.array(cols)
    else:
        h = 1e-3
        hess = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                ei = np.zeros(n)
                ej = np.zeros(n)
                ei[i] = h
                ej[j] = h
                hess[i, j] = (_z(o + ei + ej, gamma, nl) - _z(o + ei - ej, gamma, nl)
                              - _z(o - ei + ej, gamma, nl) + _z(o - ei - ej, gamma, nl)) / (4 * h * h)
    return 0.5 * (hess + hess.T)


def _z(o, gamma, nl):
    return mp_solve(MpProblem(symmetric(o), gamma), nl, tol=1e-13).z


def criterion_2(instances: int = 100, seed: int = 0):
    rng = make_rng(seed, 102)
    worst_unique = worst_grad = worst_fd = 0.0
    min_eig = np.inf
    for k in range(instances):
        nl = KINDS[k % len(KINDS)]
        n = int(rng.integers(2, 9))
        o = rng.normal(0.0, 1.0, n)
        gamma = float(rng.uniform(0.5, 5.0))
        ops = symmetric(o)
        z = _z(o, gamma, nl)
        for bracket in ((-50.0, 50.0), (z + 3.0, z + 7.0), (z - 9.0, z - 4.0)):
            z_b = mp_solve(MpProblem(ops, gamma), nl, tol=1e-13, bracket=bracket).z
            worst_unique = max(worst_unique, abs(z_b - z))
        grad = mp_gradient(MpProblem(o, gamma), nl, z)
        worst_grad = max(worst_grad, float(np.sum(np.abs(grad))))
        if nl.smooth:
            h = 1e-6
            fd = np.array([(_z(o + h * e, gamma, nl) - _z(o - h * e, gamma, nl)) / (2 * h)
                           for e in np.eye(n)])
            worst_fd = max(worst_fd, float(np.max(np.abs(fd - grad))))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(_hessian(o, gamma, nl)).min()))
    ok = worst_unique <= 1e-9 and worst_grad <= 1 + 1e-9 and worst_fd <= 1e-5 and min_eig >= -1e-6
    return ok, (f"bracket spread {worst_unique:.1e}, max |grad|_1 {worst_grad:.6f}, "
                f"grad-FD gap {worst_fd:.1e}, min Hessian eig {min_eig:.2e}")


def criterion_3(trials: int = 100, seed: int = 0):
    res = [maxent_trial(seed, k, 2.0, 16) for k in range(trials)]
    z_gap = max(r["z_gap"] for r in res)
    norm = max(r["norm_residual"] for r in res)
    energy = max(r["energy_residual"] for r in res)
    ok = z_gap <= 1e-7 and norm <= 1e-8 and energy <= 1e-8
    return ok, f"max z gap {z_gap:.1e}, normalization {norm:.1e}, energy {energy:.1e}"


def criterion_4(trials: int = 500, seed: int = 0, threads: int = 1):
    mc = relu_monotonicity(256, trials, None, (2, 10), seed, threads)
    parts, ok = [], True
    for key in mc["keys"]:
        good = monotone_within_se(mc["mean"][key], mc["se"][key])
        ok &= good
        label = f"step {key}" if key != "steady" else "steady"
        parts.append(f"{label}: {'monotone' if good else 'VIOLATION'} "
                     f"[{mc['mean'][key][0]:.3f} .. {mc['mean'][key][-1]:.3f}]")
    return ok, "; ".join(parts)


SPG_NS = (64, 128, 256, 512, 1024, 2048, 4096)


def criterion_5(seed: int = 0, ns=SPG_NS):
    pts = [spg_point(n, seed) for n in ns]
    spg = [p["spg_mp_db"] for p in pts]
    slope = slope_per_doubling(ns, spg)
    steps = np.diff(spg) / np.diff(np.log2(ns))
    at_1024 = spg[list(ns).index(1024)]
    theory = 10 * np.log10(1024)
    ok = abs(slope - 3.0) <= 0.75 and abs(at_1024 - theory) <= 1.5
    return ok, (f"fitted slope {slope:.3f} dB/doubling (steps {np.round(steps, 2).tolist()}), "
                f"SPG(1024) = {at_1024:.2f} dB vs {theory:.2f} dB")


def criterion_6(seed: int = 0):
    n = 256
    r_sink, c_par = 2800.0, 7e-12
    model = device_defaults(n, r_sink)
    params = CircuitParams(r_sink, c_par, n=n)
    tau = params.tau
    # steady state against the static fixed point
    pair = gen_correlated(0.5, n, "gaussian", seed)
    traj = integrate_first_order(pair, model, params, 10 * tau, tau / 200)
    ss_err = abs(traj.v_out[-1] - traj.steady_state) / abs(traj.steady_state)
    # exponential form on sinusoid pairs (90 deg has no swing to fit)
    r2_min = 1.0
    for ph in (0.0, 30.0, 60.0, 120.0, 150.0, 180.0):
        tr = integrate_first_order(gen_sinusoid_pair(ph, n, 4), model, params, tau, tau / 1000)
        _, tau_out, _ = exponential_fit(tr.times, tr.v_out)
        keep = tr.times <= 5 * tau_out
        r2_min = min(r2_min, exponential_fit(tr.times[keep], tr.v_out[keep])[2])
    # second order with small inductance against first order
    n2 = 64
    model2 = device_defaults(n2, r_sink)
    pair2 = gen_correlated(0.5, n2, "gaussian", seed)
    l_small = 1e-4 * r_sink**2 * c_par
    p2 = CircuitParams(r_sink, c_par, l_small, n2)
    first = integrate_first_order(pair2, model2, p2, 10 * tau, tau / 200)
    second = integrate_second_order(pair2, model2, p2, 10 * tau, 0.05 * np.sqrt(l_small * c_par))
    rlc_err = abs(second.v_out[-1] - first.v_out[-1]) / abs(first.v_out[-1])
    ok = ss_err <= 1e-3 and r2_min > 0.99 and rlc_err <= 5e-3
    return ok, (f"steady-state rel err {ss_err:.1e}, min exp-fit R^2 {r2_min:.4f}, "
                f"RLC vs RC final rel err {rlc_err:.1e}")


def criterion_7(seed: int = 0):
    res = transient_tradeoff(seed=seed)
    enob = np.array([r["enob"] for r in res["rows"]])
    tops = np.array([r["tops_w_core"] for r in res["rows"]])
    ratios = [r["t_over_tau_out"] for r in res["rows"]]
    span = ratios[-1] / ratios[0]
    decade = ratios[0] <= 0.1 and ratios[-1] >= 1.0
    shape = bool(np.all(np.diff(enob) >= 0) and np.all(np.diff(tops) <= 0))
    _, core = tops_per_watt(256, 8.0, 0.0, 6.27e-12)
    ok = shape and decade and abs(core - 2940) <= 1
    return ok, (f"t_read span x{span:.1f}: ENOB {enob[0]:.2f}->{enob[-1]:.2f} bits, core TOPS/W "
                f"{tops[0]:.0f}->{tops[-1]:.0f}; formula check {core:.1f} TOPS/W")


def criterion_8(seeds: int = 20):
    worst = 0.0
    exact = True
    for seed in range(seeds):
        cfg, truth, res = cosamp_run(64, 256, 4, "mac", seed)
        exact &= set(res.support) == set(np.flatnonzero(truth))
        worst = max(worst, float(np.max(np.abs(res.estimate - truth))))
    cfg, truth, res = cosamp_run(128, 1024, 4, "mp", 0)
    mp_support = set(res.support) == set(np.flatnonzero(truth))
    snr = reconstruction_snr_db(truth, res.estimate)
    ok = exact and worst <= 1e-8 and mp_support and snr >= 20
    return ok, (f"mac: support {'exact' if exact else 'MISSED'} over {seeds} seeds, max coef err "
                f"{worst:.1e}; mp: support {'ok' if mp_support else 'MISSED'}, SNR {snr:.1f} dB")


def criterion_9(seed: int = 0):
    res = code_comm(seed=seed)
    theory = -10 * np.log10(1024)
    ok = res["ratio"] >= 10 and abs(res["evm_db"] - theory) <= 3
    return ok, (f"sync ratio {res['ratio']:.1f} (gate 10); EVM {res['evm_db']:.3f} dB vs "
                f"{theory:.3f} +- 3 dB")


def criterion_10(seed: int = 3):
    from .cli import main
    configs = [
        {"schema_version": 1, "experiment": "spg-scaling", "seed": seed,
         "parameters": {"n_list": [64, 128, 256], "n_train": 200, "n_test": 200}},
        {"schema_version": 1, "experiment": "maxent-check", "seed": seed, "parameters": {"trials": 12}},
        {"schema_version": 1, "experiment": "dynamics-rc", "seed": seed,
         "parameters": {"n": 64, "phases": [0.0, 45.0, 135.0], "t_end_tau": 3.0}},
    ]
    old = os.environ.get("MPCORR_THREADS")
    mismatched = []
    try:
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            for k, cfg in enumerate(configs):
                path = tmp / f"cfg{k}.json"
                path.write_text(json.dumps(cfg))
                outs = []
                for threads in ("1", "3", "1"):
                    os.environ["MPCORR_THREADS"] = threads
                    out = tmp / f"out{k}_{len(outs)}"
                    with contextlib.redirect_stdout(io.StringIO()):
                        main(["run", "--config", str(path), "--out", str(out)])
                    outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
                if not (outs[0] == outs[1] == outs[2]):
                    mismatched.append(cfg["experiment"])
    finally:
        if old is None:
            os.environ.pop("MPCORR_THREADS", None)
        else:
            os.environ["MPCORR_THREADS"] = old
    ok = not mismatched
    return ok, ("byte-identical across repeats and 1/3 threads for "
                f"{len(configs)} experiments" if ok else f"differences in {mismatched}")


CRITERIA = {
    1: ("MP solver oracle equivalence", criterion_1, True),
    2: ("convexity and Lipschitz properties", criterion_2, True),
    3: ("maxent <-> MP equivalence", criterion_3, True),
    4: ("Monte-Carlo monotonicity of E[f] in R", criterion_4, False),
    5: ("SPG scaling with calibration", criterion_5, False),
    6: ("dynamics consistency", criterion_6, True),
    7: ("transient trade-off shape", criterion_7, True),
    8: ("CoSaMP recovery", criterion_8, True),
    9: ("spread-spectrum sync and 64-APSK EVM", criterion_9, True),
    10: ("determinism of run artifacts", criterion_10, True),
}


def run_criterion(number: int, **kwargs) -> CriterionResult:
    title, fn, _ = CRITERIA[number]
    start = time.perf_counter()
    passed, detail = fn(**kwargs)
    return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - start)


def run_suite(suite: str = "fast", echo: bool = True):
    """Run the fast subset or every criterion; prints one line each."""
    numbers = [k for k, (_, _, fast) in CRITERIA.items() if suite == "full" or fast]
    results = []
    for k in numbers:
        res = run_criterion(k)
        results.append(res)
        if echo:
            print(res.line(), flush=True)
    if echo:
        passed = sum(r.passed for r in results)
        print(f"{passed}/{len(results)} criteria passed ({suite} suite)")
    return results

"""Acceptance criteria 1-8, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line; run with ``pytest -s`` or read
the summary lines emitted at the end of the session.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from pertthermo import (
    MODES,
    PAPER_PRINTED,
    first_order_amplitudes,
    perturbative_ledger,
    transition_probabilities,
    validate_system,
)
from pertthermo import oracle as orc
from pertthermo.config import load_config
from pertthermo.reports import convergence_report
from pertthermo.thermo import heat_orders
from pertthermo.dyson import rho_second_order
from pertthermo.twolevel import (
    TwoLevelParams,
    closed_forms,
    excited_population_exact,
    golden_rule_checks,
)

from conftest import TWO_PI, random_driven_system

ROOT = Path(__file__).parents[1]
RESULTS = []


def report(number, title, passed, detail):
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def benchmark_ledger(steps, mode=PAPER_PRINTED):
    sys_ = validate_system(TwoLevelParams().system(TWO_PI, steps))
    start = time.perf_counter()
    led = perturbative_ledger(sys_, mode)
    return led, time.perf_counter() - start


def sampled_errors(led, p=TwoLevelParams()):
    idx = np.round(np.linspace(0, len(led.times) - 1, 200)).astype(int)
    cf = closed_forms(p, led.times[idx])
    errs = {}
    for name in ("W1", "Q2", "q2", "U2"):
        ref = getattr(cf, name)
        errs[name] = float(np.abs(led.column(name)[idx] - ref).max() / np.abs(ref).max())
    return errs


@pytest.mark.parametrize("steps,tol,limit", [(10_000, 1e-3, 5.0), (1_000_000, 1e-5, 120.0)])
def test_criterion_1_closed_forms(steps, tol, limit):
    led, elapsed = benchmark_ledger(steps)
    errs = sampled_errors(led)
    worst = max(errs.values())
    ok = worst < tol and elapsed < limit
    report(1, f"closed forms at {steps} steps", ok,
           f"max rel err {worst:.2e} (tol {tol:g}), {elapsed:.2f} s (limit {limit:g} s)")
    assert ok, errs


def test_criterion_2_structural_zeros():
    sys_ = validate_system(TwoLevelParams().system(TWO_PI, 10_000))
    worst = {}
    for mode in MODES:
        led = perturbative_ledger(sys_, mode)
        for name in ("Q0", "C0", "Q1", "q1", "W2", "w2"):
            worst[name] = max(worst.get(name, 0.0), float(np.abs(led.column(name)).max()))
    tol = 1e-10 * led.scale
    ok = all(v < tol for v in worst.values())
    report(2, "structural zeros", ok,
           f"max |value| {max(worst.values()):.2e} (tol {tol:.1e})")
    assert ok, worst


def test_criterion_3_identities():
    sys_ = validate_system(TwoLevelParams().system(TWO_PI, 10_000))
    res = {}
    for mode in MODES:
        led = perturbative_ledger(sys_, mode)
        res[f"{mode} w1+W1/2"] = np.abs(led.w1 + led.W1 / 2).max()
        res[f"{mode} U1-W1/2"] = np.abs(led.U1 - led.W1 / 2).max()
        res[f"{mode} C1-q1-w1"] = np.abs(led.C1 - led.q1 - led.w1).max()
        res[f"{mode} C2-q2-w2"] = np.abs(led.C2 - led.q2 - led.w2).max()
        res[f"{mode} Q2+q2-U2"] = np.abs(led.Q2 + led.q2 - led.U2).max()
    tol = 1e-9 * led.scale
    ok = all(v < tol for v in res.values())
    report(3, "ledger identities", ok, f"max residual {max(res.values()):.2e} (tol {tol:.1e})")
    assert ok, res


def framework_residuals(traj):
    _, du = orc.internal_energy(traj)
    wa, qa = orc.alicki_decomposition(traj)
    wb, qb, cb = orc.bertulio_decomposition(traj)
    we, qe = orc.entropy_based_decomposition(traj)
    hc = orc.heat_current_split(traj, 1.0)
    return {
        "W_E-W_B-C_B": np.abs(we - wb - cb).max(),
        "Q_E-Q_B": np.abs(qe - qb).max(),
        "W_A+Q_A-dU": np.abs(wa + qa - du).max(),
        "W_B+Q_B+C_B-dU": np.abs(wb + qb + cb - du).max(),
        "Qdot_A-pop-coh": np.abs(hc.total - hc.pop - hc.coh).max(),
    }


def conservation(traj):
    eye = np.eye(traj.rho.shape[-1])
    dt = traj.dt
    mid = 0.5 * (traj.hamiltonian[:-1] + traj.hamiltonian[1:])
    u = orc.midpoint_propagators(mid, dt, traj.hbar)
    return {
        "unitarity": np.abs(u.conj().swapaxes(1, 2) @ u - eye).max(),
        "trace": np.abs(np.einsum("inn->i", traj.rho) - 1).max(),
        "purity": np.ptp(orc.purity(traj)),
        "entropy": np.ptp(orc.von_neumann_entropy(traj)),
    }


@pytest.mark.parametrize("seed", range(10))
def test_criterion_4_framework_equivalences(seed):
    start = time.perf_counter()
    traj = orc.propagate_exact(random_driven_system(seed, steps=100_000))
    res = framework_residuals(traj)
    elapsed = time.perf_counter() - start
    tol = 1e-6 * traj.scale
    worst = max(res.values())
    ok = worst < tol and elapsed < 60
    report(4, f"equivalences, seed {seed} (d={traj.rho.shape[-1]})", ok,
           f"max residual {worst:.2e} (tol {tol:.1e}), {elapsed:.1f} s")
    assert ok, res


def test_criterion_5_propagator_quality():
    p = TwoLevelParams()
    traj = orc.propagate_exact(p.system(TWO_PI, 100_000))
    rabi = np.abs(traj.rho[:, 1, 1].real - excited_population_exact(p, traj.times)).max()
    cons = conservation(traj)
    for seed in (0, 1):
        other = conservation(orc.propagate_exact(random_driven_system(seed, steps=100_000)))
        cons = {k: max(cons[k], other[k]) for k in cons}
    ok = rabi < 1e-8 and all(v < 1e-9 for v in cons.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in cons.items())
    report(5, "exact propagator", ok, f"Rabi {rabi:.2e} (tol 1e-8); {detail} (tol 1e-9)")
    assert ok


def test_criterion_6_golden_rule():
    p = TwoLevelParams(epsilon=0.05, omega=1.0)
    sys_ = validate_system(p.system(100.0, 20_000))
    amps = transition_probabilities(first_order_amplitudes(sys_), sys_)
    t = amps.times[1:]
    expected = sys_.populations[None, :] * (p.epsilon / p.hbar) ** 2 * t[:, None] ** 2
    growth = float(np.abs(amps.pk[1:] / expected - 1).max())
    whole = golden_rule_checks(p, 100.0, half_width=None)["kernel_ratio"]
    window = golden_rule_checks(p, 100.0)["kernel_ratio"]
    ok = growth < 1e-6 and 0.98 <= whole <= 1.02
    report(6, "golden-rule limits", ok,
           f"resonant growth rel err {growth:.1e} (tol 1e-6); kernel/(2 pi t) {whole:.10f} "
           f"over the whole line (info: {window:.4f} over |delta| <= 20/t)")
    assert ok


def test_criterion_7_order_adjudication():
    cfg = load_config(ROOT / "configs" / "validity.json")
    rep = convergence_report(cfg, [0.04, 0.02, 0.01])
    rho = rep["exponents"]["rho"]
    energy = rep["exponents"]["energy"]
    fits_done = all(x is not None for x in list(rho.values()) + list(energy.values()))
    ok = fits_done and rep["passed"] and rep["favored_mode"] in MODES
    table = ", ".join(f"{m}: rho {rho[m]:.2f} energy {energy[m]:.2f}" for m in MODES)
    report(7, "order adjudication", ok, f"favored {rep['favored_mode']} ({table})")
    assert ok


def test_criterion_8_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        r = subprocess.run([sys.executable, "-m", "pertthermo", "run", "--config",
                            str(ROOT / "configs" / "benchmark.json"), "--out", str(out)],
                           capture_output=True, text=True, cwd=ROOT)
        assert r.returncode == 0, r.stderr
        outs.append((out / "ledger.csv").read_bytes())
    ok = outs[0] == outs[1]
    report(8, "determinism", ok, f"{len(outs[0])} bytes, identical={ok}")
    assert ok


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and RESULTS:
        reporter.write_sep("-", "acceptance summary")
        for line in RESULTS:
            reporter.write_line(line)

"""Acceptance criteria, one test per criterion at its stated tolerance.

Each check records (passed, detail) in ``RESULTS``; the pytest terminal
summary prints one line per criterion.  Also runnable as a script:
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from crtmem import calibration as cal  # noqa: E402
from crtmem import errormodel as em  # noqa: E402
from crtmem import gst, qcore  # noqa: E402
from crtmem import mitigation as mt  # noqa: E402
from oracles import (  # noqa: E402
    pauli_matrix,
    simplex_kkt_violation,
    simplex_lsq_active_set,
    simplex_projection_bisect,
    simplex_projection_bruteforce,
)

RESULTS: dict[str, tuple[bool, str]] = {}

REFERENCE_L = np.array(
    [[0.9900, 0.0100, 0, 0], [0.0102, 0.9898, 0, 0], [0.0101, 0.0101, 0.9798, 0], [0.0103, 0.0103, 0, 0.9794]]
)


def _record(name: str, passed: bool, detail: str) -> None:
    RESULTS[name] = (bool(passed), detail)
    assert passed, f"{name}: {detail}"


@functools.lru_cache(maxsize=None)
def default_run():
    """Default configuration (n = 4, eta = 0.2, 16 replicas, GST enabled, exact mode)."""
    cfg = mt.MerminConfig()
    cals = [mt.calibrate_replica(cfg, r) for r in range(cfg.replicas)]
    report = mt.MerminReport(cfg.order, cfg.eta, tuple(mt.evaluate_replica(c, cfg, cfg.eta) for c in cals))
    return cals, report


# -- 1 --------------------------------------------------------------------------------


def test_c1_exact_L_reproduction():
    start = time.perf_counter()
    L = cal.compute_L(cal.fiducial_states(em.noisy_single_qubit(2e-2, 2e-4)))
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(L - REFERENCE_L)))
    _record("C1 exact-model L", err <= 5e-5 and elapsed < 1.0, f"max |L - reference| = {err:.2e} (<= 5e-5), {elapsed:.3f} s (< 1 s)")


# -- 2 --------------------------------------------------------------------------------


def test_c2_bypass_gst_exactness():
    start = time.perf_counter()
    cfg = mt.MerminConfig(order=4, replicas=4, bypass_gst=True)
    etas = [k / 10 for k in range(11)]
    reports = mt.eta_sweep(cfg, etas)
    elapsed = time.perf_counter() - start
    worst = max(abs(r.gamma_corrected - (1 - rep.eta) * 8 * math.sqrt(2)) for rep in reports for r in rep.replicas)
    _record(
        "C2 bypass-GST exactness",
        worst <= 1e-8 and elapsed < 60,
        f"max |gamma - (1-eta) 8 sqrt2| = {worst:.2e} over 11 etas x 4 replicas (<= 1e-8), {elapsed:.2f} s (< 60 s)",
    )


# -- 3 --------------------------------------------------------------------------------


def test_c3_table_directional():
    _, report = default_run()
    exact = report.replicas[0].exact
    analytic = 0.8 * 8 * math.sqrt(2)
    order_ok = all(
        r.raw < r.exact and r.t_corrected > r.gamma_corrected and abs(r.gamma_corrected - r.exact) < abs(r.t_corrected - r.exact)
        for r in report.replicas
    )
    g_mean, g_err = report.stats("gamma")
    raw_mean, _ = report.stats("raw")
    t_mean, _ = report.stats("T")
    gap = abs(g_mean - exact)
    passed = abs(exact - 9.051) <= 1e-3 and abs(exact - analytic) < 1e-12 and order_ok and gap < 0.05
    _record(
        "C3 default-config ordering",
        passed,
        f"exact {exact:.5f}, raw {raw_mean:.4f}, T {t_mean:.4f}, gamma {g_mean:.4f} +/- {g_err:.4f}; "
        f"per-replica ordering {'holds' if order_ok else 'violated'}; |gamma - exact| = {gap:.4f} (< 0.05)",
    )


# -- 4 --------------------------------------------------------------------------------


def test_c4_gamma_identity():
    rng = np.random.default_rng(2024)
    worst, general = 0.0, 0
    for i in range(200):
        n = 1 + i % 3
        sqs = tuple(em.random_single_qubit_noise(rng, rng.uniform(0, 0.2)) for _ in range(n))
        if i % 2:
            povm = em.random_general_povm(n, rng, rng.uniform(0, 0.3))
            general += 1
        else:
            povm = em.random_diagonal_povm(n, rng.uniform(0, 0.5), rng)
        model = em.ErrorModel(n, sqs, povm)
        G = cal.assemble_gamma(cal.exact_Ls(model), cal.measure_calibration_table(model), project=False)
        worst = max(worst, float(np.max(np.abs(G - em.true_gamma(model)))))
    _record(
        "C4 Gamma identity",
        worst <= 1e-9,
        f"200 random models ({general} general POVMs), max |Gamma - Gamma_true| = {worst:.2e} (<= 1e-9)",
    )


# -- 5 --------------------------------------------------------------------------------


def projected_gradient(A, q, max_iter=10**6, tol=1e-14):
    """Plain projected gradient with step 1/||A||^2, run until the iterate stops moving.

    Uses its own bisection projection so it shares no code with the solver.
    """
    step = 1.0 / np.linalg.norm(A, 2) ** 2
    p = np.full(A.shape[1], 1.0 / A.shape[1])
    for k in range(max_iter):
        nxt = simplex_projection_bisect(p - step * (A.T @ (A @ p - q)))
        if np.max(np.abs(nxt - p)) < tol:
            return nxt, True
        p = nxt
    return p, False


def test_c5_solver_oracles():
    rng = np.random.default_rng(5)
    worst_pg, worst_as, unconverged = 0.0, 0.0, 0
    for i in range(500):
        d = int(rng.integers(2, 17))
        # calibration-like response: near-identity column-stochastic, as produced by readout noise
        s = rng.uniform(0, 0.5)
        A = (1 - s) * np.eye(d) + s * rng.dirichlet(np.ones(d), size=d).T
        if i % 2:
            q = rng.dirichlet(np.full(d, 0.5))
        else:
            q = A @ rng.dirichlet(np.ones(d)) + rng.normal(scale=0.02, size=d)
        p = mt.correct_distribution(A, q)
        ref, ok = projected_gradient(A, q)
        unconverged += not ok
        worst_pg = max(worst_pg, float(np.max(np.abs(p - ref))))
        # general dense instances against the active-set oracle, certified by its KKT conditions
        B = rng.normal(size=(d, d))
        r = rng.normal(size=d)
        pb, ref_b = mt.correct_distribution(B, r), simplex_lsq_active_set(B, r)
        if simplex_kkt_violation(B, r, ref_b) < 1e-9:
            worst_as = max(worst_as, float(np.max(np.abs(pb - ref_b))))
        else:
            unconverged += 1
    worst_proj = 0.0
    for d in (2, 4):
        for _ in range(200):
            M = rng.normal(scale=rng.uniform(0.1, 3), size=(d, d))
            P = cal.project_column_stochastic(M)
            ref = np.column_stack([simplex_projection_bruteforce(c) for c in M.T])
            worst_proj = max(worst_proj, float(np.max(np.abs(P - ref))))
    passed = worst_pg <= 1e-6 and worst_as <= 1e-6 and unconverged == 0 and worst_proj <= 1e-9
    _record(
        "C5 solver oracles",
        passed,
        f"500 instances: max dev vs projected gradient {worst_pg:.1e}, vs active set {worst_as:.1e} (<= 1e-6), "
        f"{unconverged} oracle failures; projection vs brute force {worst_proj:.1e} (<= 1e-9)",
    )


# -- 6 --------------------------------------------------------------------------------


def test_c6_gst_recovery():
    model = em.build_planted_model(em.NoiseConfig(n=4))
    rho_err, eig_err = 0.0, 0.0
    target = np.array([0.9998, 0.9998, 0.9998, 1.0])
    for q in range(model.n):
        est = gst.estimate_qubit(model, q).estimate
        rho_err = max(rho_err, float(np.linalg.norm(est.rho0 - np.diag([0.99, 0.01]))))
        for g in (est.gx, est.gy):
            eig_err = max(eig_err, float(np.max(np.abs(np.sort(np.abs(np.linalg.eigvals(g))) - target))))
    _record(
        "C6 GST recovery",
        rho_err <= 5e-3 and eig_err <= 1e-6,
        f"max ||rho0_est - diag(0.99, 0.01)||_F = {rho_err:.2e} (<= 5e-3), eigenvalue magnitudes {eig_err:.1e} (<= 1e-6)",
    )


# -- 7 --------------------------------------------------------------------------------


def test_c7_qpt():
    noise = em.NoiseConfig(n=1)
    target = np.diag([1.0, 0.9, 0.9, 0.9])
    dep = qcore.depolarizing_ptm(0.1, 1)
    bypass = float(np.max(np.abs(mt.run_qpt(dep, noise, bypass_gst=True).estimate - target)))
    with_gst = float(np.max(np.abs(mt.run_qpt(dep, noise, bypass_gst=False).estimate - target)))
    ident = float(np.max(np.abs(mt.run_qpt(qcore.I2, noise, bypass_gst=True).estimate - np.eye(4))))
    _record(
        "C7 process tomography",
        bypass <= 1e-8 and with_gst <= 2e-3 and ident <= 1e-8,
        f"depolarizing: bypass {bypass:.1e} (<= 1e-8), GST {with_gst:.1e} (<= 2e-3); identity bypass {ident:.1e} (<= 1e-8)",
    )


# -- 8 --------------------------------------------------------------------------------


def test_c8_circuits_and_ideal_mermin():
    t3 = np.zeros(8, dtype=complex)
    t3[0], t3[7] = 1 / math.sqrt(2), 1j / math.sqrt(2)
    t4 = np.zeros(16, dtype=complex)
    t4[0], t4[15] = 1 / math.sqrt(2), np.exp(3j * np.pi / 4) / math.sqrt(2)
    inf3 = 1 - abs(np.vdot(t3, qcore.apply_circuit(qcore.ghz3_circuit(), 3))) ** 2
    inf4 = 1 - abs(np.vdot(t4, qcore.apply_circuit(qcore.ghz4_circuit(), 4))) ** 2
    m = {}
    for n, t in ((3, t3), (4, t4)):
        rho = np.outer(t, t.conj())
        m[n] = mt.mermin_value({w: np.trace(rho @ pauli_matrix(w)).real for w in mt.MERMIN_TERMS[n]}, n)
    dm3, dm4 = abs(m[3] - 4), abs(m[4] - 8 * math.sqrt(2))
    _record(
        "C8 circuits and ideal Mermin",
        max(inf3, inf4) <= 1e-12 and max(dm3, dm4) <= 1e-10,
        f"infidelity {inf3:.1e}, {inf4:.1e} (<= 1e-12); |M3 - 4| = {dm3:.1e}, |M4 - 8 sqrt2| = {dm4:.1e} (<= 1e-10)",
    )


# -- 9 --------------------------------------------------------------------------------


def test_c9_gamma_vs_T_pattern():
    cals, _ = default_run()
    num = np.array([np.linalg.norm(c.gamma - c.T) for c in cals])
    den = np.array([np.linalg.norm(c.gamma - em.true_gamma(c.model)) for c in cals])
    ratios = num / den
    _record(
        "C9 ||Gamma-T|| >> ||Gamma-Gamma_POVM||",
        ratios.min() >= 5,
        f"{len(cals)} planted models, GST enabled: per-model ratio min {ratios.min():.1f}, median {np.median(ratios):.1f}, "
        f"{int((ratios < 5).sum())} below 5 (each >= 5); ratio of mean norms {num.mean() / den.mean():.1f}",
    )


def main() -> int:
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_c")]
    for t in tests:
        try:
            t()
        except AssertionError:
            pass
    for name, (ok, detail) in RESULTS.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for ok, _ in RESULTS.values()) else 1


if __name__ == "__main__":
    sys.exit(main())

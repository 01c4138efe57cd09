"""Reduced-size invariant checks run by ``crtmem selftest``.

Each check raises AssertionError (or any exception) on failure; the runner
reports the property name so a broken constant is easy to locate.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import calibration as cal
from . import errormodel as em
from . import gst, mitigation, qcore

SEED = 20240611


def _close(a, b, tol, what):
    err = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
    assert err <= tol, f"{what}: deviation {err:.3e} > {tol:.1e}"


def check_paulis():
    for w in qcore.pauli_words(2):
        P = qcore.pauli_operator(w)
        _close(P @ P, np.eye(4), 1e-12, f"{w} squared")
        _close(P, P.conj().T, 1e-12, f"{w} Hermitian")


def check_quasiprob_roundtrip():
    rng = np.random.default_rng(SEED)
    for _ in range(20):
        v = rng.normal(size=3)
        v *= rng.uniform() / np.linalg.norm(v)
        rho = (qcore.I2 + v[0] * qcore.X + v[1] * qcore.Y + v[2] * qcore.Z) / 2
        c = qcore.quasiprob_coeffs(rho)
        _close(sum(ci * P for ci, P in zip(c, qcore.PROJECTORS)), rho, 1e-12, "projector expansion")
        _close(qcore.quasiprob_coeffs(qcore.state_from_quasiprob(c)), c, 1e-12, "coefficient round trip")


def check_ptm_homomorphism():
    rng = np.random.default_rng(SEED + 1)

    def haar():
        Q, R = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        return Q * (np.diag(R) / np.abs(np.diag(R)))

    for _ in range(10):
        U, V = haar(), haar()
        _close(qcore.ptm_of_unitary(U @ V), qcore.ptm_of_unitary(U) @ qcore.ptm_of_unitary(V), 1e-10, "PTM(UV)")


def check_measure_pauli():
    psi = qcore.apply_circuit(qcore.ghz3_circuit(), 3)
    rho = np.outer(psi, psi.conj())
    for w in ("XXY", "XYX", "YXX", "YYY", "XZI"):
        p, e = qcore.measure_pauli(rho, w)
        assert abs(p.sum() - 1) < 1e-10, "distribution not normalized"
        _close(e, np.trace(rho @ qcore.pauli_operator(w)).real, 1e-10, f"<{w}>")


def check_mermin_ideal():
    for n, qm in ((3, 4.0), (4, 8 * math.sqrt(2))):
        rho = em.depolarized_ghz(n, 0.0)
        exps = {w: qcore.measure_pauli(rho, w)[1] for w in mitigation.MERMIN_TERMS[n]}
        _close(mitigation.mermin_value(exps, n), qm, 1e-10, f"M{n} on the ideal state")


def check_exact_L():
    L = cal.compute_L(cal.fiducial_states(em.noisy_single_qubit(2e-2, 2e-4)))
    reference = [[0.99, 0.01, 0, 0], [0.0102, 0.9898, 0, 0], [0.0101, 0.0101, 0.9798, 0], [0.0103, 0.0103, 0, 0.9794]]
    _close(L, reference, 5e-5, "L matrix")
    _close(L.sum(axis=1), 1.0, 1e-10, "L row sums")


def check_pauli_to_state():
    M = mitigation.pauli_to_state_matrix()
    for row, P in zip(M, (qcore.I2, qcore.X, qcore.Y, qcore.Z)):
        _close(sum(c * Pi for c, Pi in zip(row, qcore.PROJECTORS)), P, 1e-12, "M (pi_0, pi_1, pi_+, pi_+i)")


def check_gamma_identity():
    rng = np.random.default_rng(SEED + 2)
    for k in range(6):
        n = 1 + k % 2
        per_qubit = tuple(em.random_single_qubit_noise(rng) for _ in range(n))
        povm = em.random_general_povm(n, rng) if k % 3 else em.random_diagonal_povm(n, 0.2, rng)
        model = em.ErrorModel(n, per_qubit, povm)
        table = cal.measure_calibration_table(model)
        gamma = cal.assemble_gamma(cal.exact_Ls(model), table, project=False)
        _close(gamma, em.true_gamma(model), 1e-9, "Gamma from exact table and Ls")


def check_projection():
    rng = np.random.default_rng(SEED + 3)
    for _ in range(50):
        M = rng.normal(size=(4, 4))
        P = cal.project_column_stochastic(M)
        cal.check_column_stochastic(P)
        _close(cal.project_column_stochastic(P), P, 1e-12, "idempotence")


def check_solver():
    rng = np.random.default_rng(SEED + 4)
    for _ in range(20):
        d = int(rng.integers(2, 9))
        A = cal.project_column_stochastic(np.eye(d) + 0.3 * rng.random((d, d)))
        q = rng.dirichlet(np.ones(d))
        p = mitigation.correct_distribution(A, q)
        assert p.min() >= 0 and abs(p.sum() - 1) < 1e-10, "solution left the simplex"
        assert mitigation.kkt_residual(A, q, p) <= 1e-8, "KKT residual too large"


def check_povm_completeness():
    rng = np.random.default_rng(SEED + 5)
    R = em.random_diagonal_povm(3, 0.1, rng).response
    _close(R.sum(axis=0), 1.0, 1e-12, "response column sums")
    assert abs(np.linalg.norm(R - np.eye(8)) - 0.1) < 5e-3, "noise target missed"


def check_gst():
    sq = em.noisy_single_qubit(2e-2, 2e-4)
    e0 = np.diag([0.995, 0.003]).astype(complex)
    data = gst.simulate_gst_data(sq, e0)
    est = gst.gauge_optimize(gst.lgst_estimate(data), cptp=False).estimate
    for name in ("gx", "gy"):
        ev = np.sort(np.abs(np.linalg.eigvals(getattr(est, name))))
        _close(ev, [0.9998, 0.9998, 0.9998, 1.0], 1e-6, f"{name} eigenvalue magnitudes")
    pred = gst.predict(est)
    _close(pred.gram, data.gram, 1e-9, "model fits data")


def check_bypass_mermin():
    cfg = mitigation.MerminConfig(order=3, eta=0.3, replicas=2, bypass_gst=True, seed=SEED)
    for r in mitigation.run_mermin_pipeline(cfg).replicas:
        _close(r.gamma_corrected, 0.7 * 4, 1e-8, "bypass Gamma-corrected M3")


def check_qpt():
    res = mitigation.run_qpt(qcore.depolarizing_ptm(0.1), em.NoiseConfig(n=1, seed=SEED))
    _close(res.estimate, np.diag([1, 0.9, 0.9, 0.9]), 1e-8, "depolarizing PTM")


CHECKS: tuple[tuple[str, Callable[[], None]], ...] = (
    ("Pauli operators are Hermitian involutions", check_paulis),
    ("quasiprobability expansion round-trips", check_quasiprob_roundtrip),
    ("PTM of a product is the product of PTMs", check_ptm_homomorphism),
    ("measure_pauli matches tr(rho sigma)", check_measure_pauli),
    ("Mermin polynomials reach 4 and 8*sqrt(2)", check_mermin_ideal),
    ("exact-model L matrix", check_exact_L),
    ("pauli_to_state_matrix maps projectors to Paulis", check_pauli_to_state),
    ("Gamma assembly identity", check_gamma_identity),
    ("column-stochastic projection", check_projection),
    ("simplex least-squares optimality", check_solver),
    ("random POVM completeness and target", check_povm_completeness),
    ("GST eigenvalues and data fit", check_gst),
    ("bypass-GST Mermin exactness", check_bypass_mermin),
    ("SPAM-corrected QPT of a depolarizing channel", check_qpt),
)


def run_selftest(echo: Callable[[str], None] = print) -> list[tuple[str, str | None]]:
    """Run every check; returns (name, failure message or None) pairs."""
    results = []
    for name, fn in CHECKS:
        try:
            fn()
            err = None
        except Exception as exc:  # noqa: BLE001 - report any failure by property name
            err = f"{type(exc).__name__}: {exc}"
        results.append((name, err))
        echo(f"{'PASS' if err is None else 'FAIL'}  {name}" + ("" if err is None else f"  ({err})"))
    failed = [n for n, e in results if e is not None]
    echo(f"selftest: {len(results) - len(failed)}/{len(results)} properties passed")
    if failed:
        echo("failed: " + "; ".join(failed))
    return results

"""Single-qubit gate set estimation by linear inversion plus gauge fixing.

Everything is in the single-qubit Pauli basis: states are column vectors
``tr(rho s)/2``, the outcome-0 effect is a row vector ``tr(E0 s)`` and gates
are 4x4 PTMs.  Preparation fiducials are (empty, G_x^2, G_y, G_x^3) and
measurement fiducials are (empty, G_x, G_y, G_x^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from . import qcore
from .calibration import NumericalError
from .errormodel import ErrorModel, SingleQubitNoise, ideal_single_qubit, marginal_effect

GATES = ("Gx", "Gy")
PREP_FIDUCIALS = ((), ("Gx", "Gx"), ("Gy",), ("Gx", "Gx", "Gx"))
MEAS_FIDUCIALS = ((), ("Gx",), ("Gy",), ("Gx", "Gx"))


class GSTError(NumericalError):
    pass


def effect_row(E: np.ndarray) -> np.ndarray:
    return np.array([np.trace(E @ P).real for P in (qcore.I2, qcore.X, qcore.Y, qcore.Z)])


def effect_from_row(row: np.ndarray) -> np.ndarray:
    return qcore.from_pauli_vector(np.asarray(row) / 2)


@dataclass(frozen=True)
class GateSetEstimate:
    rho0: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    e0: np.ndarray

    def as_noise(self) -> SingleQubitNoise:
        return SingleQubitNoise(rho0=self.rho0, gx=self.gx, gy=self.gy)

    def gate(self, name: str) -> np.ndarray:
        return {"Gx": self.gx, "Gy": self.gy}[name]

    def format(self, decimals: int = 4) -> str:
        def fmt(M):
            M = np.asarray(M)
            if np.iscomplexobj(M) and np.max(np.abs(M.imag)) < 10 ** -(decimals + 1):
                M = M.real
            M = np.where(np.abs(M) < 0.5 * 10**-decimals, 0, M)
            return np.array2string(M, precision=decimals, suppress_small=True, floatmode="fixed")

        return "\n".join(
            f"{name}:\n{fmt(val)}"
            for name, val in (("rho0", self.rho0), ("G_x", self.gx), ("G_y", self.gy), ("E_0", self.e0))
        )


def target_gateset() -> GateSetEstimate:
    sq = ideal_single_qubit()
    return GateSetEstimate(rho0=sq.rho0, gx=sq.gx, gy=sq.gy, e0=qcore.PI0)


def _sequence(gates: dict[str, np.ndarray], labels) -> np.ndarray:
    out = np.eye(4)
    for g in labels:
        out = gates[g] @ out
    return out


def fiducial_matrices(rho_vec, e_row, gates) -> tuple[np.ndarray, np.ndarray]:
    """B[j] = <<E| M_j and C[:, k] = F_k |rho>>."""
    B = np.array([e_row @ _sequence(gates, m) for m in MEAS_FIDUCIALS])
    C = np.column_stack([_sequence(gates, f) @ rho_vec for f in PREP_FIDUCIALS])
    return B, C


@dataclass(frozen=True)
class LgstData:
    """Outcome-0 probabilities of the linear-inversion circuits.

    ``gram[j, k] = <<E|M_j F_k|rho>>``, ``gates[G][j, k] = <<E|M_j G F_k|rho>>``,
    ``rho_vec[j] = <<E|M_j|rho>>`` and ``e_vec[k] = <<E|F_k|rho>>``.
    """

    gram: np.ndarray
    gates: dict[str, np.ndarray] = field(default_factory=dict)
    rho_vec: np.ndarray = None
    e_vec: np.ndarray = None


def _forward(rho_vec, e_row, gates) -> LgstData:
    B, C = fiducial_matrices(rho_vec, e_row, gates)
    return LgstData(
        gram=B @ C,
        gates={g: B @ gates[g] @ C for g in GATES},
        rho_vec=B @ rho_vec,
        e_vec=e_row @ C,
    )


def simulate_gst_data(
    sq: SingleQubitNoise,
    e0: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> LgstData:
    """Exact (``shots=None``) or binomially sampled LGST probabilities."""
    data = _forward(qcore.pauli_vector(sq.rho0), effect_row(e0), {"Gx": sq.gx, "Gy": sq.gy})
    if shots is None:
        return data
    if rng is None:
        raise ValueError("sampling needs an explicit rng")

    def sample(p):
        p = np.clip(p, 0.0, 1.0)
        return rng.binomial(shots, p) / shots

    return LgstData(
        gram=sample(data.gram),
        gates={g: sample(v) for g, v in data.gates.items()},
        rho_vec=sample(data.rho_vec),
        e_vec=sample(data.e_vec),
    )


def lgst_estimate(data: LgstData, max_cond: float = 1e8) -> GateSetEstimate:
    """Linear inversion in the gauge where the preparation fiducials are ideal."""
    cond = np.linalg.cond(data.gram)
    if not np.isfinite(cond) or cond > max_cond:
        raise GSTError(f"LGST data informationally incomplete: Gram condition number {cond:.3g}")
    t = target_gateset()
    _, C_t = fiducial_matrices(qcore.pauli_vector(t.rho0), effect_row(t.e0), {"Gx": t.gx, "Gy": t.gy})
    C_t_inv = np.linalg.inv(C_t)
    gram_inv = np.linalg.inv(data.gram)
    gates = {g: C_t @ gram_inv @ data.gates[g] @ C_t_inv for g in GATES}
    rho_vec = C_t @ gram_inv @ data.rho_vec
    e_row = data.e_vec @ C_t_inv
    rho = qcore.from_pauli_vector(rho_vec)
    return GateSetEstimate(
        rho0=0.5 * (rho + rho.conj().T),
        gx=gates["Gx"],
        gy=gates["Gy"],
        e0=effect_from_row(e_row),
    )


def predict(est: GateSetEstimate) -> LgstData:
    return _forward(qcore.pauli_vector(est.rho0), effect_row(est.e0), {"Gx": est.gx, "Gy": est.gy})


def _gauge_matrix(params: np.ndarray) -> np.ndarray:
    K = np.zeros((4, 4))
    K[1:, :] = params.reshape(3, 4)
    return expm(K)


def apply_gauge(est: GateSetEstimate, M: np.ndarray) -> GateSetEstimate:
    """rho -> M rho, G -> M G M^-1, E -> E M^-1."""
    Minv = np.linalg.inv(M)
    rho = qcore.from_pauli_vector(M @ qcore.pauli_vector(est.rho0))
    return GateSetEstimate(
        rho0=0.5 * (rho + rho.conj().T),
        gx=M @ est.gx @ Minv,
        gy=M @ est.gy @ Minv,
        e0=effect_from_row(effect_row(est.e0) @ Minv),
    )


DEFAULT_WEIGHTS = {"rho0": 1e-3, "Gx": 1.0, "Gy": 1.0, "E0": 1e-3}


def _residuals(est: GateSetEstimate, target: GateSetEstimate, weights: dict[str, float]) -> np.ndarray:
    parts = [
        np.sqrt(weights["rho0"]) * (est.rho0 - target.rho0).ravel(),
        np.sqrt(weights["Gx"]) * (est.gx - target.gx).ravel(),
        np.sqrt(weights["Gy"]) * (est.gy - target.gy).ravel(),
        np.sqrt(weights["E0"]) * (est.e0 - target.e0).ravel(),
        # the complementary effect E1 = I - E0 carries the same error
        np.sqrt(weights["E0"]) * (target.e0 - est.e0).ravel(),
    ]
    r = np.concatenate(parts)
    return np.concatenate([r.real, r.imag])


@dataclass(frozen=True)
class GaugeResult:
    estimate: GateSetEstimate
    gauge: np.ndarray
    initial_objective: float
    objective: float
    iterations: int


def gauge_optimize(
    est: GateSetEstimate,
    target: GateSetEstimate | None = None,
    weights: dict[str, float] | None = None,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    cptp: bool = True,
) -> GaugeResult:
    """Minimize the weighted squared Frobenius distance to ``target`` over TP gauges.

    The gauge is ``M = expm(K)`` with the first row of ``K`` zero, which keeps
    the trace row of every gate intact.  States and effects are compared as
    2x2 operators, gates as PTMs.
    """
    target = target or target_gateset()
    w = dict(DEFAULT_WEIGHTS)
    if weights:
        unknown = set(weights) - set(w)
        if unknown:
            raise ValueError(f"unknown gauge weight keys {sorted(unknown)}")
        w.update(weights)

    def fun(params):
        return _residuals(apply_gauge(est, _gauge_matrix(params)), target, w)

    x0 = np.zeros(12)
    f0 = float(fun(x0) @ fun(x0))
    sol = least_squares(fun, x0, method="trf", jac="3-point", xtol=1e-15, ftol=tol, gtol=1e-15, max_nfev=max_iter)
    f1 = float(sol.fun @ sol.fun)
    if not np.isfinite(f1) or f1 > f0 + 1e-12:
        raise GSTError(f"gauge optimization diverged: objective {f0:.6g} -> {f1:.6g} ({sol.message})")
    M = _gauge_matrix(sol.x)
    out = apply_gauge(est, M)
    if cptp:
        out = project_physical(out)
    return GaugeResult(estimate=out, gauge=M, initial_objective=f0, objective=f1, iterations=int(sol.nfev))


def project_physical(est: GateSetEstimate) -> GateSetEstimate:
    """Clip the effect spectrum to [0, 1], the state spectrum to >= 0 (unit trace),
    and reset the gate first rows to (1, 0, 0, 0), the nearest trace-preserving PTMs."""
    w, V = np.linalg.eigh(est.e0)
    e0 = V @ np.diag(np.clip(w, 0.0, 1.0)) @ V.conj().T
    w, V = np.linalg.eigh(est.rho0)
    w = np.clip(w, 0.0, None)
    rho0 = V @ np.diag(w / w.sum()) @ V.conj().T
    gx, gy = np.array(est.gx, dtype=float), np.array(est.gy, dtype=float)
    for g in (gx, gy):
        g[0] = [1.0, 0.0, 0.0, 0.0]
    return replace(est, rho0=0.5 * (rho0 + rho0.conj().T), gx=gx, gy=gy, e0=0.5 * (e0 + e0.conj().T))


def estimate_qubit(
    model: ErrorModel,
    qubit: int,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
    weights: dict[str, float] | None = None,
) -> GaugeResult:
    """Full LGST + gauge fixing for one qubit of ``model``."""
    data = simulate_gst_data(model.per_qubit[qubit], marginal_effect(model, qubit), shots, rng)
    return gauge_optimize(lgst_estimate(data), weights=weights)

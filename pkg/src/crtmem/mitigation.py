"""Distribution correction, Mermin polynomial estimation and SPAM-corrected QPT."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import qcore
from .calibration import (
    CalibrationTable,
    NumericalError,
    assemble_gamma,
    exact_Ls,
    compute_L,
    fiducial_states,
    invert_L,
    lambda_words,
    measure_calibration_table,
    measure_T,
    project_column_stochastic,
    project_simplex,
    sample_distribution,
)
from .errormodel import ErrorModel, NoiseConfig, build_planted_model, depolarized_ghz
from . import gst


class SolverError(NumericalError):
    pass


# -- simplex-constrained least squares -------------------------------------


def kkt_residual(A: np.ndarray, q: np.ndarray, p: np.ndarray) -> float:
    """Fixed-point residual ||p - P(p - grad)||_inf of the projected gradient map."""
    grad = A.T @ (A @ p - q)
    return float(np.max(np.abs(p - project_simplex(p - grad))))


def correct_distribution(
    A: np.ndarray,
    q: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Minimize ||A p - q||_2^2 over the probability simplex.

    When ``A^-1 q`` already lies in the simplex it is returned directly (the
    objective is zero there); otherwise accelerated projected gradient with
    adaptive restart runs until the KKT residual drops below ``tol``.
    """
    A = np.asarray(A, dtype=float)
    q = np.asarray(q, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != q.shape[0]:
        raise qcore.DimensionError(f"shapes {A.shape} and {q.shape} do not match")
    try:
        p = np.linalg.solve(A, q)
        if p.min() >= -1e-12 and abs(p.sum() - 1) < 1e-9:
            return project_simplex(p)
    except np.linalg.LinAlgError:
        pass

    AtA = A.T @ A
    Atq = A.T @ q
    step = 1.0 / max(np.linalg.norm(A, 2) ** 2, 1e-300)
    p = project_simplex(q)
    y, t = p.copy(), 1.0
    f_prev = np.inf
    for k in range(max_iter):
        p_new = project_simplex(y - step * (AtA @ y - Atq))
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        f = 0.5 * np.sum((A @ p_new - q) ** 2)
        if f > f_prev:
            # restart momentum
            y, t = p.copy(), 1.0
            f_prev = np.inf
            continue
        y = p_new + ((t - 1) / t_new) * (p_new - p)
        p, t, f_prev = p_new, t_new, f
        if k % 10 == 0 and kkt_residual(A, q, p) < tol:
            return p
    res = kkt_residual(A, q, p)
    if res < tol:
        return p
    raise SolverError(f"simplex least squares did not converge: KKT residual {res:.3e} after {max_iter} iterations")


# -- Mermin polynomials -----------------------------------------------------

MERMIN_TERMS: dict[int, dict[str, int]] = {
    3: {"XXY": 1, "XYX": 1, "YXX": 1, "YYY": -1},
    4: {
        "XXXY": 1, "XXYX": 1, "XYXX": 1, "YXXX": 1,
        "XXYY": 1, "XYXY": 1, "XYYX": 1, "YXXY": 1,
        "YXYX": 1, "YYXX": 1,
        "XXXX": -1, "XYYY": -1, "YXYY": -1, "YYXY": -1, "YYYX": -1, "YYYY": -1,
    },
}
QM_MAX = {3: 4.0, 4: 8 * math.sqrt(2)}
LR_MAX = {3: 2.0, 4: 4.0}


def mermin_value(expectations: Mapping[str, float], order: int) -> float:
    if order not in MERMIN_TERMS:
        raise ValueError(f"Mermin order must be 3 or 4, got {order}")
    terms = MERMIN_TERMS[order]
    missing = [w for w in terms if w not in expectations]
    if missing:
        raise KeyError(f"missing expectation values for {missing}")
    return float(sum(sign * expectations[w] for w, sign in sorted(terms.items())))


# -- end-to-end Mermin simulation ------------------------------------------

CORRECTIONS = ("raw", "T", "gamma")


@dataclass(frozen=True)
class MerminConfig:
    order: int = 4
    eta: float = 0.2
    replicas: int = 16
    state_depol: float = 2e-2
    gate_depol: float = 2e-4
    povm_noise_target: float = 0.06
    bypass_gst: bool = False
    shots: int | None = None
    seed: int = 0
    gauge_weights: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.order not in (3, 4):
            raise ValueError("order must be 3 or 4")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must be in [0, 1]")
        if self.replicas < 1:
            raise ValueError("replicas must be positive")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive or None")
        self.noise(0)

    def noise(self, replica: int) -> NoiseConfig:
        return NoiseConfig(
            n=self.order,
            state_depol=self.state_depol,
            gate_depol=self.gate_depol,
            povm_noise_target=self.povm_noise_target,
            seed=self.seed,
        )


def replica_seed(seed: int, replica: int, *stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(replica,) + tuple(stream))


@dataclass(frozen=True)
class ReplicaCalibration:
    """Everything a replica learns before it looks at the GHZ data."""

    replica: int
    model: ErrorModel
    T: np.ndarray
    gamma: np.ndarray
    Ls: tuple[np.ndarray, ...]
    gatesets: tuple[gst.GateSetEstimate, ...] | None
    table: CalibrationTable


def calibrate_model(
    noise: NoiseConfig,
    replica: int = 0,
    bypass_gst: bool = False,
    shots: int | None = None,
    gauge_weights: Mapping[str, float] | None = None,
) -> ReplicaCalibration:
    """Steps A-D: planted model, GST (or the exact gateset), L matrices, T and Gamma.

    Random streams are keyed on ``(noise.seed, replica, stream, ...)`` so the
    result does not depend on the order replicas are run in.
    """
    seed = noise.seed
    try:
        model = build_planted_model(noise, np.random.default_rng(replica_seed(seed, replica, 0)))
        if bypass_gst:
            Ls, gatesets = exact_Ls(model), None
        else:
            gatesets, Ls = [], []
            for q in range(model.n):
                rng = np.random.default_rng(replica_seed(seed, replica, 1, q))
                est = gst.estimate_qubit(model, q, shots, rng, weights=gauge_weights).estimate
                gatesets.append(est)
                Ls.append(compute_L(fiducial_states(est.as_noise(), project=True)))
            gatesets = tuple(gatesets)
        table = measure_calibration_table(model, shots, replica_seed(seed, replica, 2))
        T = measure_T(model, shots, replica_seed(seed, replica, 3))
        if shots is not None:
            T = project_column_stochastic(T)
        gamma = assemble_gamma(Ls, table)
    except (NumericalError, ValueError) as exc:
        raise type(exc)(f"replica {replica}: {exc}") from exc
    return ReplicaCalibration(replica, model, T, gamma, tuple(Ls), gatesets, table)


def calibrate_replica(cfg: MerminConfig, replica: int) -> ReplicaCalibration:
    return calibrate_model(cfg.noise(replica), replica, cfg.bypass_gst, cfg.shots, cfg.gauge_weights)


@dataclass(frozen=True)
class ReplicaResult:
    replica: int
    exact: float
    raw: float
    t_corrected: float
    gamma_corrected: float
    expectations: dict[str, dict[str, float]] = field(default_factory=dict)

    def value(self, kind: str) -> float:
        return {"exact": self.exact, "raw": self.raw, "T": self.t_corrected, "gamma": self.gamma_corrected}[kind]


def evaluate_replica(cal: ReplicaCalibration, cfg: MerminConfig, eta: float) -> ReplicaResult:
    """Step E: measure every Mermin word through the noisy POVM and correct."""
    rho = depolarized_ghz(cfg.order, eta)
    exp: dict[str, dict[str, float]] = {k: {} for k in ("exact",) + CORRECTIONS}
    for idx, word in enumerate(sorted(MERMIN_TERMS[cfg.order])):
        _, exp["exact"][word] = qcore.measure_pauli(rho, word, None)
        p_raw, _ = qcore.measure_pauli(rho, word, cal.model.povm)
        if cfg.shots is not None:
            rng = np.random.default_rng(replica_seed(cfg.seed, cal.replica, 4, idx, int(round(eta * 1e9))))
            p_raw = sample_distribution(p_raw, cfg.shots, rng) / cfg.shots
        exp["raw"][word] = qcore.expectation_from_distribution(p_raw, word)
        exp["T"][word] = qcore.expectation_from_distribution(correct_distribution(cal.T, p_raw), word)
        exp["gamma"][word] = qcore.expectation_from_distribution(correct_distribution(cal.gamma, p_raw), word)
    vals = {k: mermin_value(v, cfg.order) for k, v in exp.items()}
    return ReplicaResult(cal.replica, vals["exact"], vals["raw"], vals["T"], vals["gamma"], exp)


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


@dataclass(frozen=True)
class MerminReport:
    order: int
    eta: float
    replicas: tuple[ReplicaResult, ...]

    def stats(self, kind: str) -> tuple[float, float]:
        return mean_and_stderr([r.value(kind) for r in self.replicas])

    @property
    def values(self) -> dict[str, float]:
        return {k: self.stats(k)[0] for k in ("exact",) + CORRECTIONS}

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "eta": self.eta,
            "qm_max": QM_MAX[self.order],
            "lr_max": LR_MAX[self.order],
            "aggregate": {
                k: {"mean": m, "stderr": s} for k in ("exact",) + CORRECTIONS for m, s in [self.stats(k)]
            },
            "replicas": [
                {
                    "replica": r.replica,
                    "exact": r.exact,
                    "raw": r.raw,
                    "T": r.t_corrected,
                    "gamma": r.gamma_corrected,
                }
                for r in self.replicas
            ],
        }


def run_mermin_pipeline(cfg: MerminConfig) -> MerminReport:
    results = []
    for r in range(cfg.replicas):
        cal = calibrate_replica(cfg, r)
        results.append(evaluate_replica(cal, cfg, cfg.eta))
    return MerminReport(cfg.order, cfg.eta, tuple(results))


def eta_sweep(cfg: MerminConfig, etas: Sequence[float]) -> list[MerminReport]:
    """Reports on a grid of GHZ depolarizations; calibration is shared across eta."""
    etas = [float(e) for e in etas]
    if any(not 0 <= e <= 1 for e in etas):
        raise ValueError("eta grid must lie in [0, 1]")
    cals = [calibrate_replica(cfg, r) for r in range(cfg.replicas)]
    return [
        MerminReport(cfg.order, eta, tuple(evaluate_replica(c, cfg, eta) for c in cals)) for eta in etas
    ]


def sweep_curves(reports: Sequence[MerminReport]) -> tuple[list[str], list[list[float]]]:
    """Replica-mean curves and their absolute deviations from exact."""
    header = ["eta", "exact", "raw", "T", "gamma", "abs_raw", "abs_T", "abs_gamma"]
    rows = []
    for rep in reports:
        v = rep.values
        rows.append(
            [rep.eta, v["exact"], v["raw"], v["T"], v["gamma"]]
            + [abs(v[k] - v["exact"]) for k in CORRECTIONS]
        )
    return header, rows


# -- SPAM-corrected process tomography ----------------------------------

_PAULI_TO_STATE = np.array(
    [[1, 1, 0, 0], [-1, -1, 2, 0], [-1, -1, 0, 2], [1, -1, 0, 0]], dtype=float
)


def pauli_to_state_matrix() -> np.ndarray:
    """(I, X, Y, Z)^T = M (pi_0, pi_1, pi_+, pi_+i)^T."""
    return _PAULI_TO_STATE.copy()


def channel_ptm(channel: np.ndarray, n: int) -> np.ndarray:
    """PTM of ``channel``: either a 2^n unitary or already a 4^n PTM."""
    channel = np.asarray(channel)
    if channel.shape == (4**n, 4**n) and not np.iscomplexobj(channel):
        return channel.astype(float)
    if channel.shape == (2**n, 2**n):
        return qcore.ptm_of_unitary(channel)
    raise qcore.DimensionError(f"channel of shape {channel.shape} does not act on {n} qubit(s)")


def qpt_reconstruct(
    model: ErrorModel,
    channel: np.ndarray,
    Ls: Sequence[np.ndarray],
    gamma: np.ndarray,
    max_qubits: int = 3,
) -> np.ndarray:
    """Pauli transfer matrix of ``channel`` with SPAM removed.

    The channel is applied to every product of the model's noisy fiducial
    states, each Pauli observable is read out through the model's POVM and
    corrected with ``gamma``, and the ideal Pauli inputs are recombined with
    the coefficients ``(M L_i^-1)``.
    """
    n = model.n
    if n > max_qubits:
        raise ValueError(f"QPT limited to {max_qubits} qubits, model has {n}")
    if len(Ls) != n:
        raise ValueError(f"need {n} L matrices, got {len(Ls)}")
    if np.shape(gamma) != (2**n, 2**n):
        raise qcore.DimensionError("gamma does not match the register")
    ptm = channel_ptm(channel, n)
    d = 2**n
    fids = [fiducial_states(sq) for sq in model.per_qubit]
    words = qcore.pauli_words(n)
    W = qcore.kron_all(pauli_to_state_matrix() @ invert_L(L, qubit=i) for i, L in enumerate(Ls))
    lam_words = lambda_words(n)
    data = np.empty((len(words), len(lam_words)))
    for k, lam in enumerate(lam_words):
        rho = qcore.tensor_states([fids[i][l] for i, l in enumerate(lam)])
        out = qcore.apply_ptm(ptm, rho)
        for j, sigma in enumerate(words):
            if set(sigma) == {"I"}:
                data[j, k] = np.trace(out).real
                continue
            p_raw = qcore.povm_probabilities(qcore.rotate_for_measurement(out, sigma), model.povm)
            p = correct_distribution(gamma, p_raw)
            data[j, k] = qcore.expectation_from_distribution(p, sigma)
    # Phi[s, s'] = (1/d) sum_l W[s', l] tr[s Phi(rho_l)]
    return data @ W.T / d


@dataclass(frozen=True)
class QptResult:
    true_ptm: np.ndarray
    estimate: np.ndarray
    Ls: tuple[np.ndarray, ...]
    gamma: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.estimate - self.true_ptm)))


def run_qpt(
    channel: np.ndarray,
    noise: NoiseConfig,
    bypass_gst: bool = True,
    shots: int | None = None,
    gauge_weights: Mapping[str, float] | None = None,
    max_qubits: int = 3,
) -> QptResult:
    """Planted SPAM model, Gamma calibration and SPAM-corrected QPT in one go."""
    if noise.n > max_qubits:
        raise ValueError(f"QPT limited to {max_qubits} qubits, got n={noise.n}")
    cal = calibrate_model(noise, 0, bypass_gst, shots, gauge_weights)
    est = qpt_reconstruct(cal.model, channel, cal.Ls, cal.gamma, max_qubits=max_qubits)
    return QptResult(channel_ptm(channel, noise.n), est, cal.Ls, cal.gamma)

"""Readout calibration: T, the per-qubit L matrices and the Gamma estimate.

Matrices indexed by outcomes follow the column convention ``M[x, x']``:
rows are observed outcomes, columns the prepared classical state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qcore
from .errormodel import ErrorModel, SingleQubitNoise, apply_gate_power, prepared_classical_state
from .qcore import DiagonalPOVM

LAMBDAS = ("0", "1", "+", "+i")
MAX_L_CONDITION = 1e6


class NumericalError(RuntimeError):
    """A numerical step of the pipeline failed."""


class SingularLError(NumericalError):
    pass


def _nearest_state(rho: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if w.min() >= 0:
        return rho
    w = np.clip(w, 0.0, None)
    out = V @ np.diag(w / w.sum()) @ V.conj().T
    return 0.5 * (out + out.conj().T)


def fiducial_states(sq: SingleQubitNoise, project: bool = False) -> tuple[np.ndarray, ...]:
    """rho_0 and the states made by applying G_x^2, G_y and G_x^3 to it.

    With ``project`` (used for estimated gate sets, whose gates need not be
    CPTP) each state is mapped to the nearest density matrix instead of
    being rejected; for a qubit this shrinks the Bloch vector onto the ball.
    """
    states = (
        sq.rho0,
        apply_gate_power(sq.gx, sq.rho0, 2),
        apply_gate_power(sq.gy, sq.rho0, 1),
        apply_gate_power(sq.gx, sq.rho0, 3),
    )
    if project:
        states = tuple(_nearest_state(rho) for rho in states)
    for lam, rho in zip(LAMBDAS, states):
        try:
            qcore.check_density_matrix(rho)
        except ValueError as exc:
            raise ValueError(f"fiducial state rho_{lam} is unphysical: {exc}") from exc
    return states


def compute_L(fiducials: Sequence[np.ndarray]) -> np.ndarray:
    """Row l holds the quasiprobabilities of rho_l over (pi_0, pi_1, pi_+, pi_+i)."""
    if len(fiducials) != 4:
        raise ValueError("need exactly four fiducial states")
    return np.array([qcore.quasiprob_coeffs(rho) for rho in fiducials])


def invert_L(L: np.ndarray, qubit: int | None = None, max_cond: float = MAX_L_CONDITION) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    where = "" if qubit is None else f" for qubit {qubit}"
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > max_cond:
        raise SingularLError(f"L matrix{where} is singular or ill-conditioned (cond={cond:.3g})")
    return np.linalg.inv(L)


def lambda_words(n: int) -> list[tuple[int, ...]]:
    """Base-4 enumeration of {0,1,+,+i}^n as digit tuples, qubit 0 first."""
    return list(itertools.product(range(4), repeat=n))


def lambda_label(word: Sequence[int]) -> str:
    return ",".join(LAMBDAS[k] for k in word)


def outcome_labels(n: int) -> list[str]:
    return [format(x, f"0{n}b") for x in range(2**n)]


def sample_distribution(p: np.ndarray, shots: int | None, rng: np.random.Generator | None = None):
    """Multinomial counts for ``shots`` draws, or ``p`` itself when ``shots`` is None."""
    p = np.asarray(p, dtype=float)
    if shots is None:
        return p
    if shots < 1:
        raise ValueError("shots must be positive")
    if rng is None:
        raise ValueError("sampling needs an explicit rng")
    q = np.clip(p, 0.0, None)
    return rng.multinomial(shots, q / q.sum())


def _estimate(p: np.ndarray, shots: int | None, rng) -> np.ndarray:
    if shots is None:
        return p
    return sample_distribution(p, shots, rng) / shots


def _word_rng(seed_seq: np.random.SeedSequence | None, *key: int):
    if seed_seq is None:
        return None
    return np.random.default_rng(
        np.random.SeedSequence(seed_seq.entropy, spawn_key=seed_seq.spawn_key + tuple(key))
    )


def measure_T(model: ErrorModel, shots: int | None = None, seed: np.random.SeedSequence | None = None) -> np.ndarray:
    """T(x|x') = tr(E_x rho_x') with the noisy classical preparations."""
    d = 2**model.n
    T = np.empty((d, d))
    for xp in range(d):
        bits = [(xp >> (model.n - 1 - i)) & 1 for i in range(model.n)]
        rho = prepared_classical_state(model, bits)
        T[:, xp] = _estimate(qcore.povm_probabilities(rho, model.povm), shots, _word_rng(seed, 0, xp))
    return T


@dataclass(frozen=True)
class CalibrationTable:
    """Outcome distributions for all 4^n products of fiducial states.

    ``probs[k]`` is the distribution for ``lambda_words(n)[k]``.
    """

    n: int
    probs: np.ndarray

    def __post_init__(self):
        P = np.array(self.probs, dtype=float)
        if P.shape != (4**self.n, 2**self.n):
            raise ValueError(f"calibration table must be {4**self.n}x{2**self.n}, got {P.shape}")
        if not np.all(np.isfinite(P)):
            raise ValueError("calibration table has missing entries")
        P.setflags(write=False)
        object.__setattr__(self, "probs", P)

    def __getitem__(self, word: Sequence[int]) -> np.ndarray:
        idx = 0
        for k in word:
            idx = 4 * idx + k
        return self.probs[idx]


def _fiducial_stack(model: ErrorModel) -> list[tuple[np.ndarray, ...]]:
    return [fiducial_states(sq) for sq in model.per_qubit]


def measure_calibration_table(
    model: ErrorModel, shots: int | None = None, seed: np.random.SeedSequence | None = None
) -> CalibrationTable:
    """Distributions tr(E_x rho_l1 (x) ... (x) rho_ln) for every lambda word."""
    fids = _fiducial_stack(model)
    diag_only = model.povm is None or isinstance(model.povm, DiagonalPOVM)
    rows = []
    for k, word in enumerate(lambda_words(model.n)):
        parts = [fids[i][lam] for i, lam in enumerate(word)]
        if diag_only:
            diag = qcore.kron_all(np.real(np.diagonal(p)) for p in parts)
            p = diag if model.povm is None else model.povm.response @ diag
        else:
            p = model.povm.probabilities(qcore.tensor_states(parts))
        rows.append(_estimate(p, shots, _word_rng(seed, 1, k)))
    return CalibrationTable(model.n, np.array(rows))


def inverse_weights(Ls: Sequence[np.ndarray]) -> np.ndarray:
    """Rows (L^-1)_{x' lambda} of the Kronecker product restricted to classical x'."""
    return qcore.kron_all(invert_L(L, qubit=i)[:2] for i, L in enumerate(Ls))


def assemble_gamma(Ls: Sequence[np.ndarray], table: CalibrationTable, project: bool = True) -> np.ndarray:
    """Gamma(x|x') = sum_l (L^-1)_{x' l} tr(E_x rho_l), optionally made stochastic."""
    if len(Ls) != table.n:
        raise ValueError(f"need {table.n} L matrices, got {len(Ls)}")
    gamma = table.probs.T @ inverse_weights(Ls).T
    return project_column_stochastic(gamma) if project else gamma


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p = 1} (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_column_stochastic(M: np.ndarray) -> np.ndarray:
    """Frobenius-nearest column-stochastic matrix (columns projected independently)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got {M.shape}")
    return np.column_stack([project_simplex(c) for c in M.T])


def check_column_stochastic(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got {M.shape}")
    if M.min() < 0:
        raise ValueError("matrix has negative entries")
    if np.max(np.abs(M.sum(axis=0) - 1)) > tol:
        raise ValueError("matrix columns do not sum to 1")
    return M


def exact_Ls(model: ErrorModel) -> list[np.ndarray]:
    return [compute_L(f) for f in _fiducial_stack(model)]

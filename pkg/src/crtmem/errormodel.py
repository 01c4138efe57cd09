"""Planted SPAM error models and the depolarized GHZ input state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from .qcore import DiagonalPOVM, GeneralPOVM

ZERO = qcore.PI0


@dataclass(frozen=True)
class NoiseConfig:
    n: int = 4
    state_depol: float = 2e-2
    gate_depol: float = 2e-4
    povm_noise_target: float = 0.06
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n <= 10:
            raise ValueError(f"n must be in [1, 10], got {self.n}")
        for name in ("state_depol", "gate_depol"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.povm_noise_target < 0:
            raise ValueError("povm_noise_target must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SingleQubitNoise:
    """Noisy |0> preparation and noisy pi/2 rotations on one qubit (PTMs)."""

    rho0: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        qcore.check_density_matrix(self.rho0)
        for name in ("gx", "gy"):
            g = np.asarray(getattr(self, name), dtype=float)
            if g.shape != (4, 4):
                raise qcore.DimensionError(f"{name} must be a 4x4 PTM")
            if np.max(np.abs(g[0] - [1, 0, 0, 0])) > 1e-8:
                raise ValueError(f"{name} is not trace preserving")


@dataclass(frozen=True)
class ErrorModel:
    n: int
    per_qubit: tuple[SingleQubitNoise, ...]
    povm: DiagonalPOVM | GeneralPOVM | None

    def __post_init__(self):
        if len(self.per_qubit) != self.n:
            raise ValueError(f"need {self.n} single-qubit noise records, got {len(self.per_qubit)}")
        if self.povm is not None and self.povm.dim != 2**self.n:
            raise qcore.DimensionError("POVM dimension does not match register")


def noisy_single_qubit(state_depol: float, gate_depol: float) -> SingleQubitNoise:
    """Depolarized |0> and pi/2 rotations followed by depolarization."""
    rho0 = (1 - state_depol) * ZERO + state_depol * qcore.I2 / 2
    dep = qcore.depolarizing_ptm(gate_depol)
    return SingleQubitNoise(
        rho0=rho0,
        gx=dep @ qcore.ptm_of_unitary(qcore.GX),
        gy=dep @ qcore.ptm_of_unitary(qcore.GY),
    )


def ideal_single_qubit() -> SingleQubitNoise:
    return noisy_single_qubit(0.0, 0.0)


def random_diagonal_povm(
    n: int,
    target: float,
    rng: np.random.Generator,
    max_step: float = 0.01,
    max_moves: int = 1_000_000,
) -> DiagonalPOVM:
    """Random correlated diagonal POVM with ``||R - I||_F == target``.

    Starting from the identity response, repeatedly move a fraction ``u`` of
    the probability mass of a randomly drawn outcome in a random column to a
    different random outcome, with ``u`` uniform in ``(0, max_step]``.  Every
    move keeps entries nonnegative and columns normalized.  The final move is
    shortened so the distance lands on ``target``.
    """
    d = 2**n
    cap = np.sqrt(2.0 * d)
    if target < 0:
        raise ValueError("target must be nonnegative")
    if target >= cap:
        raise ValueError(f"target {target} unreachable: ||R - I||_F < {cap:.4g} for n={n}")
    R = np.eye(d)
    if target == 0:
        return DiagonalPOVM(R)
    eye = np.eye(d)
    dist = 0.0
    for _ in range(max_moves):
        s = rng.integers(d)
        col = R[:, s]
        x1 = rng.choice(d, p=col / col.sum())
        x2 = rng.integers(d - 1)
        x2 += x2 >= x1
        delta = (1.0 - rng.random()) * max_step * col[x1]

        def moved(t):
            M = R.copy()
            M[x1, s] -= t
            M[x2, s] += t
            return M

        new = moved(delta)
        new_dist = np.linalg.norm(new - eye)
        if new_dist >= target:
            lo, hi = 0.0, delta
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if np.linalg.norm(moved(mid) - eye) < target:
                    lo = mid
                else:
                    hi = mid
            R = moved(hi)
            R[:, s] = np.clip(R[:, s], 0.0, None)
            R[:, s] /= R[:, s].sum()
            return DiagonalPOVM(R)
        R, dist = new, new_dist
    raise RuntimeError(f"POVM noise stalled at {dist:.4g} below target {target}")


def random_general_povm(n: int, rng: np.random.Generator, strength: float = 0.1) -> GeneralPOVM:
    """Non-diagonal POVM near the ideal projective measurement."""
    d = 2**n
    raw = []
    for x in range(d):
        A = strength * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        P = np.zeros((d, d), dtype=complex)
        P[x, x] = 1.0
        raw.append(P + A @ A.conj().T / d)
    S = sum(raw)
    w, V = np.linalg.eigh(S)
    S_inv_half = V @ np.diag(w**-0.5) @ V.conj().T
    elements = np.array([S_inv_half @ A @ S_inv_half for A in raw])
    elements = 0.5 * (elements + elements.conj().transpose(0, 2, 1))
    return GeneralPOVM(elements)


def random_single_qubit_noise(rng: np.random.Generator, scale: float = 0.05) -> SingleQubitNoise:
    """Random (non-depolarizing) preparation and gate errors for property tests."""
    # preparation: mix |0> with a random state
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    w = rng.uniform(0, scale)
    rho0 = (1 - w) * ZERO + w * np.outer(v, v.conj())

    def noisy(U):
        Hr = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        Hr = (Hr + Hr.conj().T) * scale / 4
        w_, V = np.linalg.eigh(Hr)
        over = V @ np.diag(np.exp(-1j * w_)) @ V.conj().T
        amp = rng.uniform(0, scale)
        kraus = [np.sqrt(1 - amp) * over @ U, np.sqrt(amp) * qcore.Z @ over @ U]
        return qcore.ptm_of_kraus(kraus)

    return SingleQubitNoise(rho0=0.5 * (rho0 + rho0.conj().T), gx=noisy(qcore.GX), gy=noisy(qcore.GY))


def build_planted_model(cfg: NoiseConfig, rng: np.random.Generator | None = None) -> ErrorModel:
    """Homogeneous depolarized states/gates, inhomogeneous correlated readout."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    sq = noisy_single_qubit(cfg.state_depol, cfg.gate_depol)
    povm = random_diagonal_povm(cfg.n, cfg.povm_noise_target, rng)
    return ErrorModel(n=cfg.n, per_qubit=(sq,) * cfg.n, povm=povm)


def ghz_state(n: int) -> np.ndarray:
    if n == 3:
        return qcore.apply_circuit(qcore.ghz3_circuit(), 3)
    if n == 4:
        return qcore.apply_circuit(qcore.ghz4_circuit(), 4)
    raise ValueError(f"GHZ targets exist for n in {{3, 4}}, got {n}")


def depolarized_ghz(n: int, eta: float) -> np.ndarray:
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    psi = ghz_state(n)
    d = 2**n
    rho = (1 - eta) * np.outer(psi, psi.conj()) + eta * np.eye(d) / d
    return qcore.check_density_matrix(0.5 * (rho + rho.conj().T))


def true_gamma(model: ErrorModel) -> np.ndarray:
    """Gamma(x|x') = <x'|E_x|x'>: readout with perfect classical inputs."""
    d = 2**model.n
    if model.povm is None:
        return np.eye(d)
    if isinstance(model.povm, DiagonalPOVM):
        return model.povm.response.copy()
    return np.real(np.diagonal(model.povm.elements, axis1=1, axis2=2)).copy()


def apply_gate_power(ptm: np.ndarray, rho: np.ndarray, power: int) -> np.ndarray:
    vec = qcore.pauli_vector(rho)
    for _ in range(power):
        vec = ptm @ vec
    return qcore.from_pauli_vector(vec)


def prepared_bit_state(sq: SingleQubitNoise, bit: int) -> np.ndarray:
    """rho0 for bit 0, G_x^2 rho0 for bit 1."""
    return sq.rho0 if bit == 0 else apply_gate_power(sq.gx, sq.rho0, 2)


def bits_of(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> (n - 1 - i)) & 1 for i in range(n))


def prepared_classical_state(model: ErrorModel, bits) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(b) for b in bits]
    bits = list(bits)
    if len(bits) != model.n:
        raise ValueError(f"bitstring length {len(bits)} != n={model.n}")
    return qcore.tensor_states([prepared_bit_state(sq, b) for sq, b in zip(model.per_qubit, bits)])


def marginal_effect(model: ErrorModel, qubit: int) -> np.ndarray:
    """Single-qubit effect for outcome 0 on ``qubit`` with the others idle in rho0."""
    n = model.n
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for n={n}")
    d = 2**n
    zero_outcomes = [x for x in range(d) if bits_of(x, n)[qubit] == 0]
    if model.povm is None:
        E = np.zeros((d, d), dtype=complex)
        for x in zero_outcomes:
            E[x, x] = 1.0
    elif isinstance(model.povm, DiagonalPOVM):
        E = np.diag(model.povm.response[zero_outcomes].sum(axis=0)).astype(complex)
    else:
        E = model.povm.elements[zero_outcomes].sum(axis=0)
    # contract each spectator qubit j against its prepared state:
    # E_q[a, b] = sum E[(.., a, ..), (.., b, ..)] rho_j[b_j, a_j]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row, col = letters[:n], letters[n : 2 * n]
    terms = [E.reshape((2,) * (2 * n))]
    subs = [row + col]
    for j in range(n):
        if j != qubit:
            terms.append(np.asarray(model.per_qubit[j].rho0))
            subs.append(col[j] + row[j])
    return np.einsum(",".join(subs) + "->" + row[qubit] + col[qubit], *terms)

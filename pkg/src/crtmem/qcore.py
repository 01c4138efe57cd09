"""Small dense linear algebra for qubit registers.

Conventions used throughout the package:

* Outcomes ``x`` in ``{0,1}^n`` are indexed with qubit 0 as the most
  significant bit, which is what ``np.kron`` produces naturally.
* Single-qubit states in the Pauli basis have components ``tr(rho sigma)/2``
  (``tr(rho sigma)/2**n`` for registers), effects have ``tr(E sigma)`` so that
  ``<<E|rho>> = tr(E rho)``.
* Pauli transfer matrices are ``R[s, s'] = tr(s G(s')) / d``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
PAULI_LABELS = "IXYZ"

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
SDG = np.diag([1, -1j])
T = np.diag([1, np.exp(1j * np.pi / 4)])
GX = (I2 - 1j * X) / np.sqrt(2)  # exp(-i pi X / 4)
GY = (I2 - 1j * Y) / np.sqrt(2)  # exp(-i pi Y / 4)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

SINGLE_QUBIT_GATES = {"H": H, "S": S, "S†": SDG, "Sdg": SDG, "T": T, "G_x": GX, "G_y": GY}
TWO_QUBIT_GATES = {"CNOT": CNOT}

# Ideal projectors pi_0, pi_1, pi_+, pi_+i.
PI0 = np.array([[1, 0], [0, 0]], dtype=complex)
PI1 = np.array([[0, 0], [0, 1]], dtype=complex)
PI_PLUS = np.array([[1, 1], [1, 1]], dtype=complex) / 2
PI_PLUS_I = np.array([[1, -1j], [1j, 1]], dtype=complex) / 2
PROJECTORS = (PI0, PI1, PI_PLUS, PI_PLUS_I)


class DimensionError(ValueError):
    """Operands have incompatible register sizes."""


def num_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if n < 0 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def check_pauli_word(word: str) -> str:
    if not word:
        raise ValueError("Pauli word must be nonempty")
    bad = set(word) - set(PAULI_LABELS)
    if bad:
        raise ValueError(f"invalid Pauli symbols {sorted(bad)} in {word!r}")
    return word


def pauli_words(n: int) -> list[str]:
    """All words over {I, X, Y, Z}^n, qubit 0 most significant."""
    return ["".join(w) for w in itertools.product(PAULI_LABELS, repeat=n)]


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def pauli_operator(word: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``"XZ"`` -> X (x) Z."""
    check_pauli_word(word)
    return kron_all(PAULIS[c] for c in word)


def check_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Validate and return ``rho`` as a complex density matrix.

    Raises ``ValueError`` when ``rho`` is not square, not Hermitian, not unit
    trace or has an eigenvalue below ``PSD_TOL``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    num_qubits(rho.shape[0])
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_TOL:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.3e} != 1")
    if np.linalg.eigvalsh(rho).min() < PSD_TOL:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionError(f"expected a single-qubit operator, got {rho.shape}")
    return np.array([np.trace(rho @ P).real for P in (X, Y, Z)])


def quasiprob_coeffs(rho: np.ndarray) -> np.ndarray:
    """Coefficients of ``rho`` in the projector basis (pi_0, pi_1, pi_+, pi_+i)."""
    x, y, z = bloch_vector(rho)
    return np.array([(1 - x - y + z) / 2, (1 - x - y - z) / 2, x, y])


def state_from_quasiprob(coeffs: Sequence[float]) -> np.ndarray:
    """Hermitian operator sum_l c_l pi_l.  Negative coefficients are allowed."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (4,):
        raise DimensionError("expected four quasiprobability coefficients")
    if abs(c.sum() - 1) > 1e-9:
        raise ValueError(f"quasiprobabilities sum to {c.sum()!r}, not 1")
    return np.einsum("l,lij->ij", c, np.array(PROJECTORS))


def tensor_states(parts: Sequence[np.ndarray]) -> np.ndarray:
    if len(parts) == 0:
        raise ValueError("need at least one state")
    return kron_all(np.asarray(p, dtype=complex) for p in parts)


def pauli_vector(op: np.ndarray) -> np.ndarray:
    """State-convention Pauli components tr(op sigma)/d over all words."""
    op = np.asarray(op, dtype=complex)
    n = num_qubits(op.shape[0])
    basis = pauli_basis(n)
    return np.einsum("kij,ji->k", basis, op).real / op.shape[0]


def from_pauli_vector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    n = num_qubits(int(round(np.sqrt(vec.shape[0]))))
    return np.einsum("k,kij->ij", vec, pauli_basis(n))


_BASIS_CACHE: dict[int, np.ndarray] = {}


def pauli_basis(n: int) -> np.ndarray:
    """Stack of the 4**n Pauli operators in word order."""
    if n not in _BASIS_CACHE:
        basis = np.array([pauli_operator(w) for w in pauli_words(n)])
        basis.setflags(write=False)
        _BASIS_CACHE[n] = basis
    return _BASIS_CACHE[n]


def check_unitary(U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(f"unitary must be square, got {U.shape}")
    num_qubits(U.shape[0])
    if np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))) > UNITARY_TOL:
        raise ValueError("matrix is not unitary")
    return U


def ptm_of_unitary(U: np.ndarray) -> np.ndarray:
    U = check_unitary(U)
    n = num_qubits(U.shape[0])
    basis = pauli_basis(n)
    conj = np.einsum("ij,kjl,ml->kim", U, basis, U.conj())
    return np.einsum("aij,bji->ab", basis, conj).real / U.shape[0]


def ptm_of_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    kraus = [np.asarray(K, dtype=complex) for K in kraus]
    d = kraus[0].shape[0]
    basis = pauli_basis(num_qubits(d))
    out = sum(np.einsum("ij,kjl,ml->kim", K, basis, K.conj()) for K in kraus)
    return np.einsum("aij,bji->ab", basis, out).real / d


def depolarizing_ptm(p: float, n: int = 1) -> np.ndarray:
    """PTM of rho -> (1-p) rho + p I/d."""
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing strength {p} outside [0, 1]")
    diag = np.full(4**n, 1.0 - p)
    diag[0] = 1.0
    return np.diag(diag)


def apply_ptm(ptm: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return from_pauli_vector(ptm @ pauli_vector(rho))


# -- statevector circuits -------------------------------------------------


def _apply_gate(state: np.ndarray, gate: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    k = len(qubits)
    psi = state.reshape((2,) * n)
    g = gate.reshape((2,) * (2 * k))
    psi = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), list(qubits)))
    psi = np.moveaxis(psi, list(range(k)), list(qubits))
    return psi.reshape(-1)


def apply_circuit(gates: Sequence[tuple[str, Sequence[int]]], n: int) -> np.ndarray:
    """Run ``[(name, qubits), ...]`` on |0...0> and return the statevector.

    Gate names: H, S, T, S† (alias Sdg), G_x, G_y and CNOT (control, target).
    """
    if n < 1:
        raise ValueError("register must have at least one qubit")
    state = np.zeros(2**n, dtype=complex)
    state[0] = 1.0
    for name, qubits in gates:
        qubits = [int(q) for q in (qubits if isinstance(qubits, (list, tuple)) else [qubits])]
        if name in SINGLE_QUBIT_GATES:
            gate, arity = SINGLE_QUBIT_GATES[name], 1
        elif name in TWO_QUBIT_GATES:
            gate, arity = TWO_QUBIT_GATES[name], 2
        else:
            raise ValueError(f"unknown gate {name!r}")
        if len(qubits) != arity or len(set(qubits)) != arity:
            raise ValueError(f"gate {name} needs {arity} distinct qubit(s), got {qubits}")
        if any(q < 0 or q >= n for q in qubits):
            raise IndexError(f"qubit index out of range in {name}{qubits} for n={n}")
        state = _apply_gate(state, gate, qubits, n)
    return state


def ghz3_circuit() -> list[tuple[str, list[int]]]:
    """Prepares (|000> + i|111>)/sqrt(2)."""
    return [("H", [0]), ("CNOT", [0, 1]), ("CNOT", [1, 2]), ("S", [0])]


def ghz4_circuit() -> list[tuple[str, list[int]]]:
    """Prepares (|0000> + exp(3 pi i/4)|1111>)/sqrt(2)."""
    return [
        ("H", [0]),
        ("CNOT", [0, 1]),
        ("CNOT", [1, 2]),
        ("CNOT", [2, 3]),
        ("S", [0]),
        ("T", [0]),
    ]


# -- measurement ----------------------------------------------------------


@dataclass(frozen=True)
class DiagonalPOVM:
    """POVM diagonal in the computational basis.

    ``response[x, s]`` is the probability of reading ``x`` from basis state
    ``s``; columns sum to one.
    """

    response: np.ndarray

    def __post_init__(self):
        R = np.array(self.response, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise DimensionError(f"response matrix must be square, got {R.shape}")
        num_qubits(R.shape[0])
        if R.min() < 0:
            raise ValueError("response matrix has negative entries")
        if np.max(np.abs(R.sum(axis=0) - 1)) > 1e-12:
            raise ValueError("response matrix columns do not sum to 1")
        R.setflags(write=False)
        object.__setattr__(self, "response", R)

    @property
    def dim(self) -> int:
        return self.response.shape[0]

    def elements(self) -> np.ndarray:
        return np.array([np.diag(row).astype(complex) for row in self.response])

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        return self.response @ np.real(np.diagonal(rho))


@dataclass(frozen=True)
class GeneralPOVM:
    """Dense POVM with ``elements[x]`` the PSD operator for outcome ``x``."""

    elements: np.ndarray

    def __post_init__(self):
        E = np.array(self.elements, dtype=complex)
        if E.ndim != 3 or E.shape[1] != E.shape[2] or E.shape[0] != E.shape[1]:
            raise DimensionError(f"expected 2^n elements of size 2^n, got {E.shape}")
        num_qubits(E.shape[0])
        if np.max(np.abs(E.sum(axis=0) - np.eye(E.shape[1]))) > 1e-10:
            raise ValueError("POVM elements do not sum to the identity")
        for k, Ex in enumerate(E):
            if np.max(np.abs(Ex - Ex.conj().T)) > 1e-10 or np.linalg.eigvalsh(Ex).min() < PSD_TOL:
                raise ValueError(f"POVM element {k} is not positive semidefinite")
        E.setflags(write=False)
        object.__setattr__(self, "elements", E)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("xij,ji->x", self.elements, rho).real


POVM = Union[DiagonalPOVM, GeneralPOVM, None]


def povm_probabilities(rho: np.ndarray, povm: POVM = None) -> np.ndarray:
    """Outcome distribution tr(E_x rho); ``povm=None`` is the ideal Z measurement."""
    rho = np.asarray(rho, dtype=complex)
    if povm is None:
        p = np.real(np.diagonal(rho)).copy()
    else:
        if povm.dim != rho.shape[0]:
            raise DimensionError(f"POVM dimension {povm.dim} does not match state {rho.shape[0]}")
        p = povm.probabilities(rho)
    # eigensolver-level negatives only
    p[np.abs(p) < 1e-15] = 0.0
    return p


def basis_change(word: str) -> np.ndarray:
    """H for X, H S† for Y, identity for Z and I."""
    rot = {"I": I2, "Z": I2, "X": H, "Y": H @ SDG}
    return kron_all(rot[c] for c in check_pauli_word(word))


def parity_signs(word: str) -> np.ndarray:
    """(-1)^(number of 1-bits among the non-identity positions) for every x."""
    n = len(word)
    x = np.arange(2**n)
    mask = 0
    for i, c in enumerate(word):
        if c != "I":
            mask |= 1 << (n - 1 - i)
    parity = np.array([bin(v).count("1") & 1 for v in (x & mask)])
    return 1.0 - 2.0 * parity


def expectation_from_distribution(p: np.ndarray, word: str) -> float:
    return float(parity_signs(word) @ np.asarray(p, dtype=float))


def rotate_for_measurement(rho: np.ndarray, word: str) -> np.ndarray:
    U = basis_change(word)
    if U.shape[0] != np.shape(rho)[0]:
        raise DimensionError(f"word {word!r} does not match state dimension {np.shape(rho)[0]}")
    return U @ rho @ U.conj().T


def measure_pauli(rho: np.ndarray, word: str, povm: POVM = None) -> tuple[np.ndarray, float]:
    """Measure the Pauli ``word`` through ``povm`` after the basis change.

    Returns the outcome distribution and the signed-parity expectation.
    """
    p = povm_probabilities(rotate_for_measurement(rho, word), povm)
    return p, expectation_from_distribution(p, word)

"""Dense state-vector and density-matrix engine for few-qubit protocol simulation.

Conventions used throughout the package:

- qubit 0 is the most significant bit of a basis index, i.e. the basis ket
  ``|q0 q1 ... q_{n-1}>`` sits at index ``sum(q_k * 2**(n-1-k))``;
- the computational basis identifies ``|0> = |H>`` (horizontal polarization)
  and ``|1> = |V>`` (vertical);
- measurement outcome 0 always corresponds to the first basis vector of the
  chosen basis (``|0>``, ``|+>`` or ``|+alpha>``);
- ``Rz(alpha) = diag(exp(-i alpha/2), exp(+i alpha/2))``.

All state objects are immutable; every operation returns a new value, so
values can be shared freely across threads.  Randomized operations take an
explicit ``numpy.random.Generator`` (usually derived from :class:`Seed`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

ATOL = 1e-10
EIG_FLOOR = -1e-9
_ZERO_PROB = 1e-12

_SQ2 = math.sqrt(2.0)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / _SQ2
CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)

_PAULI_MATRICES = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# (a, b) -> (letter of a*b, phase of a*b)
_PAULI_PRODUCT = {
    ("I", "I"): ("I", 1), ("I", "X"): ("X", 1), ("I", "Y"): ("Y", 1), ("I", "Z"): ("Z", 1),
    ("X", "I"): ("X", 1), ("X", "X"): ("I", 1), ("X", "Y"): ("Z", 1j), ("X", "Z"): ("Y", -1j),
    ("Y", "I"): ("Y", 1), ("Y", "X"): ("Z", -1j), ("Y", "Y"): ("I", 1), ("Y", "Z"): ("X", 1j),
    ("Z", "I"): ("Z", 1), ("Z", "X"): ("Y", 1j), ("Z", "Y"): ("X", -1j), ("Z", "Z"): ("I", 1),
}


def rz_matrix(alpha: float) -> np.ndarray:
    """Rotation about Z: diag(exp(-i alpha/2), exp(+i alpha/2))."""
    return np.array(
        [[np.exp(-0.5j * alpha), 0.0], [0.0, np.exp(0.5j * alpha)]], dtype=complex
    )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVector:
    """Pure n-qubit state as a dense complex amplitude vector."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2 ** self.n_qubits:
            raise ValueError(
                f"amplitude vector has length {amps.shape[0]}, "
                f"expected {2 ** self.n_qubits}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"state vector is not normalized (norm {norm})")
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @classmethod
    def from_amplitudes(cls, amps: Iterable[complex], normalize: bool = False) -> "StateVector":
        arr = np.asarray(list(amps) if not isinstance(amps, np.ndarray) else amps,
                         dtype=complex).reshape(-1)
        n = int(round(math.log2(arr.shape[0])))
        if 2 ** n != arr.shape[0]:
            raise ValueError("amplitude vector length must be a power of two")
        if normalize:
            norm = np.linalg.norm(arr)
            if norm < 1e-15:
                raise ValueError("cannot normalize the zero vector")
            arr = arr / norm
        return cls(n, arr)

    @classmethod
    def basis_state(cls, n_qubits: int, bits: Union[int, str, Sequence[int]]) -> "StateVector":
        """Computational basis ket; ``bits`` may be an index, bitstring or bit list."""
        if isinstance(bits, str):
            index = int(bits, 2)
        elif isinstance(bits, int):
            index = bits
        else:
            index = 0
            for b in bits:
                index = (index << 1) | int(b)
        amps = np.zeros(2 ** n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    def amplitude(self, bits: Union[int, str]) -> complex:
        index = int(bits, 2) if isinstance(bits, str) else bits
        return complex(self.amplitudes[index])

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(self.n_qubits + other.n_qubits,
                           np.kron(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other: "StateVector") -> complex:
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed n-qubit state as a dense Hermitian, trace-one matrix."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = np.array(self.matrix, dtype=complex)
        dim = 2 ** self.n_qubits
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix has shape {mat.shape}, expected ({dim}, {dim})")
        if not np.allclose(mat, mat.conj().T, atol=1e-8):
            raise ValueError("density matrix is not Hermitian")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"density matrix has trace {tr}, expected 1")
        object.__setattr__(self, "matrix", _freeze(mat))

    @classmethod
    def from_statevector(cls, psi: StateVector) -> "DensityMatrix":
        return psi.density()

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2 ** n_qubits
        return cls(n_qubits, np.eye(dim, dtype=complex) / dim)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


State = Union[StateVector, DensityMatrix]


@dataclass(frozen=True)
class PauliString:
    """A signed tensor product of single-qubit Pauli operators."""

    letters: str
    phase: complex = 1 + 0j

    def __post_init__(self) -> None:
        if any(c not in "IXYZ" for c in self.letters):
            raise ValueError(f"invalid Pauli letters: {self.letters!r}")
        phase = complex(self.phase)
        if not any(abs(phase - p) < 1e-12 for p in (1, -1, 1j, -1j)):
            raise ValueError(f"phase must be one of +-1, +-i, got {phase}")
        object.__setattr__(self, "phase", phase)

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if len(other) != len(self):
            raise ValueError("Pauli string lengths differ")
        phase = self.phase * other.phase
        letters = []
        for a, b in zip(self.letters, other.letters):
            letter, extra = _PAULI_PRODUCT[(a, b)]
            letters.append(letter)
            phase *= extra
        return PauliString("".join(letters), phase)

    @classmethod
    def from_support(cls, n_qubits: int, assignments: dict[int, str],
                     phase: complex = 1) -> "PauliString":
        letters = ["I"] * n_qubits
        for q, letter in assignments.items():
            letters[q] = letter
        return cls("".join(letters), phase)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    @property
    def weight(self) -> int:
        return len(self.support)

    def is_hermitian(self) -> bool:
        return abs(self.phase.imag) < 1e-12

    def matrix(self) -> np.ndarray:
        out = np.array([[self.phase]], dtype=complex)
        for c in self.letters:
            out = np.kron(out, _PAULI_MATRICES[c])
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """Phenomenological noise knobs for state preparation.

    ``white_noise_v`` keeps the state with weight v and admixes the maximally
    mixed state with weight 1-v.  ``pair_dephasing_d`` applies, per declared
    interfering pair, ``rho -> (1-d) rho + d (Z@Z) rho (Z@Z)``.
    ``epr_visibility`` models an imperfect pair source: per declared pair it
    phase-flips the first member with probability (1-V)/2, which on a Bell
    pair leaves <XX> = V.
    """

    white_noise_v: float = 1.0
    pair_dephasing_d: float = 0.0
    epr_visibility: float = 1.0

    def __post_init__(self) -> None:
        for name in ("white_noise_v", "pair_dephasing_d", "epr_visibility"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")

    def is_noiseless(self) -> bool:
        return (self.white_noise_v == 1.0 and self.pair_dephasing_d == 0.0
                and self.epr_visibility == 1.0)


@dataclass(frozen=True)
class Seed:
    """Master seed with counter-based stream derivation.

    ``stream(*key)`` returns a generator that depends only on the master seed
    and the key tuple, so independent sub-computations draw from independent,
    reproducible streams regardless of execution order.
    """

    master_seed: int

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def stream(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=tuple(key))
        return np.random.default_rng(ss)


# --------------------------------------------------------------------------
# tensor helpers


def _apply_on_axes(tensor: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply the 2^k x 2^k matrix ``u`` to the listed tensor axes."""
    k = len(axes)
    nd = tensor.ndim
    tensor = np.moveaxis(tensor, axes, range(k))
    rest = tensor.shape[k:]
    tensor = tensor.reshape(2 ** k, -1)
    tensor = u @ tensor
    tensor = tensor.reshape((2,) * k + rest)
    return np.moveaxis(tensor, range(k), axes)


def _gate_matrix(gate: str, alpha: float | None) -> np.ndarray:
    name = gate.upper()
    if name in ("RZ", "RZ(ALPHA)"):
        if alpha is None:
            raise ValueError("Rz requires an alpha angle")
        return rz_matrix(alpha)
    try:
        return {
            "H": HADAMARD, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z,
            "CNOT": CNOT_MATRIX, "CZ": CZ_MATRIX,
        }[name]
    except KeyError:
        raise ValueError(f"unknown gate {gate!r}") from None


def _check_targets(n: int, targets: Sequence[int], arity: int) -> None:
    if len(targets) != arity:
        raise ValueError(f"gate expects {arity} target(s), got {len(targets)}")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {tuple(targets)}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target {t} out of range for {n} qubits")


def apply_gate(state: State, gate: str, targets: Sequence[int], *,
               alpha: float | None = None) -> State:
    """Apply a named unitary (H, X, Y, Z, Rz(alpha), CNOT, CZ) to a state.

    For a density matrix the map is rho -> U rho U^dagger.  For CNOT the
    first target is the control.
    """
    u = _gate_matrix(gate, alpha)
    arity = int(round(math.log2(u.shape[0])))
    targets = list(targets)
    _check_targets(_n_qubits(state), targets, arity)
    if isinstance(state, StateVector):
        n = state.n_qubits
        psi = state.amplitudes.reshape((2,) * n)
        psi = _apply_on_axes(psi, u, targets)
        return StateVector(n, psi.reshape(-1))
    n = state.n_qubits
    t = state.matrix.reshape((2,) * (2 * n))
    t = _apply_on_axes(t, u, targets)
    t = _apply_on_axes(t, u.conj(), [n + q for q in targets])
    return DensityMatrix(n, t.reshape(2 ** n, 2 ** n))


def _n_qubits(state: State) -> int:
    return state.n_qubits


def apply_pauli_word(state: State, word: str, qubit: int) -> State:
    """Apply an operator word over {H, X, Y, Z} to one qubit, rightmost first."""
    for letter in reversed(word):
        if letter == "I":
            continue
        state = apply_gate(state, letter, [qubit])
    return state


def partial_trace(rho: DensityMatrix, discard: Iterable[int]) -> DensityMatrix:
    """Trace out the listed qubits; survivors keep their relative order."""
    discard = sorted(set(discard))
    n = rho.n_qubits
    if not discard:
        raise ValueError("discard set is empty")
    for q in discard:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for {n} qubits")
    if len(discard) == n:
        raise ValueError("cannot discard every qubit")
    t = rho.matrix.reshape((2,) * (2 * n))
    cur = n
    for q in reversed(discard):
        t = np.trace(t, axis1=q, axis2=q + cur)
        cur -= 1
    dim = 2 ** cur
    return DensityMatrix(cur, t.reshape(dim, dim))


class MeasurementResult(NamedTuple):
    outcome: int
    state: DensityMatrix
    probability: float


def basis_vectors(basis: str, alpha: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return the (outcome 0, outcome 1) single-qubit basis kets.

    ``"z"`` is {|0>, |1>}, ``"x"`` is {|+>, |->}, and ``"b"`` is
    {(|0> + e^{i alpha}|1>)/sqrt2, (|0> - e^{i alpha}|1>)/sqrt2}.
    """
    name = basis.lower()
    if name == "z":
        return (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))
    if name == "x":
        return (np.array([1, 1], dtype=complex) / _SQ2,
                np.array([1, -1], dtype=complex) / _SQ2)
    if name == "b":
        if alpha is None:
            raise ValueError("B(alpha) basis requires alpha")
        phase = np.exp(1j * alpha)
        return (np.array([1, phase], dtype=complex) / _SQ2,
                np.array([1, -phase], dtype=complex) / _SQ2)
    raise ValueError(f"unknown basis {basis!r}")


def _project_out(rho: DensityMatrix, qubit: int, vec: np.ndarray) -> tuple[np.ndarray, float]:
    """Project one qubit onto ``vec`` and remove it; returns (matrix, prob)."""
    n = rho.n_qubits
    t = rho.matrix.reshape((2,) * (2 * n))
    t = np.moveaxis(t, (qubit, n + qubit), (0, 1))
    collapsed = np.einsum("i,ij...,j->...", vec.conj(), t, vec)
    dim = 2 ** (n - 1)
    collapsed = collapsed.reshape(dim, dim)
    prob = float(np.real(np.trace(collapsed)))
    return collapsed, prob


def measure(rho: DensityMatrix, qubit: int, basis: str = "z", *,
            alpha: float | None = None, forced: int | None = None,
            rng: np.random.Generator | None = None) -> MeasurementResult:
    """Projectively measure one qubit and remove it from the state.

    The outcome is drawn from ``rng`` unless ``forced`` selects a branch
    explicitly; forcing a branch of (numerically) zero probability raises.
    Outcome 0 corresponds to the first basis vector.
    """
    if not 0 <= qubit < rho.n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {rho.n_qubits} qubits")
    b0, b1 = basis_vectors(basis, alpha)
    m0, p0 = _project_out(rho, qubit, b0)
    m1, p1 = _project_out(rho, qubit, b1)
    if forced is not None:
        if forced not in (0, 1):
            raise ValueError("forced outcome must be 0 or 1")
        outcome = forced
        prob = (p0, p1)[forced]
        if prob < _ZERO_PROB:
            raise ValueError(
                f"forced outcome {forced} has zero probability ({prob:.3e})"
            )
    else:
        if rng is None:
            raise ValueError("measure needs either an rng or a forced outcome")
        outcome = 0 if rng.random() < p0 / (p0 + p1) else 1
        prob = (p0, p1)[outcome]
    mat = (m0, m1)[outcome] / prob
    mat = 0.5 * (mat + mat.conj().T)  # scrub roundoff asymmetry
    return MeasurementResult(outcome, DensityMatrix(rho.n_qubits - 1, mat), prob)


def _apply_pauli_letters_sv(psi: np.ndarray, n: int, pauli: PauliString) -> np.ndarray:
    t = psi.reshape((2,) * n)
    for q, letter in enumerate(pauli.letters):
        if letter != "I":
            t = _apply_on_axes(t, _PAULI_MATRICES[letter], [q])
    return t.reshape(-1)


def expectation(state: State, obs: PauliString) -> float:
    """Expectation value Tr(rho P) (or <psi|P|psi>) of a Hermitian Pauli string."""
    n = _n_qubits(state)
    if len(obs) != n:
        raise ValueError(f"Pauli string length {len(obs)} does not match {n} qubits")
    if isinstance(state, StateVector):
        phi = _apply_pauli_letters_sv(state.amplitudes, n, obs)
        val = obs.phase * np.vdot(state.amplitudes, phi)
    else:
        val = obs.phase * np.trace(state.matrix @ obs.matrix())
    if abs(val.imag) > 1e-8:
        raise ValueError(f"expectation of non-Hermitian observable (got {val})")
    return float(val.real)


def fidelity_pure(psi: StateVector, rho: Union[DensityMatrix, StateVector]) -> float:
    """Overlap F = <psi| rho |psi> of a pure target with a (possibly mixed) state."""
    if rho.n_qubits != psi.n_qubits:
        raise ValueError("dimension mismatch between target and state")
    if isinstance(rho, StateVector):
        return float(abs(psi.inner(rho)) ** 2)
    val = np.vdot(psi.amplitudes, rho.matrix @ psi.amplitudes)
    return float(val.real)


def _conjugate_mix(rho_mat: np.ndarray, n: int, weight: float,
                   paulis: dict[int, str]) -> np.ndarray:
    """(1-w) rho + w P rho P for a product of single-qubit Paulis P."""
    t = rho_mat.reshape((2,) * (2 * n))
    for q, letter in paulis.items():
        u = _PAULI_MATRICES[letter]
        t = _apply_on_axes(t, u, [q])
        t = _apply_on_axes(t, u.conj(), [n + q])
    flipped = t.reshape(rho_mat.shape)
    return (1.0 - weight) * rho_mat + weight * flipped


def apply_channel(rho: DensityMatrix, spec: NoiseSpec,
                  ideal: StateVector | None = None,
                  interfering_pairs: Sequence[tuple[int, int]] = ()) -> DensityMatrix:
    """Apply the preparation-noise channel described by ``spec``.

    Components compose in the listed order: white noise first, then for each
    declared pair the ZZ dephasing map, then the pair-source visibility map
    (a phase flip on the first member of each pair with probability (1-V)/2).
    All three maps are unital and mutually commuting, so the order is a
    documentation choice rather than a physical one.
    """
    n = rho.n_qubits
    if ideal is not None and ideal.n_qubits != n:
        raise ValueError("ideal state dimension does not match rho")
    pairs = [tuple(p) for p in interfering_pairs]
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"invalid interfering pair ({i}, {j})")
    mat = np.array(rho.matrix)
    v = spec.white_noise_v
    if v < 1.0:
        mat = v * mat + (1.0 - v) * np.eye(2 ** n, dtype=complex) / 2 ** n
    if spec.pair_dephasing_d > 0.0:
        for i, j in pairs:
            mat = _conjugate_mix(mat, n, spec.pair_dephasing_d, {i: "Z", j: "Z"})
    if spec.epr_visibility < 1.0:
        flip = (1.0 - spec.epr_visibility) / 2.0
        for i, _ in pairs:
            mat = _conjugate_mix(mat, n, flip, {i: "Z"})
    return DensityMatrix(n, mat)

"""Projector decomposition, measurement-setting grouping, and fidelity estimation.

The fidelity F = <psi| rho |psi> is estimated from local measurement
settings.  A setting assigns one basis per qubit, drawn from Z, X, Y or an
equatorial basis M(theta) with kets (|0> +- e^{i theta}|1>)/sqrt2 (X = M(0),
Y = M(90deg)).  Grouping is deterministic:

1. if the decomposition has diagonal (I/Z-only) terms, one all-Z setting
   covers them;
2. if the full-weight X/Y terms form a complete parity-coherence family
   (all 2^{n-1} even-Y patterns with coefficients c0 * (-1)^{#Y/2}), the
   family is measured through n equatorial settings M(k pi / n)^(x n) via
   the exact identity  |0..0><1..1| + h.c. = (1/n) sum_k (-1)^k M_k^(x n);
3. remaining terms are covered greedily by per-qubit Pauli settings, largest
   fresh coverage first with lexicographic tie-breaking.

Error bars propagate per-outcome Poisson variances (var(count) = count)
through the linear estimator; multinomial covariance corrections are
deliberately not applied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence, Union

import numpy as np

from .qsim import DensityMatrix, PauliString, Seed, StateVector, expectation

MAX_DECOMP_QUBITS = 6

_SQ2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PauliDecomposition:
    """Real-weighted Pauli expansion of a pure-state projector."""

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self) -> None:
        for coeff, pauli in self.terms:
            if len(pauli) != self.n_qubits:
                raise ValueError("term length does not match qubit count")
            if not pauli.is_hermitian():
                raise ValueError("decomposition terms must be Hermitian")

    def reconstruct(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for coeff, pauli in self.terms:
            out += coeff * pauli.matrix()
        return out


def decompose_projector(psi: StateVector) -> PauliDecomposition:
    """Expand |psi><psi| as sum_P c_P P with c_P = <psi|P|psi> / 2^n.

    Terms with |c_P| < 1e-12 are dropped; the all-identity term is kept (it
    needs no measurement setting).
    """
    n = psi.n_qubits
    if n > MAX_DECOMP_QUBITS:
        raise ValueError(f"decomposition limited to {MAX_DECOMP_QUBITS} qubits, got {n}")
    scale = 1.0 / 2 ** n
    terms = []
    for letters in product("IXYZ", repeat=n):
        pauli = PauliString("".join(letters))
        coeff = expectation(psi, pauli) * scale
        if abs(coeff) >= 1e-12:
            terms.append((coeff, pauli))
    return PauliDecomposition(n, tuple(terms))


def _equatorial_token(degrees: int) -> str:
    deg = degrees % 360
    if deg == 0:
        return "X"
    if deg == 90:
        return "Y"
    return f"M{deg}"


def basis_matrix(token: str) -> np.ndarray:
    """Unitary whose columns are the (outcome 0, outcome 1) basis kets."""
    if token == "Z":
        return np.eye(2, dtype=complex)
    if token == "X":
        theta = 0.0
    elif token == "Y":
        theta = math.pi / 2
    elif token.startswith("M"):
        theta = math.radians(int(token[1:]))
    else:
        raise ValueError(f"unknown basis token {token!r}")
    phase = np.exp(1j * theta)
    return np.array([[1, 1], [phase, -phase]], dtype=complex) / _SQ2


@dataclass(frozen=True)
class Setting:
    """One per-qubit basis assignment and the decomposition terms it serves.

    ``covered`` holds indices into the decomposition's term tuple.  Plain
    Pauli settings estimate each covered term as a +-1 product over the
    term's support.  Equatorial coherence settings carry ``ghz_sign`` and
    ``ghz_weight``; the covered family contributes
    ghz_weight * ghz_sign * <product of all outcomes> per setting.
    """

    bases: tuple[str, ...]
    covered: tuple[int, ...]
    ghz_sign: int = 0
    ghz_weight: float = 0.0

    def is_equatorial_family(self) -> bool:
        return self.ghz_sign != 0

    def label(self) -> str:
        return ".".join(self.bases)


def _is_diagonal(pauli: PauliString) -> bool:
    return all(c in "IZ" for c in pauli.letters)


def _compatible(pauli: PauliString, bases: tuple[str, ...]) -> bool:
    return all(c == "I" or c == b for c, b in zip(pauli.letters, bases))


def _coherence_family(decomp: PauliDecomposition) -> tuple[float, tuple[int, ...]] | None:
    """Detect the complete even-Y X/Y family with GHZ sign structure."""
    n = decomp.n_qubits
    indices = [i for i, (_, p) in enumerate(decomp.terms)
               if p.weight == n and all(c in "XY" for c in p.letters)]
    if len(indices) != 2 ** (n - 1):
        return None
    c0 = None
    seen = set()
    for i in indices:
        coeff, pauli = decomp.terms[i]
        n_y = pauli.letters.count("Y")
        if n_y % 2:
            return None
        seen.add(pauli.letters)
        expected_sign = (-1) ** (n_y // 2)
        base = coeff * expected_sign
        if c0 is None:
            c0 = base
        elif abs(base - c0) > 1e-12:
            return None
    if len(seen) != 2 ** (n - 1):
        return None
    return c0, tuple(indices)


def group_settings(decomp: PauliDecomposition) -> list[Setting]:
    """Deterministic measurement settings covering every non-identity term.

    Output is sorted lexicographically by basis tokens.  Every non-identity
    term is covered by at least one setting; shared terms are later
    estimated from the lexicographically first covering setting.
    """
    n = decomp.n_qubits
    settings: list[Setting] = []
    nonid = [i for i, (_, p) in enumerate(decomp.terms) if p.weight > 0]
    claimed: set[int] = set()

    diag = [i for i in nonid if _is_diagonal(decomp.terms[i][1])]
    if diag:
        all_z = tuple("Z" for _ in range(n))
        covered = tuple(i for i in nonid if _compatible(decomp.terms[i][1], all_z))
        settings.append(Setting(all_z, covered))
        claimed.update(covered)

    family = _coherence_family(decomp)
    family_indices: tuple[int, ...] = ()
    if family is not None:
        c0, family_indices = family
        weight = c0 * 2 ** (n - 1) / n
        for k in range(n):
            tokens = tuple(_equatorial_token(round(k * 180 / n)) for _ in range(n))
            settings.append(Setting(tokens, family_indices,
                                    ghz_sign=(-1) ** k, ghz_weight=weight))
        claimed.update(family_indices)

    remaining = [i for i in nonid if i not in claimed]
    pauli_indices = [i for i in nonid if i not in family_indices]
    while remaining:
        best: tuple[int, tuple[str, ...]] | None = None
        best_new = 0
        for tokens in product("XYZ", repeat=n):
            new = sum(1 for i in remaining if _compatible(decomp.terms[i][1], tokens))
            if new > best_new or (new == best_new and best is not None and tokens < best[1]):
                best = (new, tokens)
                best_new = new
        if best is None or best_new == 0:
            raise RuntimeError("greedy cover failed to progress")  # pragma: no cover
        tokens = best[1]
        covered = tuple(i for i in pauli_indices if _compatible(decomp.terms[i][1], tokens))
        settings.append(Setting(tokens, covered))
        remaining = [i for i in remaining if not _compatible(decomp.terms[i][1], tokens)]

    return sorted(settings, key=lambda s: (s.bases, -s.ghz_sign))


@dataclass(frozen=True)
class CountsTable:
    """Outcome histogram of one measurement setting."""

    setting: Setting
    shots: int
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=float)
        k = len(self.setting.bases)
        if counts.shape != (2 ** k,):
            raise ValueError(f"expected {2 ** k} outcome bins, got {counts.shape}")
        if abs(counts.sum() - self.shots) > 1e-6:
            raise ValueError("counts do not sum to the shot count")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


def setting_probabilities(rho: DensityMatrix, setting: Setting) -> np.ndarray:
    """Exact outcome probabilities of measuring every qubit in the setting bases."""
    n = rho.n_qubits
    if len(setting.bases) != n:
        raise ValueError("setting size does not match the state")
    t = rho.matrix.reshape((2,) * (2 * n))
    from .qsim import _apply_on_axes  # shared tensor helper

    for q, token in enumerate(setting.bases):
        u = basis_matrix(token)
        t = _apply_on_axes(t, u.conj().T, [q])
        t = _apply_on_axes(t, u.T, [n + q])
    mat = t.reshape(2 ** n, 2 ** n)
    probs = np.real(np.diag(mat)).copy()
    probs[probs < 0] = 0.0
    return probs / probs.sum()


def simulate_counts(rho: DensityMatrix, setting: Setting, shots: int,
                    seed: Union[Seed, np.random.Generator, int]) -> CountsTable:
    """Multinomially sampled coincidence histogram for one setting."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if isinstance(seed, Seed):
        rng = seed.stream(0)
    elif isinstance(seed, (int, np.integer)):
        rng = Seed(int(seed)).stream(0)
    else:
        rng = seed
    probs = setting_probabilities(rho, setting)
    counts = rng.multinomial(shots, probs)
    return CountsTable(setting, shots, counts)


def exact_counts(rho: DensityMatrix, setting: Setting, shots: int) -> CountsTable:
    """Infinite-statistics table: fractional counts shots * p(outcome)."""
    probs = setting_probabilities(rho, setting)
    return CountsTable(setting, shots, probs * shots)


def _sign_vector(n: int, support: Iterable[int]) -> np.ndarray:
    outcomes = np.arange(2 ** n)
    parity = np.zeros(2 ** n, dtype=int)
    for q in support:
        parity ^= (outcomes >> (n - 1 - q)) & 1
    return 1.0 - 2.0 * parity


def estimate_fidelity(tables: Sequence[CountsTable],
                      decomp: PauliDecomposition) -> tuple[float, float]:
    """Fidelity estimate and propagated Poisson error from counts tables.

    Each plain term is read from the lexicographically first covering
    setting; equatorial family settings contribute their signed full-product
    averages.  Raises if some term is covered by no table.
    """
    n = decomp.n_qubits
    by_setting: dict[Setting, CountsTable] = {}
    for table in tables:
        by_setting[table.setting] = table
    ordered = sorted(by_setting, key=lambda s: (s.bases, -s.ghz_sign))

    # per-setting accumulated outcome weights: F = sum_s w_s . counts_s + c_id
    weights: dict[Setting, np.ndarray] = {
        s: np.zeros(2 ** n, dtype=float) for s in ordered
    }

    fidelity = 0.0
    claimed_by_family: set[int] = set()
    for setting in ordered:
        if setting.is_equatorial_family():
            sign = _sign_vector(n, range(n))
            weights[setting] += setting.ghz_weight * setting.ghz_sign * sign
            claimed_by_family.update(setting.covered)

    for idx, (coeff, pauli) in enumerate(decomp.terms):
        if pauli.weight == 0:
            fidelity += coeff
            continue
        if idx in claimed_by_family:
            continue
        holder = None
        for setting in ordered:
            if not setting.is_equatorial_family() and idx in setting.covered:
                holder = setting
                break
        if holder is None:
            raise ValueError(f"term {pauli.letters} is not covered by any table")
        weights[holder] += coeff * _sign_vector(n, pauli.support)

    variance = 0.0
    for setting in ordered:
        table = by_setting[setting]
        w = weights[setting] / table.shots
        fidelity += float(w @ table.counts)
        variance += float((w ** 2) @ table.counts)
    return fidelity, math.sqrt(variance)


def write_counts_csv(tables: Sequence[CountsTable], path: str) -> None:
    """Export histograms with columns setting, outcome, count."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "outcome", "count"])
        for table in tables:
            k = len(table.setting.bases)
            for o, c in enumerate(table.counts):
                writer.writerow([table.setting.label(), format(o, f"0{k}b"),
                                 int(c) if float(c).is_integer() else c])


def read_counts_csv(path: str) -> list[CountsTable]:
    """Reload histograms; settings come back with bases only (no term links)."""
    rows: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.setdefault(row["setting"], {})[row["outcome"]] = float(row["count"])
    tables = []
    for label, outcome_map in rows.items():
        bases = tuple(label.split("."))
        k = len(bases)
        counts = np.zeros(2 ** k)
        for outcome, count in outcome_map.items():
            counts[int(outcome, 2)] = count
        tables.append(CountsTable(Setting(bases, ()), int(round(counts.sum())), counts))
    return tables

"""Detected-loss erasure, recoverability, and feedforward recovery plans.

A detected loss is modeled as a partial trace: the position is known, the
polarization is not.  Recovery measures every surviving qubit except one
target and applies a correction word from {H, X, Z} keyed on two parity
bits:

- every non-target block is removed by Z-measuring all of its survivors;
  each such block contributes one representative outcome (its survivors are
  perfectly correlated in the noiseless code) and the XOR of representatives
  is the z-parity;
- the target block is collapsed onto the target qubit by X-measuring its
  other qubits; the XOR of those outcomes is the x-parity;
- the correction word is H * X^z_parity * Z^x_parity, applied rightmost
  first, which reproduces the (2, 2) single-loss feedforward table
  {(0,0): H, (1,0): HX, (0,1): HZ, (1,1): HXZ}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .codes import CodeParams, LogicalInput, encode
from .qsim import (
    DensityMatrix,
    NoiseSpec,
    StateVector,
    apply_channel,
    apply_pauli_word,
    fidelity_pure,
    measure,
    partial_trace,
)

CORRECTION_TABLE: dict[tuple[int, int], str] = {
    (0, 0): "H",
    (1, 0): "HX",
    (0, 1): "HZ",
    (1, 1): "HXZ",
}


@dataclass(frozen=True)
class LossPattern:
    """Set of detected-lost physical qubit indices."""

    lost: frozenset[int]

    def __init__(self, lost: Iterable[int] = ()) -> None:
        object.__setattr__(self, "lost", frozenset(int(q) for q in lost))

    def validate(self, params: CodeParams) -> None:
        for q in self.lost:
            if not 0 <= q < params.total:
                raise ValueError(f"lost qubit {q} out of range for {params.total} qubits")


@dataclass(frozen=True)
class RecoveryPlan:
    """Measurement schedule and correction table for a given loss pattern.

    ``z_measurements`` lists the Z-measured qubits in execution order,
    grouped per block in ``z_blocks`` for parity bookkeeping;
    ``x_measurements`` lists the X-measured qubits of the target block.
    """

    params: CodeParams
    pattern: LossPattern
    z_measurements: tuple[int, ...]
    x_measurements: tuple[int, ...]
    target: int
    correction_table: dict[tuple[int, int], str] = field(default_factory=lambda: dict(CORRECTION_TABLE))
    z_blocks: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        measured = set(self.z_measurements) | set(self.x_measurements)
        if self.target in measured:
            raise ValueError("target qubit may not be measured")
        if set(self.z_measurements) & set(self.x_measurements):
            raise ValueError("z and x measurement lists overlap")
        everything = measured | {self.target} | set(self.pattern.lost)
        if everything != set(range(self.params.total)):
            raise ValueError("plan does not partition the physical qubits")

    @property
    def measurement_order(self) -> tuple[int, ...]:
        return self.z_measurements + self.x_measurements

    @property
    def survivors(self) -> tuple[int, ...]:
        return tuple(sorted(set(range(self.params.total)) - self.pattern.lost))


@dataclass(frozen=True)
class RecoveryRecord:
    """One executed recovery branch."""

    outcomes: dict[int, int]
    correction_applied: str
    output: DensityMatrix
    fidelity_vs_input: float | None
    probability: float


def erase(rho: DensityMatrix, pattern: LossPattern) -> DensityMatrix:
    """Trace out the lost qubits; survivors are renumbered in ascending order."""
    if not pattern.lost:
        return rho
    if len(pattern.lost) >= rho.n_qubits:
        raise ValueError("cannot erase every qubit")
    return partial_trace(rho, pattern.lost)


def recoverable(params: CodeParams, pattern: LossPattern) -> bool:
    """True iff every block keeps a survivor and at least one block is intact."""
    pattern.validate(params)
    losses_per_block = [0] * params.m
    for q in pattern.lost:
        losses_per_block[params.block_of(q)] += 1
    if any(lost == params.n for lost in losses_per_block):
        return False
    return any(lost == 0 for lost in losses_per_block)


def _default_target(params: CodeParams, intact_blocks: Sequence[int]) -> int:
    return params.block_qubits(min(intact_blocks))[-1]


def _build_plan(params: CodeParams, pattern: LossPattern, target: int | None,
                intact_blocks: Sequence[int]) -> RecoveryPlan:
    if target is None:
        target = _default_target(params, intact_blocks)
    target_block = params.block_of(target)
    if target_block not in intact_blocks:
        raise ValueError(f"target qubit {target} lies in a damaged block")
    lost = pattern.lost
    z_blocks = []
    z_list: list[int] = []
    for b in range(params.m):
        if b == target_block:
            continue
        survivors = tuple(q for q in params.block_qubits(b) if q not in lost)
        if survivors:
            z_blocks.append(survivors)
            z_list.extend(survivors)
    x_list = tuple(q for q in params.block_qubits(target_block) if q != target)
    return RecoveryPlan(
        params=params,
        pattern=pattern,
        z_measurements=tuple(z_list),
        x_measurements=x_list,
        target=target,
        z_blocks=tuple(z_blocks),
    )


def plan_recovery(params: CodeParams, pattern: LossPattern,
                  target: int | None = None) -> RecoveryPlan:
    """Measurement-and-correction plan decoding the logical qubit onto ``target``.

    The target defaults to the highest-index qubit of the lowest-index intact
    block.  Raises if the pattern is not recoverable.
    """
    if not recoverable(params, pattern):
        raise ValueError(f"loss pattern {sorted(pattern.lost)} is not recoverable")
    intact = [b for b in range(params.m)
              if not any(q in pattern.lost for q in params.block_qubits(b))]
    return _build_plan(params, pattern, target, intact)


def best_effort_plan(params: CodeParams, pattern: LossPattern,
                     target: int | None = None) -> RecoveryPlan:
    """Decoding plan for unrecoverable patterns (fully lost blocks allowed).

    Fully lost blocks contribute no z-parity information; their sign is
    assumed 0, so the output is generally mixed.
    """
    pattern.validate(params)
    intact = [b for b in range(params.m)
              if not any(q in pattern.lost for q in params.block_qubits(b))]
    if not intact:
        raise ValueError("no intact block to host the output qubit")
    return _build_plan(params, pattern, target, intact)


def _reference_state(reference: LogicalInput | StateVector | None) -> StateVector | None:
    if reference is None:
        return None
    if isinstance(reference, LogicalInput):
        return reference.statevector()
    if reference.n_qubits != 1:
        raise ValueError("reference must be a single-qubit state")
    return reference


def execute_recovery(rho: DensityMatrix, plan: RecoveryPlan, *,
                     reference: LogicalInput | StateVector | None = None,
                     forced: Sequence[int] | None = None,
                     rng: np.random.Generator | None = None) -> RecoveryRecord:
    """Run the plan's measurements on the post-loss state and correct the target.

    ``rho`` must hold exactly the surviving qubits, ascending by original
    index.  ``forced`` selects outcome bits in plan order (all Z
    measurements, then all X measurements); otherwise outcomes are sampled
    from ``rng``.
    """
    labels = list(plan.survivors)
    if rho.n_qubits != len(labels):
        raise ValueError(
            f"state has {rho.n_qubits} qubits but the plan expects {len(labels)} survivors"
        )
    order = plan.measurement_order
    if forced is not None and len(forced) != len(order):
        raise ValueError(f"expected {len(order)} forced outcomes, got {len(forced)}")
    outcomes: dict[int, int] = {}
    probability = 1.0
    state = rho
    for i, qubit in enumerate(order):
        basis = "z" if i < len(plan.z_measurements) else "x"
        want = forced[i] if forced is not None else None
        out, state, p = measure(state, labels.index(qubit), basis, forced=want, rng=rng)
        labels.remove(qubit)
        outcomes[qubit] = out
        probability *= p
    z_parity = 0
    for block in plan.z_blocks:
        z_parity ^= outcomes[block[0]]
    x_parity = 0
    for qubit in plan.x_measurements:
        x_parity ^= outcomes[qubit]
    word = plan.correction_table[(z_parity, x_parity)]
    state = apply_pauli_word(state, word, labels.index(plan.target))
    ref = _reference_state(reference)
    fid = fidelity_pure(ref, state) if ref is not None else None
    return RecoveryRecord(outcomes, word, state, fid, probability)


@dataclass(frozen=True)
class SweepRow:
    """One (input, loss, branch) cell of a recovery sweep."""

    input_name: str
    lost: int
    branch: str
    probability: float
    fidelity: float
    sigma: float


def _shot_sigma(fidelity: float, shots: int) -> float:
    # Shot noise of estimating F from `shots` two-outcome target projections.
    f = min(max(fidelity, 0.0), 1.0)
    if f < 1e-9 or f > 1.0 - 1e-9:  # suppress roundoff residue at the endpoints
        return 0.0
    return math.sqrt(f * (1.0 - f) / shots)


def recovery_sweep(inputs: Sequence[LogicalInput], params: CodeParams,
                   noise: NoiseSpec | None = None, shots: int = 10000, *,
                   losses: Sequence[int] | None = None,
                   pairs_for: Callable[[LogicalInput], Sequence[tuple[int, int]]] | None = None,
                   ) -> list[SweepRow]:
    """Exhaustive branch table over (input, single lost qubit, outcome branch).

    Every branch is executed with forced outcomes, so each row carries the
    exact branch probability and output fidelity; ``sigma`` is the shot
    noise a ``shots``-sample estimate of that fidelity would carry.
    Zero-probability branches are omitted.  Rows are ordered by input (as
    given), lost qubit ascending, then branch bits lexicographically.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    loss_positions = list(losses) if losses is not None else list(range(params.total))
    rows: list[SweepRow] = []
    for inp in inputs:
        psi = encode(inp, params)
        rho = psi.density()
        if noise is not None and not noise.is_noiseless():
            pairs = tuple(pairs_for(inp)) if pairs_for is not None else ()
            rho = apply_channel(rho, noise, ideal=psi, interfering_pairs=pairs)
        for lost_q in loss_positions:
            pattern = LossPattern({lost_q})
            plan = plan_recovery(params, pattern)
            reduced = erase(rho, pattern)
            n_meas = len(plan.measurement_order)
            for bits in product((0, 1), repeat=n_meas):
                try:
                    rec = execute_recovery(reduced, plan, reference=inp, forced=bits)
                except ValueError:
                    continue  # zero-probability branch
                rows.append(SweepRow(
                    input_name=inp.name or "custom",
                    lost=lost_q,
                    branch="".join(str(b) for b in bits),
                    probability=rec.probability,
                    fidelity=rec.fidelity_vs_input,
                    sigma=_shot_sigma(rec.fidelity_vs_input, shots),
                ))
    return rows

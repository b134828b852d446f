"""Party operations on tripartite scenarios, with classification and cost
ledgers.

The free classes are: local operations by Alice and Bob, local *reversible*
operations by Eve, quantum sends from Alice/Bob to Eve, classical broadcasts
by Alice/Bob (Eve cannot refuse to receive, so every broadcast appends a
copy for all three parties), and pairwise classical messages.  Classical
communication downward from Eve copies an existing classical (diagonal)
register of Eve's to the receiver; creating the message by measurement
would be irreversible for Eve and is therefore not available.  Non-free
steps (quantum sends from Eve, secret or quantum communication between
Alice and Bob, irreversible Eve channels via the bypass flag) are simulated
too, with quantum cost ``qc_bits`` accrued as log2 of the moved dimension
and classical downward cost ``cdown_bits`` as log2 of the message size.

Message registers produced here are ordinary registers that happen to be
diagonal; later steps may act on them like any other register.

Scenarios are immutable; ``apply_step`` returns a new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    BadMu,
    DimensionMismatch,
    IrreversibleEveOp,
    NotClassicalRegister,
    UnknownLabel,
)
from .registers import Party, Register
from .states import ChannelMap, DensityState, apply_channel, partial_trace

CLASSICAL_TOL = 1e-8


@dataclass(frozen=True)
class CostLedger:
    """Communication bits spent so far; never decreases."""

    qc_bits: float = 0.0
    cdown_bits: float = 0.0

    def __post_init__(self):
        if self.qc_bits < 0 or self.cdown_bits < 0:
            raise BadMu("ledger entries must be nonnegative")

    def add(self, qc=0.0, cdown=0.0) -> "CostLedger":
        return CostLedger(self.qc_bits + qc, self.cdown_bits + cdown)

    def to_dict(self) -> dict:
        return {"qc_bits": self.qc_bits, "cdown_bits": self.cdown_bits}


@dataclass(frozen=True)
class Scenario:
    """A party-tagged state plus its accumulated communication costs."""

    state: DensityState
    ledger: CostLedger = field(default_factory=CostLedger)

    def __post_init__(self):
        for reg in self.state.layout.registers:
            if reg.party is Party.REFERENCE:
                raise DimensionMismatch(
                    f"scenario registers need a party; {reg.label!r} is a reference register"
                )

    def labels_of(self, party) -> tuple[str, ...]:
        return self.state.layout.party_labels(party)


class StepKind(Enum):
    LOCAL_A = "local_a"
    LOCAL_B = "local_b"
    REVERSIBLE_E = "reversible_e"
    QUANTUM_TO_E = "quantum_to_e"
    QUANTUM_FROM_E = "quantum_from_e"
    BROADCAST_A = "broadcast_a"
    BROADCAST_B = "broadcast_b"
    CLASSICAL_A_TO_E = "classical_a_to_e"
    CLASSICAL_E_TO_A = "classical_e_to_a"
    CLASSICAL_B_TO_E = "classical_b_to_e"
    CLASSICAL_E_TO_B = "classical_e_to_b"
    SECRET_AB = "secret_ab"
    QUANTUM_AB = "quantum_ab"


NON_FREE_KINDS = {StepKind.SECRET_AB, StepKind.QUANTUM_AB}
CDOWN_KINDS = {StepKind.CLASSICAL_E_TO_A, StepKind.CLASSICAL_E_TO_B}


class ScriptClass(Enum):
    OMEGA = "omega"
    OMEGA_STAR = "omega_star"
    OMEGA_Q = "omega_q"
    NON_FREE = "non_free"


@dataclass(frozen=True)
class Step:
    """One operation; which payload fields apply depends on ``kind``."""

    kind: StepKind
    channel: ChannelMap | None = None
    on: tuple[str, ...] = ()
    out: tuple[Register, ...] | None = None
    discard: tuple[str, ...] = ()
    register: str | None = None
    to: Party | None = None
    operators: tuple[np.ndarray, ...] = ()
    msg_label: str | None = None
    sender: Party | None = None
    bypass: bool = False

    # -- constructors ------------------------------------------------------
    @classmethod
    def local_a(cls, channel, on, out=None):
        return cls(StepKind.LOCAL_A, channel=channel, on=tuple(on), out=_regs(out))

    @classmethod
    def local_b(cls, channel, on, out=None):
        return cls(StepKind.LOCAL_B, channel=channel, on=tuple(on), out=_regs(out))

    @classmethod
    def discard_a(cls, labels):
        return cls(StepKind.LOCAL_A, discard=tuple(labels))

    @classmethod
    def discard_b(cls, labels):
        return cls(StepKind.LOCAL_B, discard=tuple(labels))

    @classmethod
    def reversible_e(cls, channel, on, out=None, bypass=False):
        return cls(
            StepKind.REVERSIBLE_E, channel=channel, on=tuple(on), out=_regs(out), bypass=bypass
        )

    @classmethod
    def quantum_to_e(cls, register):
        return cls(StepKind.QUANTUM_TO_E, register=register)

    @classmethod
    def quantum_from_e(cls, register, to):
        return cls(StepKind.QUANTUM_FROM_E, register=register, to=Party(to))

    @classmethod
    def quantum_ab(cls, register, to):
        return cls(StepKind.QUANTUM_AB, register=register, to=Party(to))

    @classmethod
    def broadcast_a(cls, operators, on, msg_label):
        return cls(StepKind.BROADCAST_A, operators=_ops(operators), on=tuple(on), msg_label=msg_label)

    @classmethod
    def broadcast_b(cls, operators, on, msg_label):
        return cls(StepKind.BROADCAST_B, operators=_ops(operators), on=tuple(on), msg_label=msg_label)

    @classmethod
    def classical_a_to_e(cls, operators, on, msg_label):
        return cls(
            StepKind.CLASSICAL_A_TO_E, operators=_ops(operators), on=tuple(on), msg_label=msg_label
        )

    @classmethod
    def classical_b_to_e(cls, operators, on, msg_label):
        return cls(
            StepKind.CLASSICAL_B_TO_E, operators=_ops(operators), on=tuple(on), msg_label=msg_label
        )

    @classmethod
    def classical_e_to_a(cls, register, msg_label=None):
        return cls(StepKind.CLASSICAL_E_TO_A, register=register, msg_label=msg_label)

    @classmethod
    def classical_e_to_b(cls, register, msg_label=None):
        return cls(StepKind.CLASSICAL_E_TO_B, register=register, msg_label=msg_label)

    @classmethod
    def secret_ab(cls, operators, on, msg_label, sender="alice"):
        return cls(
            StepKind.SECRET_AB,
            operators=_ops(operators),
            on=tuple(on),
            msg_label=msg_label,
            sender=Party(sender),
        )


def _ops(operators):
    return tuple(np.asarray(op, dtype=complex) for op in operators)


def _regs(out):
    if out is None:
        return None
    return tuple(out)


# ---------------------------------------------------------------------------
# step application


def _require_party(state: DensityState, labels, party: Party):
    for lbl in labels:
        reg = state.layout.register(lbl)
        if reg.party is not party:
            raise UnknownLabel(f"register {lbl!r} belongs to {reg.party.value}, not {party.value}")


def _local_channel(sc: Scenario, step: Step, party: Party) -> Scenario:
    if step.discard:
        _require_party(sc.state, step.discard, party)
        keep = [lbl for lbl in sc.state.layout.labels if lbl not in set(step.discard)]
        return replace(sc, state=partial_trace(sc.state, keep))
    _require_party(sc.state, step.on, party)
    if step.out is not None:
        for reg in step.out:
            if reg.party is not party:
                raise DimensionMismatch(
                    f"output register {reg.label!r} must stay with {party.value}"
                )
    new_state = apply_channel(sc.state, step.channel, step.on, step.out)
    return replace(sc, state=new_state)


def _reversible_e(sc: Scenario, step: Step) -> Scenario:
    _require_party(sc.state, step.on, Party.EVE)
    if not step.bypass:
        if step.channel.declared_inverse is None:
            raise IrreversibleEveOp("Eve's local operations must carry a declared inverse")
        step.channel.verify_inverse()
    if step.out is not None:
        for reg in step.out:
            if reg.party is not Party.EVE:
                raise DimensionMismatch(f"output register {reg.label!r} must stay with eve")
    new_state = apply_channel(sc.state, step.channel, step.on, step.out)
    return replace(sc, state=new_state)


def _retag(sc: Scenario, register: str, source_parties, target: Party, qc=0.0) -> Scenario:
    reg = sc.state.layout.register(register)
    if reg.party not in source_parties:
        raise UnknownLabel(
            f"register {register!r} belongs to {reg.party.value}; expected one of "
            f"{[p.value for p in source_parties]}"
        )
    state = DensityState(sc.state.layout.retagged(register, target), sc.state.matrix)
    return Scenario(state, sc.ledger.add(qc=qc))


def _measure_and_copy(sc: Scenario, step: Step, sender: Party, receivers) -> Scenario:
    """Measure the sender's block and append one classical copy per receiver."""
    _require_party(sc.state, step.on, sender)
    n_out = len(step.operators)
    if n_out < 1:
        raise DimensionMismatch("need at least one measurement operator")
    block_dim = sc.state.layout.dim_of(step.on)
    for op in step.operators:
        if op.shape != (block_dim, block_dim):
            raise DimensionMismatch(
                f"measurement operators must be square of dim {block_dim}, got {op.shape}"
            )
    copies = tuple(
        Register(f"{step.msg_label}_{party.value[0].upper()}", n_out, party)
        for party in receivers
    )
    lifted = []
    for m, op in enumerate(step.operators):
        tail = np.zeros((n_out ** len(copies), 1), dtype=complex)
        tail[sum(m * n_out**i for i in range(len(copies))), 0] = 1.0
        lifted.append(np.kron(op, tail))
    on_regs = tuple(sc.state.layout.register(lbl) for lbl in step.on)
    chan = ChannelMap(tuple(lifted))
    interim = apply_channel(sc.state, chan, step.on, on_regs + copies)
    order = sc.state.layout.labels + tuple(r.label for r in copies)
    return replace(sc, state=interim.permuted(order))


def _is_classical(state: DensityState, label: str, tol=CLASSICAL_TOL) -> bool:
    """Whether the state is block-diagonal in the register's basis."""
    axis = state.layout.index(label)
    dims = state.layout.dims
    n = len(dims)
    order = [i for i in range(n) if i != axis] + [axis]
    t = state.matrix.reshape(dims * 2).transpose(order + [n + i for i in order])
    d = dims[axis]
    rest = state.dim // d
    t = t.reshape(rest, d, rest, d)
    off = t.copy()
    idx = np.arange(d)
    off[:, idx, :, idx] = 0.0
    return float(np.max(np.abs(off))) <= tol


def _copy_down(sc: Scenario, step: Step, receiver: Party) -> Scenario:
    reg = sc.state.layout.register(step.register)
    if reg.party is not Party.EVE:
        raise UnknownLabel(f"register {step.register!r} is not Eve's")
    if not _is_classical(sc.state, step.register):
        raise NotClassicalRegister(
            f"register {step.register!r} is not classical (diagonal) within {CLASSICAL_TOL}"
        )
    d = reg.dim
    base = step.msg_label or f"{step.register}_c"
    copy_reg = Register(f"{base}_{receiver.value[0].upper()}", d, receiver)
    kraus = []
    for m in range(d):
        k = np.zeros((d * d, d), dtype=complex)
        k[m * d + m, m] = 1.0
        kraus.append(k)
    interim = apply_channel(sc.state, ChannelMap(tuple(kraus)), (step.register,), (reg, copy_reg))
    order = sc.state.layout.labels + (copy_reg.label,)
    state = interim.permuted(order)
    return Scenario(state, sc.ledger.add(cdown=math.log2(d)))


def apply_step(sc: Scenario, step: Step) -> Scenario:
    kind = step.kind
    if kind is StepKind.LOCAL_A:
        return _local_channel(sc, step, Party.ALICE)
    if kind is StepKind.LOCAL_B:
        return _local_channel(sc, step, Party.BOB)
    if kind is StepKind.REVERSIBLE_E:
        return _reversible_e(sc, step)
    if kind is StepKind.QUANTUM_TO_E:
        return _retag(sc, step.register, (Party.ALICE, Party.BOB), Party.EVE)
    if kind is StepKind.QUANTUM_FROM_E:
        reg = sc.state.layout.register(step.register)
        return _retag(
            sc, step.register, (Party.EVE,), step.to, qc=math.log2(reg.dim)
        )
    if kind is StepKind.QUANTUM_AB:
        return _retag(sc, step.register, (Party.ALICE, Party.BOB), step.to)
    if kind is StepKind.BROADCAST_A:
        return _measure_and_copy(sc, step, Party.ALICE, (Party.ALICE, Party.BOB, Party.EVE))
    if kind is StepKind.BROADCAST_B:
        return _measure_and_copy(sc, step, Party.BOB, (Party.ALICE, Party.BOB, Party.EVE))
    if kind is StepKind.CLASSICAL_A_TO_E:
        return _measure_and_copy(sc, step, Party.ALICE, (Party.ALICE, Party.EVE))
    if kind is StepKind.CLASSICAL_B_TO_E:
        return _measure_and_copy(sc, step, Party.BOB, (Party.BOB, Party.EVE))
    if kind is StepKind.CLASSICAL_E_TO_A:
        return _copy_down(sc, step, Party.ALICE)
    if kind is StepKind.CLASSICAL_E_TO_B:
        return _copy_down(sc, step, Party.BOB)
    if kind is StepKind.SECRET_AB:
        return _measure_and_copy(sc, step, step.sender, (Party.ALICE, Party.BOB))
    raise DimensionMismatch(f"unhandled step kind {kind}")


# ---------------------------------------------------------------------------
# scripts


def classify_script(steps) -> ScriptClass:
    steps = tuple(steps)
    non_free = any(
        s.kind in NON_FREE_KINDS or (s.kind is StepKind.REVERSIBLE_E and s.bypass) for s in steps
    )
    has_qdown = any(s.kind is StepKind.QUANTUM_FROM_E for s in steps)
    has_cdown = any(s.kind in CDOWN_KINDS for s in steps)
    if non_free or (has_qdown and has_cdown):
        return ScriptClass.NON_FREE
    if has_qdown:
        return ScriptClass.OMEGA_Q
    if has_cdown:
        return ScriptClass.OMEGA_STAR
    return ScriptClass.OMEGA


@dataclass(frozen=True)
class ScriptRun:
    final: Scenario
    classification: ScriptClass
    step_ledgers: tuple[CostLedger, ...]


def run_script(sc: Scenario, steps) -> ScriptRun:
    """Apply steps in order; ledger totals are the sums over steps."""
    steps = tuple(steps)
    snapshots = []
    current = sc
    for step in steps:
        current = apply_step(current, step)
        snapshots.append(current.ledger)
    return ScriptRun(current, classify_script(steps), tuple(snapshots))


# ---------------------------------------------------------------------------
# cost-conversion arithmetic


@dataclass(frozen=True)
class DilutionConversion:
    """Per-round quantum cost of simulating classical downward messages
    coherently across ``l`` protocol copies, with the guaranteed bound."""

    per_step_bits: tuple[float, ...]
    total_bits: float
    conversion_bound: float

    def to_dict(self) -> dict:
        return {
            "per_step_bits": list(self.per_step_bits),
            "total_bits": self.total_bits,
            "conversion_bound": self.conversion_bound,
        }


def dilution_conversion_cost(mu, l: int) -> DilutionConversion:
    """Quantum bits per message round: log2(ceil(sqrt(mu^l))).

    ``mu`` lists the classical message sizes per round (each >= 2 so every
    round costs at least one classical bit); the total never exceeds
    (l/2 + 1) times the classical downward cost sum(log2 mu).
    """
    mu = [int(m) for m in mu]
    if not mu or any(m < 2 for m in mu):
        raise BadMu(f"every message size must be an integer >= 2, got {mu}")
    if int(l) < 1 or l != int(l):
        raise BadMu(f"copy count l must be a positive integer, got {l}")
    l = int(l)
    per = []
    for m in mu:
        n = m**l
        s = math.isqrt(n)
        if s * s < n:
            s += 1
        per.append(math.log2(s))
    total = float(sum(per))
    bound = (l / 2 + 1) * float(sum(math.log2(m) for m in mu))
    assert total <= bound + 1e-12
    return DilutionConversion(tuple(per), total, bound)

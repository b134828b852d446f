"""Register bookkeeping: labeled, party-tagged subsystems with dimensions.

A :class:`RegisterLayout` is an ordered list of registers.  Order is
significant everywhere: matrices are stored row-major in the big-endian
register order of the layout (first register is the most significant
index), which pins down one unambiguous convention for tensor products,
partial traces and permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import BadDims, DuplicateLabel, UnknownLabel


class Party(str, Enum):
    ALICE = "alice"
    BOB = "bob"
    EVE = "eve"
    REFERENCE = "reference"


def _coerce_party(party) -> Party:
    if isinstance(party, Party):
        return party
    return Party(str(party).lower())


@dataclass(frozen=True)
class Register:
    """One labeled subsystem with a dimension and an owning party."""

    label: str
    dim: int
    party: Party

    def __post_init__(self):
        object.__setattr__(self, "party", _coerce_party(self.party))
        if not isinstance(self.dim, int) or self.dim < 1:
            raise BadDims(f"register {self.label!r} needs a positive integer dim, got {self.dim!r}")


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered collection of registers; the index space of a state matrix."""

    registers: tuple[Register, ...]

    def __post_init__(self):
        regs = tuple(self.registers)
        object.__setattr__(self, "registers", regs)
        labels = [r.label for r in regs]
        if len(set(labels)) != len(labels):
            dupes = sorted({lbl for lbl in labels if labels.count(lbl) > 1})
            raise DuplicateLabel(f"duplicate register labels: {dupes}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self):
        return len(self.registers)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"no register labeled {label!r} (have {list(self.labels)})") from None

    def register(self, label: str) -> Register:
        return self.registers[self.index(label)]

    def positions(self, labels) -> tuple[int, ...]:
        """Positions of ``labels`` in layout order (input order is ignored)."""
        idx = sorted(self.index(lbl) for lbl in labels)
        return tuple(idx)

    def dim_of(self, labels) -> int:
        return math.prod(self.registers[i].dim for i in self.positions(labels))

    def subset(self, labels) -> "RegisterLayout":
        """The sub-layout of ``labels``, kept in original order."""
        return RegisterLayout(tuple(self.registers[i] for i in self.positions(labels)))

    def party_labels(self, party) -> tuple[str, ...]:
        party = _coerce_party(party)
        return tuple(r.label for r in self.registers if r.party is party)

    def retagged(self, label: str, party) -> "RegisterLayout":
        """Same layout with one register assigned to a different party."""
        i = self.index(label)
        regs = list(self.registers)
        regs[i] = Register(label, regs[i].dim, _coerce_party(party))
        return RegisterLayout(tuple(regs))

    def extended(self, new_registers) -> "RegisterLayout":
        return RegisterLayout(self.registers + tuple(new_registers))

    def without(self, labels) -> "RegisterLayout":
        drop = set(labels)
        for lbl in drop:
            self.index(lbl)
        return RegisterLayout(tuple(r for r in self.registers if r.label not in drop))

    def reordered(self, labels) -> "RegisterLayout":
        if sorted(labels) != sorted(self.labels):
            raise UnknownLabel(f"reorder labels {labels!r} do not match layout {self.labels!r}")
        return RegisterLayout(tuple(self.registers[self.index(lbl)] for lbl in labels))


def layout(*specs) -> RegisterLayout:
    """Build a layout from ``(label, dim, party)`` triples."""
    return RegisterLayout(tuple(Register(lbl, dim, party) for lbl, dim, party in specs))

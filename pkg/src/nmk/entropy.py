"""Entropic functionals in bits: von Neumann entropy, conditional entropy,
mutual information, conditional quantum mutual information (CQMI), and the
half-CQMI non-Markovianity measure.

Base-2 logarithms throughout.  Eigenvalues are clamped at 1e-12 before the
log, with 0 log 0 = 0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import OverlappingPartition
from .states import DensityState, _clamped_eigvalsh, partial_trace

LOG_CLAMP = 1e-12


def entropy_from_eigs(vals: np.ndarray) -> float:
    """Shannon entropy in bits of a spectrum (values below 1e-12 dropped)."""
    vals = np.asarray(vals, dtype=float)
    vals = vals[vals > LOG_CLAMP]
    if vals.size == 0:
        return 0.0
    return float(-np.sum(vals * np.log2(vals)))


def entropy_of_matrix(matrix: np.ndarray) -> float:
    return entropy_from_eigs(_clamped_eigvalsh(matrix))


def entropy(state: DensityState, subset=None) -> float:
    """Von Neumann entropy of the reduced state on ``subset``, in bits."""
    if subset is None:
        return entropy_of_matrix(state.matrix)
    subset = tuple(subset)
    if not subset:
        raise OverlappingPartition("entropy needs a nonempty register subset")
    return entropy_of_matrix(partial_trace(state, subset).matrix)


def conditional_entropy(state: DensityState, x, given) -> float:
    """S(X|Y) = S(XY) - S(Y)."""
    x, given = tuple(x), tuple(given)
    if set(x) & set(given):
        raise OverlappingPartition("conditioning registers overlap the target")
    if not given:
        return entropy(state, x)
    return entropy(state, x + given) - entropy(state, given)


def mutual_info(state: DensityState, x, y) -> float:
    """I(X:Y) = S(X) + S(Y) - S(XY); zero when either group is empty."""
    x, y = tuple(x), tuple(y)
    if set(x) & set(y):
        raise OverlappingPartition("mutual information needs disjoint groups")
    if not x or not y:
        return 0.0
    return entropy(state, x) + entropy(state, y) - entropy(state, x + y)


def _as_groups(a, b, e):
    a = (a,) if isinstance(a, str) else tuple(a)
    b = (b,) if isinstance(b, str) else tuple(b)
    e = (e,) if isinstance(e, str) else tuple(e)
    if (set(a) & set(b)) or (set(a) & set(e)) or (set(b) & set(e)):
        raise OverlappingPartition(f"partition groups overlap: {a}, {b}, {e}")
    return a, b, e


def cqmi(state: DensityState, a, b, e) -> float:
    """I(A:B|E) = S(AE) + S(BE) - S(ABE) - S(E); registers outside the
    partition are traced out first.  E may be empty."""
    a, b, e = _as_groups(a, b, e)
    if not a or not b:
        return 0.0
    union = a + b + e
    if set(union) != set(state.layout.labels):
        state = partial_trace(state, union)
    s_abe = entropy(state, union)
    s_ae = entropy(state, a + e)
    s_be = entropy(state, b + e)
    s_e = entropy(state, e) if e else 0.0
    return s_ae + s_be - s_abe - s_e


def nonmarkovianity(state: DensityState, a=None, b=None, e=None) -> float:
    """Half the conditional quantum mutual information, in bits.

    With no explicit partition, the register party tags define the groups.
    """
    if a is None and b is None and e is None:
        a, b, e = party_partition(state)
    return 0.5 * cqmi(state, a, b, e)


def party_partition(state: DensityState):
    """(alice, bob, eve) label groups from the layout's party tags."""
    lay = state.layout
    return (
        lay.party_labels("alice"),
        lay.party_labels("bob"),
        lay.party_labels("eve"),
    )


@dataclass(frozen=True)
class EntropyReport:
    """Entropic summary of a named tripartite partition, all in bits."""

    a: tuple[str, ...]
    b: tuple[str, ...]
    e: tuple[str, ...]
    s_a: float
    s_b: float
    s_e: float
    s_abe: float
    s_ab_given_e: float
    i_a_b: float
    cqmi_bits: float
    m_i_bits: float

    def to_dict(self) -> dict:
        return asdict(self)


def entropy_report(state: DensityState, a=None, b=None, e=None) -> EntropyReport:
    if a is None and b is None and e is None:
        a, b, e = party_partition(state)
    a, b, e = _as_groups(a, b, e)
    union = a + b + e
    if not union:
        raise OverlappingPartition("the partition selects no registers")
    if set(union) != set(state.layout.labels):
        state = partial_trace(state, union)
    s_e = entropy(state, e) if e else 0.0
    s_abe = entropy(state, union)
    value = cqmi(state, a, b, e)
    return EntropyReport(
        a=a,
        b=b,
        e=e,
        s_a=entropy(state, a) if a else 0.0,
        s_b=entropy(state, b) if b else 0.0,
        s_e=s_e,
        s_abe=s_abe,
        s_ab_given_e=s_abe - s_e,
        i_a_b=mutual_info(state, a, b),
        cqmi_bits=value,
        m_i_bits=0.5 * value,
    )

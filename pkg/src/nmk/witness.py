"""Witnesses for the non-Markovianity of formation.

A witness is a feasible point of the formation infimum: an ensemble of pure
states on the target registers extended by ``A'``, ``B'``, ``E'``, together
with a classical flag register ``K`` recording which member occurred.  Its
realized state is block diagonal over ``K``, and the witness objective

    1/2 [ I(AA':BB'|K) + I(AB:E'K|E) ]

evaluated on that state upper-bounds the formation measure of the reduced
target state.  Reductions are computed from the ensemble members directly
(the realized state is block diagonal by construction), never by
materializing the full joint matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .entropy import entropy_from_eigs, entropy_of_matrix
from .errors import (
    BadRange,
    DimensionMismatch,
    DimensionTooSmall,
    InvariantViolation,
    LayoutClash,
    UnknownLabel,
)
from .markov import MarkovComponents, build_markov
from .registers import Party, Register, RegisterLayout
from .states import (
    DensityState,
    PureState,
    _clamped_eigvalsh,
    _pure_reduced_matrix,
    purify,
    trace_distance,
)

WEIGHT_TOL = 1e-10
PRUNE_TOL = 1e-14


@dataclass(frozen=True)
class WitnessGroups:
    """Role assignment of the member registers."""

    a: tuple[str, ...]
    a_prime: tuple[str, ...]
    b: tuple[str, ...]
    b_prime: tuple[str, ...]
    e: tuple[str, ...]
    e_prime: tuple[str, ...]

    def all_labels(self) -> tuple[str, ...]:
        return self.a + self.a_prime + self.b + self.b_prime + self.e + self.e_prime

    def role_of(self, label: str) -> str:
        for role in ("a", "a_prime", "b", "b_prime", "e", "e_prime"):
            if label in getattr(self, role):
                return role
        raise UnknownLabel(f"label {label!r} is in no witness group")


@dataclass(frozen=True)
class Witness:
    """Ensemble of pure members with a role grouping and a classical flag."""

    layout: RegisterLayout
    groups: WitnessGroups
    weights: tuple[float, ...]
    members: tuple[np.ndarray, ...]
    k_label: str = "K"

    def __post_init__(self):
        members = tuple(np.ascontiguousarray(m, dtype=complex) for m in self.members)
        for m in members:
            m.flags.writeable = False
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", tuple(float(p) for p in self.weights))
        if len(self.weights) != len(self.members) or not self.members:
            raise DimensionMismatch("weights and members must pair up nonempty")
        total = sum(self.weights)
        if any(p < -WEIGHT_TOL for p in self.weights) or abs(total - 1.0) > WEIGHT_TOL:
            raise InvariantViolation("weights", f"weights must sum to 1, got {total}")
        d = self.layout.dim
        for m in self.members:
            if m.shape != (d,):
                raise DimensionMismatch(f"member shape {m.shape} does not match layout dim {d}")
            if abs(np.linalg.norm(m) - 1.0) > 1e-9:
                raise InvariantViolation("unit_norm", "witness members must be normalized")
        if sorted(self.groups.all_labels()) != sorted(self.layout.labels):
            raise LayoutClash("witness groups must partition the member layout")
        if self.k_label in self.layout:
            raise LayoutClash(f"flag label {self.k_label!r} clashes with a member register")

    # -- basic views -------------------------------------------------------
    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def ext_dims(self) -> dict:
        lay = self.layout
        return {
            "a_prime": lay.dim_of(self.groups.a_prime) if self.groups.a_prime else 1,
            "b_prime": lay.dim_of(self.groups.b_prime) if self.groups.b_prime else 1,
            "e_prime": lay.dim_of(self.groups.e_prime) if self.groups.e_prime else 1,
            "k": self.k,
        }

    def member_pure(self, i: int) -> PureState:
        return PureState(self.layout, self.members[i])

    def _axes(self, labels) -> list[int]:
        return sorted(self.layout.index(lbl) for lbl in labels)

    def _member_reduced(self, i: int, labels) -> np.ndarray:
        return _pure_reduced_matrix(self.members[i], self.layout.dims, self._axes(labels))

    def _mix_reduced(self, labels) -> np.ndarray:
        axes = self._axes(labels)
        dims = self.layout.dims
        out = None
        for p, m in zip(self.weights, self.members):
            if p <= PRUNE_TOL:
                continue
            red = p * _pure_reduced_matrix(m, dims, axes)
            out = red if out is None else out + red
        return out

    def _entropy_mix(self, labels) -> float:
        if not labels:
            return 0.0
        return entropy_of_matrix(self._mix_reduced(labels))

    def _entropy_with_flag(self, labels) -> float:
        """Entropy of the reduction keeping ``labels`` plus the K flag."""
        spectra = []
        for i, p in enumerate(self.weights):
            if p <= PRUNE_TOL:
                continue
            if labels:
                spectra.append(p * _clamped_eigvalsh(self._member_reduced(i, labels)))
            else:
                spectra.append(np.array([p]))
        return entropy_from_eigs(np.concatenate(spectra))

    # -- derived states ----------------------------------------------------
    def target(self) -> DensityState:
        """The reduced state on the A, B, E groups this witness certifies."""
        g = self.groups
        keep = tuple(lbl for lbl in self.layout.labels if lbl in set(g.a + g.b + g.e))
        return DensityState(self.layout.subset(keep), self._mix_reduced(keep))

    def realized(self) -> DensityState:
        """The dense joint state with the K flag as the last register."""
        k = self.k
        d = self.layout.dim
        mat = np.zeros((d * k, d * k), dtype=complex)
        for i, (p, m) in enumerate(zip(self.weights, self.members)):
            flag = np.zeros((k, k), dtype=complex)
            flag[i, i] = 1.0
            mat += p * np.kron(np.outer(m, m.conj()), flag)
        lay = self.layout.extended((Register(self.k_label, k, Party.REFERENCE),))
        return DensityState(lay, mat)


def objective(w: Witness) -> float:
    """The witness objective, in bits, evaluated on the realized state.

    Computed as 1/2 [I(AA':BB'|K) + I(AB:E'K|E)] from the block structure
    over K; exact for the realized block-diagonal state.
    """
    g = w.groups
    s_k = w._entropy_with_flag(())
    term1 = (
        w._entropy_with_flag(g.a + g.a_prime)
        + w._entropy_with_flag(g.b + g.b_prime)
        - w._entropy_with_flag(g.a + g.a_prime + g.b + g.b_prime)
        - s_k
    )
    term2 = (
        w._entropy_mix(g.a + g.b + g.e)
        + w._entropy_with_flag(g.e + g.e_prime)
        - w._entropy_with_flag(g.a + g.b + g.e + g.e_prime)
        - w._entropy_mix(g.e)
    )
    return 0.5 * (term1 + term2)


def check_witness(w: Witness, rho: DensityState, tol: float = 1e-9) -> float:
    """Trace distance between the witness target and ``rho`` (must be <= tol)."""
    target = w.target()
    rho_cmp = rho
    if rho_cmp.layout.labels != target.layout.labels:
        rho_cmp = rho_cmp.permuted(target.layout.labels)
    dist = trace_distance(target, rho_cmp)
    if dist > tol:
        raise InvariantViolation(
            "witness_reduction", f"witness target deviates from rho by {dist:.3e}"
        )
    return dist


def _party_groups(rho: DensityState):
    lay = rho.layout
    a = lay.party_labels(Party.ALICE)
    b = lay.party_labels(Party.BOB)
    e = lay.party_labels(Party.EVE)
    if len(a) + len(b) + len(e) != len(lay):
        raise UnknownLabel("every register must be tagged alice, bob or eve")
    if not a or not b:
        raise UnknownLabel("need at least one alice and one bob register")
    return a, b, e


# ---------------------------------------------------------------------------
# constructors


def witness_from_isometry(
    rho: DensityState,
    w_matrix: np.ndarray,
    ext_dims: tuple[int, int, int],
    k: int,
    *,
    prime_labels: tuple[str, str, str] = ("A'", "B'", "E'"),
    k_label: str = "K",
    validate: bool = True,
) -> Witness:
    """Build a witness by steering the purifying reference of ``rho``.

    ``w_matrix`` is an isometry from the reference (dim = rank of rho) into
    A' (x) B' (x) E' (x) K; slicing the K index after dephasing yields the
    ensemble members.
    """
    a, b, e = _party_groups(rho)
    ap, bp, ep = (int(x) for x in ext_dims)
    k = int(k)
    if min(ap, bp, ep, k) < 1:
        raise DimensionTooSmall("extension dimensions must be positive")
    psi = purify(rho, "__ref__")
    rank = psi.layout.register("__ref__").dim
    if ap * bp * ep * k < rank:
        raise DimensionTooSmall(
            f"extension capacity {ap * bp * ep * k} is below the state rank {rank}"
        )
    w_matrix = np.asarray(w_matrix, dtype=complex)
    if w_matrix.shape != (ap * bp * ep * k, rank):
        raise DimensionMismatch(
            f"isometry shape {w_matrix.shape} != ({ap * bp * ep * k}, {rank})"
        )
    if np.max(np.abs(w_matrix.conj().T @ w_matrix - np.eye(rank))) > 1e-8:
        raise InvariantViolation("isometry", "W^dagger W must be the identity")
    d_abe = rho.dim
    arr = psi.amplitudes.reshape(d_abe, rank)
    ext = (arr @ w_matrix.T).reshape(d_abe, ap, bp, ep, k)
    lay = rho.layout.extended(
        (
            Register(prime_labels[0], ap, Party.ALICE),
            Register(prime_labels[1], bp, Party.BOB),
            Register(prime_labels[2], ep, Party.EVE),
        )
    )
    weights, members = [], []
    for i in range(k):
        vec = ext[..., i].reshape(-1)
        p = float(np.vdot(vec, vec).real)
        if p <= PRUNE_TOL:
            continue
        weights.append(p)
        members.append(vec / math.sqrt(p))
    total = sum(weights)
    weights = [p / total for p in weights]
    groups = WitnessGroups(
        a=a,
        a_prime=(prime_labels[0],),
        b=b,
        b_prime=(prime_labels[1],),
        e=e,
        e_prime=(prime_labels[2],),
    )
    w = Witness(lay, groups, tuple(weights), tuple(members), k_label=k_label)
    if validate:
        check_witness(w, rho, tol=1e-8)
    return w


def baseline_witnesses(rho: DensityState) -> list[Witness]:
    """The two purification witnesses; their objectives are
    I(A:BB')/2 <= S(A) and I(B:AA')/2 <= S(B), so including them guarantees
    the upper bound never exceeds min(S(A), S(B))."""
    a, b, e = _party_groups(rho)
    out = []
    for ref_label, ref_party, assign in (("B'", Party.BOB, "b_prime"), ("A'", Party.ALICE, "a_prime")):
        psi = purify(rho, ref_label, ref_party=ref_party)
        groups = WitnessGroups(
            a=a,
            a_prime=(ref_label,) if assign == "a_prime" else (),
            b=b,
            b_prime=(ref_label,) if assign == "b_prime" else (),
            e=e,
            e_prime=(),
        )
        out.append(Witness(psi.layout, groups, (1.0,), (psi.amplitudes,)))
    return out


def markov_witness(components: MarkovComponents, *, index_label: str = "E0") -> Witness:
    """The exact zero-objective witness for a built block state.

    Members purify each block's two sides separately; the flag duplicates
    the block index already stored in the state, so both objective terms
    vanish.
    """
    entries = components.entries
    n = len(entries)
    sig_lay = entries[0].sigma.layout
    tau_lay = entries[0].tau.layout
    # Reference dims are padded to the largest block rank on each side so
    # all members share one layout.
    a_dim = max(_rank(e.sigma.matrix) for e in entries)
    b_dim = max(_rank(e.tau.matrix) for e in entries)
    xi = build_markov(components, index_label=index_label)
    member_layout = xi.layout.extended(
        (Register("A'", a_dim, Party.ALICE), Register("B'", b_dim, Party.BOB))
    )
    members = []
    for j, entry in enumerate(entries):
        ps = purify(entry.sigma, "A'", ref_dim=a_dim, ref_party=Party.ALICE)
        pt = purify(entry.tau, "B'", ref_dim=b_dim, ref_party=Party.BOB)
        e0 = np.zeros(n, dtype=complex)
        e0[j] = 1.0
        vec = np.kron(np.kron(ps.amplitudes, pt.amplitudes), e0)
        raw_layout = RegisterLayout(
            ps.layout.registers + pt.layout.registers + (Register(index_label, n, Party.EVE),)
        )
        member = PureState(raw_layout, vec)
        member = _permute_pure(member, member_layout.labels)
        members.append(member.amplitudes)
    groups = WitnessGroups(
        a=sig_lay.party_labels(Party.ALICE),
        a_prime=("A'",),
        b=tau_lay.party_labels(Party.BOB),
        b_prime=("B'",),
        e=(index_label,) + sig_lay.party_labels(Party.EVE) + tau_lay.party_labels(Party.EVE),
        e_prime=(),
    )
    return Witness(member_layout, groups, components.probs, tuple(members))


def _rank(matrix: np.ndarray) -> int:
    return int(np.sum(_clamped_eigvalsh(matrix) > 1e-12))


def _permute_pure(psi: PureState, labels) -> PureState:
    axes = [psi.layout.index(lbl) for lbl in labels]
    vec = psi.amplitudes.reshape(psi.layout.dims).transpose(axes).reshape(-1)
    return PureState(psi.layout.reordered(labels), vec)


# ---------------------------------------------------------------------------
# transformations


def witness_relabeled(w: Witness, suffix: str) -> Witness:
    """Append ``suffix`` to every register label (groups follow)."""
    mapping = {lbl: f"{lbl}{suffix}" for lbl in w.layout.labels}
    layout = RegisterLayout(
        tuple(Register(mapping[r.label], r.dim, r.party) for r in w.layout.registers)
    )
    g = w.groups
    groups = WitnessGroups(
        **{
            role: tuple(mapping[lbl] for lbl in getattr(g, role))
            for role in ("a", "a_prime", "b", "b_prime", "e", "e_prime")
        }
    )
    return Witness(layout, groups, w.weights, w.members, k_label=w.k_label)


def witness_tensor(w1: Witness, w2: Witness) -> Witness:
    """Product witness for the product target; objectives add exactly."""
    clash = set(w1.layout.labels) & set(w2.layout.labels)
    if clash:
        raise LayoutClash(f"witness layouts share labels: {sorted(clash)}")
    layout = RegisterLayout(w1.layout.registers + w2.layout.registers)
    g1, g2 = w1.groups, w2.groups
    groups = WitnessGroups(
        a=g1.a + g2.a,
        a_prime=g1.a_prime + g2.a_prime,
        b=g1.b + g2.b,
        b_prime=g1.b_prime + g2.b_prime,
        e=g1.e + g2.e,
        e_prime=g1.e_prime + g2.e_prime,
    )
    weights, members = [], []
    for p, m in zip(w1.weights, w1.members):
        for q, n in zip(w2.weights, w2.members):
            weights.append(p * q)
            members.append(np.kron(m, n))
    return Witness(layout, groups, tuple(weights), tuple(members))


def witness_mix(parts, m_label: str = "M") -> Witness:
    """Witness for the flagged mixture sum_m r_m rho_m (x) |m><m|.

    The flag register joins the E group; the objective is the weighted sum
    of the part objectives, exactly.
    """
    parts = [(float(r), w) for r, w in parts]
    if not parts:
        raise LayoutClash("need at least one part")
    first = parts[0][1]
    for _, w in parts[1:]:
        if w.layout != first.layout or w.groups != first.groups:
            raise LayoutClash("mixture parts must share layout and groups")
    if m_label in first.layout:
        raise LayoutClash(f"mixture label {m_label!r} clashes with member registers")
    total = sum(r for r, _ in parts)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise InvariantViolation("weights", f"mixture weights must sum to 1, got {total}")
    n = len(parts)
    layout = first.layout.extended((Register(m_label, n, Party.EVE),))
    groups = replace(first.groups, e=first.groups.e + (m_label,))
    weights, members = [], []
    for m, (r, w) in enumerate(parts):
        flag = np.zeros(n, dtype=complex)
        flag[m] = 1.0
        for p, vec in zip(w.weights, w.members):
            weights.append(r * p)
            members.append(np.kron(vec, flag))
    return Witness(layout, groups, tuple(weights), tuple(members))


def witness_regroup(w: Witness, label: str, to: str = "e") -> Witness:
    """Move a register between the A (or B) group and the conditioning
    E group.  Moving into E never raises the objective; moving out of E
    raises it by at most log2 of the register dimension."""
    role = w.groups.role_of(label)
    g = w.groups
    if to == "e":
        if role == "a":
            groups = replace(g, a=_drop(g.a, label), e=g.e + (label,))
        elif role == "b":
            groups = replace(g, b=_drop(g.b, label), e=g.e + (label,))
        else:
            raise UnknownLabel(f"register {label!r} is in group {role}, not a or b")
    elif to in ("a", "b"):
        if role != "e":
            raise UnknownLabel(f"register {label!r} is in group {role}, not e")
        if to == "a":
            groups = replace(g, e=_drop(g.e, label), a=g.a + (label,))
        else:
            groups = replace(g, e=_drop(g.e, label), b=g.b + (label,))
    else:
        raise UnknownLabel(f"unknown destination group {to!r}")
    return Witness(w.layout, groups, w.weights, w.members, k_label=w.k_label)


def _drop(group, label):
    return tuple(lbl for lbl in group if lbl != label)


def _apply_isometry_members(w: Witness, on, matrix: np.ndarray, out_regs):
    """Apply an isometry to a register block of every member; the block is
    replaced by ``out_regs`` appended at the end of the layout."""
    on = tuple(on)
    on_axes = [w.layout.index(lbl) for lbl in on]
    dims = w.layout.dims
    n = len(dims)
    rest_axes = [i for i in range(n) if i not in on_axes]
    r = math.prod(dims[i] for i in on_axes)
    s = math.prod(reg.dim for reg in out_regs)
    if matrix.shape != (s, r):
        raise DimensionMismatch(f"isometry shape {matrix.shape} != ({s}, {r})")
    new_members = []
    for vec in w.members:
        t = vec.reshape(dims).transpose(rest_axes + on_axes).reshape(-1, r)
        t = t @ matrix.T
        new_members.append(t.reshape(-1))
    keep_regs = tuple(w.layout.registers[i] for i in rest_axes)
    new_layout = RegisterLayout(keep_regs + tuple(out_regs))
    return new_members, new_layout, on


def witness_transport_e(w: Witness, matrix: np.ndarray, on, out_regs) -> Witness:
    """Transport through a reversible (isometric) operation on E-group
    registers; the objective is invariant."""
    on = tuple(on)
    for lbl in on:
        if w.groups.role_of(lbl) != "e":
            raise UnknownLabel(f"register {lbl!r} is not in the E group")
    out_regs = tuple(out_regs)
    for reg in out_regs:
        if reg.label in w.layout and reg.label not in on:
            raise LayoutClash(f"output label {reg.label!r} clashes")
    members, layout, _ = _apply_isometry_members(w, on, np.asarray(matrix, complex), out_regs)
    g = w.groups
    new_e = tuple(lbl for lbl in g.e if lbl not in on) + tuple(r.label for r in out_regs)
    groups = replace(g, e=new_e)
    return Witness(layout, groups, w.weights, tuple(members), k_label=w.k_label)


def witness_local_channel(w: Witness, side: str, kraus, on, env_label: str) -> Witness:
    """Transport through a local channel on the A (or B) group via its
    Stinespring dilation; the environment register joins the prime group,
    so the objective never increases."""
    if side not in ("a", "b"):
        raise UnknownLabel("side must be 'a' or 'b'")
    on = tuple(on)
    for lbl in on:
        if w.groups.role_of(lbl) != side:
            raise UnknownLabel(f"register {lbl!r} is not in the {side} group")
    if env_label in w.layout:
        raise LayoutClash(f"environment label {env_label!r} clashes")
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    s, r = kraus[0].shape
    if s != r:
        raise DimensionMismatch("witness transport supports square channels only")
    n_env = len(kraus)
    sting = np.zeros((s * n_env, r), dtype=complex)
    for i, k in enumerate(kraus):
        e = np.zeros((n_env, 1), dtype=complex)
        e[i, 0] = 1.0
        sting += np.kron(k, e)
    party = Party.ALICE if side == "a" else Party.BOB
    out_regs = tuple(w.layout.register(lbl) for lbl in on) + (
        Register(env_label, n_env, party),
    )
    members, layout, _ = _apply_isometry_members(w, on, sting, out_regs)
    g = w.groups
    if side == "a":
        groups = replace(g, a_prime=g.a_prime + (env_label,))
    else:
        groups = replace(g, b_prime=g.b_prime + (env_label,))
    return Witness(layout, groups, w.weights, tuple(members), k_label=w.k_label)


# ---------------------------------------------------------------------------
# bridges to bipartite ensembles


def witness_from_ab_ensemble(weights, states, *, env_label="Ee", flag_label="Ke") -> Witness:
    """Witness for the classical-flag extension of a bipartite ensemble.

    Given {p_k, sigma_k} on AB, the extension is
    sum_k p_k sigma_k (x) |k><k| with E = (purifier, flag); its objective
    equals half the ensemble-averaged mutual information exactly.
    """
    weights = tuple(float(p) for p in weights)
    states = tuple(states)
    if not states or len(weights) != len(states):
        raise LayoutClash("weights and states must pair up nonempty")
    lay = states[0].layout
    for s in states[1:]:
        if s.layout != lay:
            raise LayoutClash("ensemble states must share one layout")
    n = len(states)
    rank = max(_rank(s.matrix) for s in states)
    members = []
    for j, s in enumerate(states):
        psi = purify(s, env_label, ref_dim=rank, ref_party=Party.EVE)
        flag = np.zeros(n, dtype=complex)
        flag[j] = 1.0
        members.append(np.kron(psi.amplitudes, flag))
    member_layout = lay.extended(
        (Register(env_label, rank, Party.EVE), Register(flag_label, n, Party.EVE))
    )
    groups = WitnessGroups(
        a=lay.party_labels(Party.ALICE),
        a_prime=(),
        b=lay.party_labels(Party.BOB),
        b_prime=(),
        e=(env_label, flag_label),
        e_prime=(),
    )
    return Witness(member_layout, groups, weights, tuple(members))


def ab_ensemble_from_witness(w: Witness):
    """The bipartite ensemble read off a witness: member reductions onto
    the bare A and B groups.  Its averaged mutual information never exceeds
    twice the witness objective."""
    keep = tuple(lbl for lbl in w.layout.labels if lbl in set(w.groups.a + w.groups.b))
    states = [
        DensityState(w.layout.subset(keep), w._member_reduced(i, keep))
        for i in range(w.k)
    ]
    return w.weights, states


# ---------------------------------------------------------------------------
# continuity


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def continuity_bound(eps: float, d_a: int, d_b: int) -> float:
    """Dimension-dependent bound on how much the formation measure can move
    under an eps trace-distance perturbation:
    4 sqrt(eps) log2(dA dB) + 3 (1 + sqrt(eps)) h(sqrt(eps)/(1 + sqrt(eps))).
    """
    if not 0.0 <= eps <= 1.0:
        raise BadRange(f"eps must lie in [0, 1], got {eps}")
    if d_a < 1 or d_b < 1:
        raise BadRange("dimensions must be positive")
    root = math.sqrt(eps)
    return 4.0 * root * math.log2(d_a * d_b) + 3.0 * (1.0 + root) * binary_entropy(
        root / (1.0 + root)
    )

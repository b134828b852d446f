"""Dense multipartite quantum states and the structural operations on them.

States are plain complex numpy matrices tagged with a
:class:`~nmk.registers.RegisterLayout`.  Everything here is immutable after
construction (arrays are marked read-only), so values can be shared freely
across concurrent workers.

Conventions
-----------
* Matrices are stored row-major in the big-endian register order of the
  layout: the first register is the most significant index.
* Eigenvalues in ``[-1e-9, 0]`` are clamped to zero before entropies and
  purifications; anything below ``-1e-9`` fails validation.
* Total dimension is capped (default 4096, override with the
  ``NMK_DIM_BUDGET`` environment variable); dense matrices only.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadDims,
    BudgetExceeded,
    DimensionMismatch,
    DuplicateLabel,
    InvariantViolation,
    LayoutMismatch,
)
from .registers import Party, Register, RegisterLayout

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_FLOOR = -1e-9
NORM_TOL = 1e-10
KRAUS_TOL = 1e-9
INVERSE_TOL = 1e-8
DEFAULT_DIM_BUDGET = 4096


def dim_budget() -> int:
    """Hard cap on the total dimension of a dense state."""
    return int(os.environ.get("NMK_DIM_BUDGET", DEFAULT_DIM_BUDGET))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=complex)
    arr.flags.writeable = False
    return arr


def _clamped_eigvalsh(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues with the small-negative floor applied."""
    vals = np.linalg.eigvalsh(matrix)
    vals[(vals < 0.0) & (vals >= EIG_FLOOR)] = 0.0
    return vals


@dataclass(frozen=True)
class DensityState:
    """A density matrix on a register layout.

    Validates hermiticity (1e-10 max-abs), unit trace (1e-10) and
    positivity (min eigenvalue >= -1e-9) on construction.
    """

    layout: RegisterLayout
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(self.matrix))
        d = self.layout.dim
        if d > dim_budget():
            raise BudgetExceeded(f"total dimension {d} exceeds the budget of {dim_budget()}")
        m = self.matrix
        if m.shape != (d, d):
            raise InvariantViolation(
                "shape", f"matrix shape {m.shape} does not match layout dimension {d}"
            )
        herm_err = np.max(np.abs(m - m.conj().T)) if d else 0.0
        if herm_err > HERMITIAN_TOL:
            raise InvariantViolation("hermitian", f"max |m - m^dagger| = {herm_err:.3e}")
        tr_err = abs(np.trace(m) - 1.0)
        if tr_err > TRACE_TOL:
            raise InvariantViolation("unit_trace", f"|trace - 1| = {tr_err:.3e}")
        # Cheap positive check first; fall back to eigenvalues for the diagnostic.
        shifted = np.asarray(m) + (abs(EIG_FLOOR) + 1e-12) * np.eye(d)
        try:
            np.linalg.cholesky(shifted)
        except np.linalg.LinAlgError:
            lo = float(np.min(np.linalg.eigvalsh(m)))
            if lo < EIG_FLOOR:
                raise InvariantViolation(
                    "positive_semidefinite", f"minimum eigenvalue {lo:.3e} < {EIG_FLOOR}"
                ) from None

    @property
    def dim(self) -> int:
        return self.layout.dim

    def eigenvalues(self) -> np.ndarray:
        return _clamped_eigvalsh(self.matrix)

    def reduced(self, keep) -> "DensityState":
        return partial_trace(self, keep)

    def permuted(self, labels) -> "DensityState":
        return permute_registers(self, labels)

    def allclose(self, other: "DensityState", atol=1e-10) -> bool:
        return self.layout.labels == other.layout.labels and bool(
            np.allclose(self.matrix, other.matrix, atol=atol)
        )


@dataclass(frozen=True)
class PureState:
    """A state vector on a register layout (unit norm within 1e-10)."""

    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _freeze(self.amplitudes).reshape(-1))
        if self.amplitudes.shape != (self.layout.dim,):
            raise InvariantViolation(
                "shape",
                f"amplitude length {self.amplitudes.shape} does not match layout dimension {self.layout.dim}",
            )
        err = abs(np.linalg.norm(self.amplitudes) - 1.0)
        if err > NORM_TOL:
            raise InvariantViolation("unit_norm", f"| ||psi|| - 1 | = {err:.3e}")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def to_density(self) -> DensityState:
        return DensityState(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class ChannelMap:
    """A completely positive map given by Kraus operators.

    ``declared_inverse`` names a map whose composition with this one is the
    identity; reversibility is checked operationally on the basis of matrix
    units (tolerance 1e-8), not syntactically.  The completeness sum
    ``sum K^dagger K = I`` is enforced unless ``trace_preserving`` is False
    (needed for declared inverses of proper isometries, which are only
    trace-preserving on the range).
    """

    kraus: tuple[np.ndarray, ...]
    declared_inverse: "ChannelMap | None" = None
    trace_preserving: bool = True
    _isometry_pair: bool = field(default=False, repr=False)

    def __post_init__(self):
        ops = tuple(_freeze(k) for k in self.kraus)
        if not ops:
            raise BadDims("a channel needs at least one Kraus operator")
        s, r = ops[0].shape
        for k in ops:
            if k.shape != (s, r):
                raise DimensionMismatch("Kraus operators must share one shape")
        object.__setattr__(self, "kraus", ops)
        if self.trace_preserving:
            comp = sum(k.conj().T @ k for k in ops)
            err = np.max(np.abs(comp - np.eye(r)))
            if err > KRAUS_TOL:
                raise InvariantViolation(
                    "kraus_completeness", f"max |sum K^dagger K - I| = {err:.3e}"
                )
        if self.declared_inverse is not None:
            self.verify_inverse()

    @property
    def in_dim(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus[0].shape[0]

    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        return sum(k @ m @ k.conj().T for k in self.kraus)

    def verify_inverse(self, tol=INVERSE_TOL):
        """Check inverse o channel = id on the matrix-unit basis."""
        inv = self.declared_inverse
        if inv is None:
            raise InvariantViolation("inverse_composition", "no declared inverse")
        if inv.in_dim != self.out_dim or inv.out_dim != self.in_dim:
            raise DimensionMismatch("declared inverse dimensions do not match the channel")
        if self._isometry_pair:
            v = self.kraus[0]
            err = np.max(np.abs(v.conj().T @ v - np.eye(self.in_dim)))
            if err > tol:
                raise InvariantViolation("inverse_composition", f"V^dagger V - I = {err:.3e}")
            return
        r = self.in_dim
        for i in range(r):
            for j in range(r):
                unit = np.zeros((r, r), dtype=complex)
                unit[i, j] = 1.0
                back = inv.apply_matrix(self.apply_matrix(unit))
                if np.max(np.abs(back - unit)) > tol:
                    raise InvariantViolation(
                        "inverse_composition",
                        f"inverse o channel deviates from identity on unit ({i},{j})",
                    )

    @classmethod
    def unitary(cls, u: np.ndarray) -> "ChannelMap":
        u = np.asarray(u, dtype=complex)
        inv = cls((u.conj().T,), trace_preserving=True)
        return cls((u,), declared_inverse=inv, _isometry_pair=True)

    @classmethod
    def isometry(cls, v: np.ndarray) -> "ChannelMap":
        """Channel rho -> V rho V^dagger with the co-isometry as inverse."""
        v = np.asarray(v, dtype=complex)
        if v.shape[0] < v.shape[1]:
            raise BadDims("an isometry needs output dim >= input dim")
        inv = cls((v.conj().T,), trace_preserving=False)
        return cls((v,), declared_inverse=inv, _isometry_pair=True)

    @classmethod
    def from_kraus(cls, ops, declared_inverse=None) -> "ChannelMap":
        return cls(tuple(np.asarray(k, dtype=complex) for k in ops), declared_inverse)

    @classmethod
    def dephasing(cls, dim: int) -> "ChannelMap":
        ops = []
        for i in range(dim):
            p = np.zeros((dim, dim), dtype=complex)
            p[i, i] = 1.0
            ops.append(p)
        return cls(tuple(ops))

    @classmethod
    def mixing(cls, unitaries, probs) -> "ChannelMap":
        """Random-unitary channel sum_i p_i U_i rho U_i^dagger."""
        ops = tuple(
            math.sqrt(p) * np.asarray(u, dtype=complex) for u, p in zip(unitaries, probs)
        )
        return cls(ops)


# ---------------------------------------------------------------------------
# structural operations


def tensor(a: DensityState, b: DensityState) -> DensityState:
    """Kronecker product in register order; label sets must be disjoint."""
    clash = set(a.layout.labels) & set(b.layout.labels)
    if clash:
        raise DuplicateLabel(f"labels present on both factors: {sorted(clash)}")
    return DensityState(
        RegisterLayout(a.layout.registers + b.layout.registers),
        np.kron(a.matrix, b.matrix),
    )


def tensor_pure(a: PureState, b: PureState) -> PureState:
    clash = set(a.layout.labels) & set(b.layout.labels)
    if clash:
        raise DuplicateLabel(f"labels present on both factors: {sorted(clash)}")
    return PureState(
        RegisterLayout(a.layout.registers + b.layout.registers),
        np.kron(a.amplitudes, b.amplitudes),
    )


def _tensor_view(matrix: np.ndarray, dims) -> np.ndarray:
    return matrix.reshape(tuple(dims) * 2)


def permute_registers(state: DensityState, labels) -> DensityState:
    """Reorder registers; the matrix is permuted to match."""
    new_layout = state.layout.reordered(tuple(labels))
    axes = [state.layout.index(lbl) for lbl in labels]
    n = len(axes)
    t = _tensor_view(state.matrix, state.layout.dims)
    t = t.transpose(axes + [n + a for a in axes])
    return DensityState(new_layout, t.reshape(state.dim, state.dim))


def _partial_trace_matrix(matrix: np.ndarray, dims, keep_axes) -> np.ndarray:
    n = len(dims)
    keep_axes = list(keep_axes)
    drop_axes = [i for i in range(n) if i not in keep_axes]
    dk = math.prod(dims[i] for i in keep_axes) if keep_axes else 1
    dt = math.prod(dims[i] for i in drop_axes) if drop_axes else 1
    order = keep_axes + drop_axes
    t = _tensor_view(matrix, dims).transpose(order + [n + a for a in order])
    t = t.reshape(dk, dt, dk, dt)
    return np.einsum("ixjx->ij", t)


def partial_trace(state: DensityState, keep) -> DensityState:
    """Trace out every register not in ``keep`` (kept in original order)."""
    keep = tuple(keep)
    keep_axes = state.layout.positions(keep)
    reduced = _partial_trace_matrix(state.matrix, state.layout.dims, keep_axes)
    return DensityState(state.layout.subset(keep), reduced)


def reduced_from_pure(psi: PureState, keep) -> DensityState:
    """Reduced density matrix of a pure state, via the Gram trick."""
    keep = tuple(keep)
    keep_axes = list(psi.layout.positions(keep))
    mat = _pure_reduced_matrix(psi.amplitudes, psi.layout.dims, keep_axes)
    return DensityState(psi.layout.subset(keep), mat)


def _pure_reduced_matrix(vec: np.ndarray, dims, keep_axes) -> np.ndarray:
    n = len(dims)
    drop_axes = [i for i in range(n) if i not in keep_axes]
    dk = math.prod(dims[i] for i in keep_axes) if keep_axes else 1
    arr = vec.reshape(dims).transpose(list(keep_axes) + drop_axes).reshape(dk, -1)
    return arr @ arr.conj().T


def purify(
    state: DensityState,
    ref_label: str,
    *,
    ref_dim: int | None = None,
    ref_party=Party.REFERENCE,
) -> PureState:
    """Purify with a reference register of dimension rank(state).

    Deterministic: eigenvalues sorted descending, and each eigenvector is
    rotated so its first nonzero amplitude is real positive.  ``ref_dim``
    may pad the reference beyond the rank (extra amplitudes are zero).
    """
    if ref_label in state.layout:
        raise DuplicateLabel(f"reference label {ref_label!r} already in layout")
    vals, vecs = np.linalg.eigh(state.matrix)
    vals = vals.copy()
    vals[(vals < 0.0) & (vals >= EIG_FLOOR)] = 0.0
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    kept = vals > 1e-12
    vals, vecs = vals[kept], vecs[:, kept]
    rank = int(vals.size)
    if ref_dim is None:
        ref_dim = rank
    elif ref_dim < rank:
        raise BadDims(f"reference dim {ref_dim} below rank {rank}")
    arr = np.zeros((state.dim, ref_dim), dtype=complex)
    for i in range(rank):
        v = vecs[:, i]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size:
            v = v * (v[nz[0]].conjugate() / abs(v[nz[0]]))
        arr[:, i] = math.sqrt(vals[i]) * v
    new_layout = state.layout.extended((Register(ref_label, ref_dim, ref_party),))
    return PureState(new_layout, arr.reshape(-1))


def _apply_kraus_block(matrix, dims, on_axes, kraus_ops, out_block_dim):
    """Apply Kraus operators on a register block, identity elsewhere.

    Returns the matrix in (keep..., out-block) register order together with
    the keep-axis order used.
    """
    n = len(dims)
    on_axes = list(on_axes)
    keep_axes = [i for i in range(n) if i not in on_axes]
    dk = math.prod(dims[i] for i in keep_axes) if keep_axes else 1
    r = math.prod(dims[i] for i in on_axes)
    order = keep_axes + on_axes
    t = _tensor_view(matrix, dims).transpose(order + [n + a for a in order])
    t = t.reshape(dk, r, dk, r)
    s = out_block_dim
    out = np.zeros((dk, s, dk, s), dtype=complex)
    for k in kraus_ops:
        tmp = np.einsum("sb,ibjd->isjd", k, t)
        out += np.einsum("isjd,td->isjt", tmp, k.conj())
    return out.reshape(dk * s, dk * s), keep_axes


def apply_channel(
    state: DensityState,
    channel: ChannelMap,
    on,
    out=None,
) -> DensityState:
    """Apply ``channel`` to the registers ``on``; identity on the rest.

    ``on`` is an ordered sequence of labels whose dimension product must
    match the channel input.  ``out`` replaces the block: either a sequence
    of :class:`Register` (appended after the untouched registers) or a full
    :class:`RegisterLayout` giving the exact output order.  With ``out``
    omitted the channel must be square and the layout is unchanged.
    """
    on = tuple(on)
    for lbl in on:
        state.layout.index(lbl)
    if len(set(on)) != len(on):
        raise DuplicateLabel(f"repeated labels in channel target: {on}")
    on_axes = [state.layout.index(lbl) for lbl in on]
    in_dim = math.prod(state.layout.dims[i] for i in on_axes)
    if channel.in_dim != in_dim:
        raise DimensionMismatch(
            f"channel input dim {channel.in_dim} does not match block dim {in_dim}"
        )
    full_out = None
    if out is None:
        if channel.out_dim != in_dim:
            raise DimensionMismatch("non-square channel needs an output block")
        block = tuple(state.layout.registers[i] for i in on_axes)
    elif isinstance(out, RegisterLayout):
        full_out = out
        keep_labels = [lbl for lbl in state.layout.labels if lbl not in on]
        block = tuple(r for r in out.registers if r.label not in keep_labels)
    else:
        block = tuple(out)
    block_dim = math.prod(r.dim for r in block) if block else 1
    if block_dim != channel.out_dim:
        raise DimensionMismatch(
            f"output block dim {block_dim} does not match channel output {channel.out_dim}"
        )
    mat, keep_axes = _apply_kraus_block(
        state.matrix, state.layout.dims, on_axes, channel.kraus, channel.out_dim
    )
    keep_regs = tuple(state.layout.registers[i] for i in keep_axes)
    interim = DensityState(RegisterLayout(keep_regs + block), mat)
    if out is None:
        return interim.permuted(state.layout.labels)
    if full_out is not None:
        if sorted(full_out.labels) != sorted(interim.layout.labels):
            raise LayoutMismatch("output layout labels do not match the channel result")
        return interim.permuted(full_out.labels)
    return interim


def trace_distance(a: DensityState, b: DensityState) -> float:
    """Half the trace norm of the difference, in [0, 1]."""
    if a.layout.labels != b.layout.labels or a.layout.dims != b.layout.dims:
        raise LayoutMismatch("trace distance needs identical layouts")
    vals = np.linalg.eigvalsh(a.matrix - b.matrix)
    return 0.5 * float(np.sum(np.abs(vals)))


def fidelity(a: DensityState, b: DensityState) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2."""
    if a.layout.labels != b.layout.labels or a.layout.dims != b.layout.dims:
        raise LayoutMismatch("fidelity needs identical layouts")
    vals, vecs = np.linalg.eigh(a.matrix)
    vals = np.clip(vals, 0.0, None)
    root = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = np.linalg.eigvalsh(root @ b.matrix @ root)
    inner = np.clip(inner, 0.0, None)
    return float(np.sum(np.sqrt(inner)) ** 2)


def embed_operator(layout: RegisterLayout, on, op: np.ndarray) -> np.ndarray:
    """Lift ``op`` acting on the ordered labels ``on`` to the full space."""
    on = tuple(on)
    on_axes = [layout.index(lbl) for lbl in on]
    n = len(layout)
    keep_axes = [i for i in range(n) if i not in on_axes]
    dims = layout.dims
    dk = math.prod(dims[i] for i in keep_axes) if keep_axes else 1
    full = np.kron(np.eye(dk), np.asarray(op, dtype=complex))
    # full acts in (keep..., on...) order; conjugate back to layout order.
    order = keep_axes + on_axes
    inv_perm = np.argsort(order)
    t = full.reshape(tuple(dims[i] for i in order) * 2)
    t = t.transpose(list(inv_perm) + [n + i for i in inv_perm])
    return t.reshape(layout.dim, layout.dim)

"""Seeded random generators for states and matrices.

``density_hs`` draws from the Hilbert-Schmidt measure: a complex Gaussian
matrix G gives GG^dagger / Tr[GG^dagger].  Unitaries and isometries come
from QR-orthonormalized Gaussian columns with the R-diagonal phase fixed,
so every draw is deterministic per seed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BadDims
from .registers import Party, Register, RegisterLayout
from .states import DensityState, PureState

DEFAULT_PARTIES = (Party.ALICE, Party.BOB, Party.EVE)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _gaussian_complex(rng, *shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-distributed unitary of order ``dim``."""
    if dim < 1:
        raise BadDims(f"unitary dim must be positive, got {dim}")
    rng = as_rng(seed)
    q, r = np.linalg.qr(_gaussian_complex(rng, dim, dim))
    phases = np.diagonal(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_isometry(in_dim: int, out_dim: int, seed) -> np.ndarray:
    """Column-orthonormal (out_dim x in_dim) matrix, W^dagger W = I."""
    if in_dim < 1 or out_dim < in_dim:
        raise BadDims(f"isometry needs out_dim >= in_dim >= 1, got {in_dim}->{out_dim}")
    rng = as_rng(seed)
    q, r = np.linalg.qr(_gaussian_complex(rng, out_dim, in_dim))
    phases = np.diagonal(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_pure_vector(dim: int, seed) -> np.ndarray:
    if dim < 1:
        raise BadDims(f"pure-state dim must be positive, got {dim}")
    rng = as_rng(seed)
    v = _gaussian_complex(rng, dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, seed, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt random density matrix (optionally rank-limited)."""
    if dim < 1:
        raise BadDims(f"density dim must be positive, got {dim}")
    rank = dim if rank is None else rank
    if rank < 1 or rank > dim:
        raise BadDims(f"rank must be in [1, {dim}], got {rank}")
    rng = as_rng(seed)
    g = _gaussian_complex(rng, dim, rank)
    m = g @ g.conj().T
    return m / np.trace(m).real


def _default_layout(dims) -> RegisterLayout:
    regs = []
    for i, d in enumerate(dims):
        party = DEFAULT_PARTIES[i] if i < len(DEFAULT_PARTIES) else Party.EVE
        label = ("A", "B", "E")[i] if i < 3 else f"E{i - 2}"
        regs.append(Register(label, int(d), party))
    return RegisterLayout(tuple(regs))


def sample(kind: str, dims, seed, *, layout: RegisterLayout | None = None, rank=None):
    """Draw a random object, deterministic per seed.

    kind:
        ``pure``       -> PureState on ``dims``
        ``density_hs`` -> DensityState on ``dims`` (Hilbert-Schmidt measure)
        ``unitary``    -> ndarray, ``dims`` a single int or [d]
        ``isometry``   -> ndarray, ``dims`` = (in_dim, out_dim)
    """
    rng = as_rng(seed)
    if kind == "unitary":
        d = int(dims if np.isscalar(dims) else math.prod(dims))
        return random_unitary(d, rng)
    if kind == "isometry":
        try:
            in_dim, out_dim = (int(x) for x in dims)
        except (TypeError, ValueError):
            raise BadDims("isometry dims must be a pair (in_dim, out_dim)") from None
        return random_isometry(in_dim, out_dim, rng)
    dims = tuple(int(d) for d in (dims if not np.isscalar(dims) else [dims]))
    if not dims:
        raise BadDims("need at least one register dimension")
    lay = layout if layout is not None else _default_layout(dims)
    if lay.dims != dims:
        raise BadDims(f"layout dims {lay.dims} do not match requested dims {dims}")
    total = math.prod(dims)
    if kind == "pure":
        return PureState(lay, random_pure_vector(total, rng))
    if kind == "density_hs":
        return DensityState(lay, random_density_matrix(total, rng, rank=rank))
    raise BadDims(f"unknown sample kind {kind!r}")

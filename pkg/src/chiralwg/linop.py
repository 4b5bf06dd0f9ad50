"""Dense complex operators on small tensor-product Hilbert spaces.

Operators are plain ``complex128`` numpy arrays of shape ``(dim, dim)``.
Subsystem ordering follows :class:`SpaceLayout`; the first subsystem is the
most significant index of the Kronecker product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import prod
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

MAX_DIM = 1024


class DimensionError(ValueError):
    """Raised for mismatched or oversized operator dimensions."""


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered list of ``(label, local_dim)`` subsystems."""

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        labels = [lab for lab, _ in self.subsystems]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        if not self.subsystems:
            raise ValueError("layout needs at least one subsystem")
        for lab, d in self.subsystems:
            if int(d) < 1:
                raise ValueError(f"subsystem {lab!r} has dimension {d}")
        if self.total_dim > MAX_DIM:
            raise DimensionError(f"total dimension {self.total_dim} exceeds guard {MAX_DIM}")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "SpaceLayout":
        return cls(tuple((str(lab), int(d)) for lab, d in pairs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.subsystems)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def basis_levels(self) -> np.ndarray:
        """Local level of every subsystem for each basis state, shape (total_dim, n_sub)."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids.T.copy()


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a ⊗ b`` with the layout-size guard applied."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] * b.shape[0] > MAX_DIM:
        raise DimensionError(f"kron result dimension {a.shape[0] * b.shape[0]} exceeds {MAX_DIM}")
    return np.kron(a, b)


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(kron, ops)


def embed(local: np.ndarray, layout: SpaceLayout, target: str) -> np.ndarray:
    """Lift ``local`` onto ``target``, identity elsewhere."""
    local = np.asarray(local, dtype=complex)
    pos = layout.index(target)
    if local.shape != (layout.dims[pos], layout.dims[pos]):
        raise DimensionError(
            f"operator of shape {local.shape} does not act on {target!r} (dim {layout.dims[pos]})"
        )
    factors = [local if i == pos else identity(d) for i, d in enumerate(layout.dims)]
    return kron_all(factors)


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def hermiticity_residual(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dag(a)))) if a.size else 0.0


def expectation(rho: np.ndarray, a: np.ndarray, *, check_trace: bool = True) -> complex:
    """``Tr(rho @ a)``."""
    if rho.shape != a.shape:
        raise DimensionError(f"shape mismatch {rho.shape} vs {a.shape}")
    if check_trace and abs(np.trace(rho) - 1.0) > 1e-9:
        raise ValueError(f"density matrix trace {np.trace(rho)} deviates from 1")
    # Tr(rho a) = sum_ij rho_ij a_ji
    return complex(np.sum(rho * a.T))


def partial_trace(rho: np.ndarray, layout: SpaceLayout, keep: Sequence[str]) -> np.ndarray:
    """Reduced operator on the ``keep`` subsystems, in layout order."""
    keep = list(keep)
    if not keep:
        raise ValueError("partial_trace needs a nonempty keep set")
    keep_idx = sorted(layout.index(lab) for lab in keep)
    dims = layout.dims
    n = len(dims)
    if rho.shape != (layout.total_dim, layout.total_dim):
        raise DimensionError(f"operator shape {rho.shape} does not match layout dim {layout.total_dim}")
    t = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep_idx]
    # einsum subscripts: row indices a.., column indices shared on traced axes
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i in traced else letters[i + n].upper() for i in range(n)]
    out = [row[i] for i in keep_idx] + [col[i] for i in keep_idx]
    spec = "".join(row) + "".join(col) + "->" + "".join(out)
    red = np.einsum(spec, t)
    kd = prod(dims[i] for i in keep_idx)
    return red.reshape(kd, kd)


def matrix_exponential(a: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Padé, via SciPy)."""
    a = np.asarray(a, dtype=complex)
    if a.shape[0] > MAX_DIM * MAX_DIM:
        raise DimensionError("matrix too large")
    return scipy.linalg.expm(a)


def min_eigenvalue(rho: np.ndarray) -> np.ndarray | float:
    """Smallest eigenvalue of the Hermitian part; works on stacks ``(..., d, d)``."""
    herm = 0.5 * (rho + dag(rho))
    ev = np.linalg.eigvalsh(herm)[..., 0]
    return ev if np.ndim(ev) else float(ev)


def ket(layout: SpaceLayout, levels: dict[str, int]) -> np.ndarray:
    """Basis ket with the given local levels; unspecified subsystems are in level 0."""
    vec = np.zeros(layout.total_dim, dtype=complex)
    idx = 0
    for lab, d in layout.subsystems:
        lvl = int(levels.get(lab, 0))
        if not 0 <= lvl < d:
            raise ValueError(f"level {lvl} out of range for {lab!r} (dim {d})")
        idx = idx * d + lvl
    for lab in levels:
        layout.index(lab)
    vec[idx] = 1.0
    return vec


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())

"""Truncated Hilbert space of a qutrit coupled to two cavities.

Basis ordering is fixed everywhere in the package as

    qutrit (g, e, f)  ⊗  cavity 1 (0..n1-1)  ⊗  cavity 2 (0..n2-1)

with the qutrit as the slowest index, so basis state ``|q, m1, m2>`` sits at
flat index ``q * n1 * n2 + m1 * n2 + m2``.  Operators and states are plain
complex numpy arrays; a :class:`SpaceSpec` knows how to build and check them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import IO, Sequence

import numpy as np

LEVELS = ("g", "e", "f")
SLOTS = ("qutrit", "cav1", "cav2")


def annihilation(n: int) -> np.ndarray:
    """Truncated ladder operator with ``<n-1|a|n> = sqrt(n)``."""
    if n < 2:
        raise ValueError(f"truncation must be >= 2, got {n}")
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def number(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def _level_index(level: str) -> int:
    try:
        return LEVELS.index(level)
    except ValueError:
        raise ValueError(f"unknown qutrit level {level!r}; expected one of {LEVELS}") from None


def qutrit_transfer(from_level: str, to_level: str) -> np.ndarray:
    """``|to><from|`` on the qutrit.

    ``qutrit_transfer("f", "g")`` is the lowering operator written
    sigma^-_fg = |g><f| in the protocol Hamiltonians; equal labels give the
    level projectors.
    """
    op = np.zeros((3, 3), dtype=complex)
    op[_level_index(to_level), _level_index(from_level)] = 1.0
    return op


def fock(n: int, truncation: int) -> np.ndarray:
    if not 0 <= n < truncation:
        raise ValueError(f"Fock index {n} outside truncation {truncation}")
    v = np.zeros(truncation, dtype=complex)
    v[n] = 1.0
    return v


def qutrit_state(level: str) -> np.ndarray:
    v = np.zeros(3, dtype=complex)
    v[_level_index(level)] = 1.0
    return v


@dataclass(frozen=True)
class SpaceSpec:
    """Truncations of the two cavity modes (the qutrit always has 3 levels)."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError(f"cavity truncations must be >= 2, got {self.n1}, {self.n2}")

    @property
    def qutrit_levels(self) -> int:
        return 3

    @property
    def dims(self) -> tuple[int, int, int]:
        return (3, self.n1, self.n2)

    @property
    def dim(self) -> int:
        return 3 * self.n1 * self.n2

    def slot_dim(self, slot: str) -> int:
        return self.dims[_slot_index(slot)]

    def index(self, level: str, m1: int, m2: int) -> int:
        return (_level_index(level) * self.n1 + m1) * self.n2 + m2

    # Frequently used embedded operators.  Cached: the space is immutable.
    @cached_property
    def a1(self) -> np.ndarray:
        return embed(annihilation(self.n1), "cav1", self)

    @cached_property
    def a2(self) -> np.ndarray:
        return embed(annihilation(self.n2), "cav2", self)

    @cached_property
    def n1_op(self) -> np.ndarray:
        return embed(number(self.n1), "cav1", self)

    @cached_property
    def n2_op(self) -> np.ndarray:
        return embed(number(self.n2), "cav2", self)

    def sigma(self, from_level: str, to_level: str) -> np.ndarray:
        """Embedded ``|to><from|``."""
        return embed(qutrit_transfer(from_level, to_level), "qutrit", self)

    def projector(self, level: str) -> np.ndarray:
        return self.sigma(level, level)

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def product_state(self, qutrit, cav1, cav2) -> np.ndarray:
        """Tensor product state; ``qutrit`` may be a level label."""
        q = qutrit_state(qutrit) if isinstance(qutrit, str) else np.asarray(qutrit, dtype=complex)
        c1 = np.asarray(cav1, dtype=complex)
        c2 = np.asarray(cav2, dtype=complex)
        if q.shape != (3,) or c1.shape != (self.n1,) or c2.shape != (self.n2,):
            raise ValueError("factor dimensions do not match the space")
        return np.kron(q, np.kron(c1, c2))


def _slot_index(slot: str) -> int:
    try:
        return SLOTS.index(slot)
    except ValueError:
        raise ValueError(f"unknown slot {slot!r}; expected one of {SLOTS}") from None


def embed(op: np.ndarray, slot: str | Sequence[str], space: SpaceSpec) -> np.ndarray:
    """Embed a factor operator acting on ``slot`` (or a tuple of slots).

    For several slots the factor acts on the product of those slots taken in
    the order given, e.g. ``embed(np.kron(a, a.conj().T), ("cav1", "cav2"), s)``.
    """
    slots = (slot,) if isinstance(slot, str) else tuple(slot)
    idx = [_slot_index(s) for s in slots]
    if len(set(idx)) != len(idx):
        raise ValueError(f"repeated slot in {slots}")
    sub_dims = [space.dims[i] for i in idx]
    op = np.asarray(op, dtype=complex)
    n_sub = int(np.prod(sub_dims))
    if op.shape != (n_sub, n_sub):
        raise ValueError(f"operator shape {op.shape} does not match slots {slots} of dims {sub_dims}")
    rest = [i for i in range(3) if i not in idx]
    n_rest = int(np.prod([space.dims[i] for i in rest]))
    full = np.kron(op, np.eye(n_rest))
    # axes of `full` are (idx..., rest...) for rows and columns; move to (0, 1, 2)
    order = idx + rest
    shape = [space.dims[i] for i in order]
    full = full.reshape(shape + shape)
    perm = [order.index(k) for k in range(3)]
    full = full.transpose(perm + [3 + p for p in perm])
    return full.reshape(space.dim, space.dim)


def partial_trace(rho: np.ndarray, space: SpaceSpec, keep: str | Sequence[str]) -> np.ndarray:
    """Reduced density matrix on the kept slot(s), in slot order."""
    keep = (keep,) if isinstance(keep, str) else tuple(keep)
    kept = sorted(_slot_index(s) for s in keep)
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    t = rho.reshape(space.dims + space.dims)
    letters = "abc"
    rows = list(letters)
    cols = [c.upper() for c in letters]
    for i in range(3):
        if i not in kept:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in kept) + "".join(cols[i] for i in kept)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    n = int(np.prod([space.dims[i] for i in kept]))
    return reduced.reshape(n, n)


def density_defects(rho: np.ndarray) -> dict[str, float]:
    """Trace, Hermiticity and positivity diagnostics of a density matrix."""
    herm = float(np.linalg.norm(rho - rho.conj().T))
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return {
        "trace": float(np.trace(rho).real),
        "hermiticity_defect": herm,
        "min_eigenvalue": float(evals[0]),
    }


def is_density_matrix(rho: np.ndarray, *, trace_tol: float = 1e-8, herm_tol: float = 1e-10,
                      eig_tol: float = 1e-8) -> bool:
    d = density_defects(rho)
    return (abs(d["trace"] - 1) < trace_tol and d["hermiticity_defect"] < herm_tol
            and d["min_eigenvalue"] > -eig_tol)


# Plain-text matrix format used for golden files:
#   line 1: "<rows> <cols>"
#   then one line per row with "re im" pairs, row-major.
def write_matrix(target: str | Path | IO[str], arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    for row in arr:
        lines.append(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


def read_matrix(source: str | Path | IO[str]) -> np.ndarray:
    text = source.read() if hasattr(source, "read") else Path(source).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows, cols = (int(v) for v in lines[0].split())
    if len(lines) - 1 != rows:
        raise ValueError(f"expected {rows} rows, found {len(lines) - 1}")
    out = np.empty((rows, cols), dtype=complex)
    for i, ln in enumerate(lines[1:]):
        vals = np.array(ln.split(), dtype=float)
        if vals.size != 2 * cols:
            raise ValueError(f"row {i} has {vals.size // 2} entries, expected {cols}")
        out[i] = vals[0::2] + 1j * vals[1::2]
    return out

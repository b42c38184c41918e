"""Coherent and cat states, and certification of cat-state quasiorthogonality.

Cat states ``|C_n> = |alpha e^{i n phi}> + |-alpha e^{i n phi}>`` are kept
unnormalized throughout; :func:`normalized_cat_fock` is the only place that
divides by the norm.
"""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

DEFAULT_THRESHOLD = 4e-4
TAIL_TOLERANCE = 1e-12
# relative slack for the parameter-choice inequalities, which hold with
# equality at the boundary (e.g. d=2, s=1)
_INEQ_RTOL = 1e-12


class TruncationError(ValueError):
    """Fock truncation too small for the requested coherent amplitude."""

    def __init__(self, message: str, suggested: int):
        super().__init__(message)
        self.suggested = suggested


@dataclass(frozen=True)
class CatParams:
    """Amplitude ``alpha``, phase step ``phi``, dimension ``d``, spacing ``s``."""

    alpha: complex
    phi: float
    d: int
    s: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if abs(self.alpha) == 0:
            raise ValueError("alpha must be nonzero")


@dataclass
class OverlapReport:
    pair_overlaps: dict[tuple[int, int], float]
    max_offdiag: float
    threshold: float
    passed: bool
    ineq4_ok: bool
    ineq5_ok: bool
    theta: float | None
    params: CatParams | None = field(default=None, repr=False)

    def to_text(self) -> str:
        """Flat ``key=value`` block."""
        p = self.params
        lines = []
        if p is not None:
            lines += [f"d={p.d}", f"s={p.s!r}", f"alpha={complex(p.alpha)!r}", f"phi={p.phi!r}"]
        lines += [
            f"threshold={self.threshold!r}",
            f"max_offdiag={self.max_offdiag!r}",
            f"passed={str(self.passed).lower()}",
            f"ineq4_ok={str(self.ineq4_ok).lower()}",
            f"ineq5_ok={str(self.ineq5_ok).lower()}",
            f"theta={'none' if self.theta is None else repr(self.theta)}",
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        """One row per ordered pair ``m < n``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "n", "overlap_sq", "threshold", "passed"])
        for (m, n), v in sorted(self.pair_overlaps.items()):
            w.writerow([m, n, repr(v), repr(self.threshold), str(v < self.threshold).lower()])
        return buf.getvalue()


def coherent_overlap(beta: complex, gamma: complex) -> complex:
    """``<beta|gamma>`` for normalized coherent states."""
    return complex(np.exp(-abs(beta) ** 2 / 2 - abs(gamma) ** 2 / 2 + np.conj(beta) * gamma))


def cat_overlap_sq(m: int, n: int, alpha: complex, phi: float) -> float:
    """Closed form of ``|<C_m|C_n>|^2`` for unnormalized cats."""
    if m < 0 or n < 0:
        raise ValueError("cat indices must be non-negative")
    a2 = abs(alpha) ** 2
    th = (n - m) * phi
    A = 2 - 2 * math.cos(th)
    B = 2 + 2 * math.cos(th)
    return 4 * (math.exp(-A * a2) + math.exp(-B * a2)
                + 2 * math.exp(-2 * a2) * math.cos(2 * a2 * math.sin(th)))


def choose_parameters(d: int, s: float = 1.0) -> CatParams:
    """``alpha = sqrt(10)/sin(pi/(s d))`` and ``phi = pi/(s d)``."""
    if int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d}")
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    phi = math.pi / (s * d)
    return CatParams(alpha=math.sqrt(10) / math.sin(phi), phi=phi, d=int(d), s=float(s))


def parameter_inequalities(alpha: complex, phi: float, d: int) -> tuple[bool, bool, float | None]:
    """Check the sufficient conditions on ``(alpha, phi)``.

    Returns ``(ineq4, ineq5, theta)`` where ineq4 is
    ``|alpha| >= sqrt(10)/sin(pi/d)`` and ineq5 is
    ``theta <= |phi| <= (pi - theta)/(d - 1)`` with
    ``theta = arcsin(sqrt(10)/|alpha|)``. ``theta`` is None when
    ``|alpha| < sqrt(10)``, in which case both checks fail.
    """
    a = abs(alpha)
    r = math.sqrt(10)
    if a * (1 + _INEQ_RTOL) < r:
        return False, False, None
    theta = math.asin(min(1.0, r / a))
    ineq4 = a * (1 + _INEQ_RTOL) >= r / math.sin(math.pi / d)
    p = abs(phi)
    ineq5 = (theta <= p * (1 + _INEQ_RTOL)) and (p <= (math.pi - theta) / (d - 1) * (1 + _INEQ_RTOL))
    return bool(ineq4), bool(ineq5), theta


def certify_quasiorthogonality(params: CatParams, threshold: float = DEFAULT_THRESHOLD) -> OverlapReport:
    pairs = {}
    for m in range(params.d):
        for n in range(m + 1, params.d):
            pairs[(m, n)] = cat_overlap_sq(m, n, params.alpha, params.phi)
    mx = max(pairs.values())
    ineq4, ineq5, theta = parameter_inequalities(params.alpha, params.phi, params.d)
    return OverlapReport(pairs, mx, threshold, bool(mx < threshold), ineq4, ineq5, theta, params)


def fock_truncation(alpha: complex) -> int:
    """Default truncation ``ceil(|alpha|^2 + 8|alpha| + 10)``."""
    a = abs(alpha)
    return int(math.ceil(a * a + 8 * a + 10))


def poisson_tail(alpha: complex, truncation: int) -> float:
    """Probability weight of ``|alpha>`` on Fock states ``>= truncation``."""
    return float(poisson.sf(truncation - 1, abs(alpha) ** 2))


def _check_truncation(alpha: complex, truncation: int) -> None:
    tail = poisson_tail(alpha, truncation)
    if tail >= TAIL_TOLERANCE:
        n = max(fock_truncation(alpha), truncation + 1)
        while poisson_tail(alpha, n) >= TAIL_TOLERANCE:
            n += 1
        raise TruncationError(
            f"truncation {truncation} leaves Poisson tail {tail:.3g} for |alpha|={abs(alpha):.4g}; "
            f"use at least {n}", n)


def coherent_fock(beta: complex, truncation: int) -> np.ndarray:
    """Fock coefficients ``e^{-|b|^2/2} b^n / sqrt(n!)`` for ``n < truncation``."""
    c = np.empty(truncation, dtype=complex)
    c[0] = np.exp(-abs(beta) ** 2 / 2)
    for n in range(1, truncation):
        c[n] = c[n - 1] * beta / math.sqrt(n)
    return c


def cat_fock(alpha: complex, phase_index: int, phi: float, truncation: int | None = None, *,
             check: bool = True) -> np.ndarray:
    """Unnormalized ``|C_n>`` in the Fock basis.

    Raises
    ------
    TruncationError
        If the Poisson tail beyond ``truncation`` exceeds 1e-12 and ``check``.
    """
    if truncation is None:
        truncation = fock_truncation(alpha)
    if check:
        _check_truncation(alpha, truncation)
    beta = alpha * np.exp(1j * phase_index * phi)
    return coherent_fock(beta, truncation) + coherent_fock(-beta, truncation)


def cat_norm_sq(alpha: complex) -> float:
    """Analytic ``<C_n|C_n> = 2(1 + e^{-2|alpha|^2})``."""
    return 2 * (1 + math.exp(-2 * abs(alpha) ** 2))


def normalized_cat_fock(alpha: complex, phase_index: int, phi: float, truncation: int | None = None,
                        *, check: bool = True) -> np.ndarray:
    v = cat_fock(alpha, phase_index, phi, truncation, check=check)
    return v / np.linalg.norm(v)

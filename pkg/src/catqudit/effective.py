"""Second-order time-averaged effective Hamiltonians.

A Hamiltonian is described as

    H(t) = sum_k lambda_k O_k + sum_n G_n (h_n e^{-i w_n t} + h_n^dag e^{+i w_n t})

with real ``lambda_k``, real ``G_n`` and ``w_n > 0``.  Averaging out the fast
harmonic terms to second order gives

    H_eff(t) = H_1 + sum_{m,n} (G_m G_n / wbar_mn) [h_m^dag, h_n] e^{i (w_m - w_n) t},
    1 / wbar_mn = (1/w_m + 1/w_n) / 2.

Pairs with equal frequencies are time independent and are folded into the
static part.  The result is an :class:`EffectiveSpec` which can be evaluated,
printed, or converted back into a :class:`HamiltonianSpec` to average again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"shape mismatch in commutator: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


@dataclass(frozen=True)
class StaticTerm:
    coef: float
    op: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class HarmonicTerm:
    """``G (h e^{-i omega t} + h^dag e^{+i omega t})``; ``h`` is the lowering side."""

    G: float
    omega: float
    h: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"harmonic frequency must be > 0, got {self.omega} ({self.label})")
        if np.iscomplexobj(self.G) and np.imag(self.G) != 0:
            raise ValueError("harmonic coupling G must be real")


@dataclass(frozen=True)
class OscillatingTerm:
    """``coef * op * e^{i beat t}``; members come in conjugate pairs."""

    coef: float
    op: np.ndarray
    beat: float
    label: str = ""


def _check_dims(ops: Sequence[np.ndarray]) -> int:
    dims = {op.shape for op in ops}
    if len(dims) > 1:
        raise ValueError(f"operators live on different spaces: {sorted(dims)}")
    (shape,) = dims
    if shape[0] != shape[1]:
        raise ValueError(f"non-square operator {shape}")
    return shape[0]


@dataclass
class HamiltonianSpec:
    static_terms: list[StaticTerm] = field(default_factory=list)
    harmonic_terms: list[HarmonicTerm] = field(default_factory=list)

    def __post_init__(self):
        ops = [t.op for t in self.static_terms] + [t.h for t in self.harmonic_terms]
        if not ops:
            raise ValueError("empty Hamiltonian spec")
        self.dim = _check_dims(ops)

    def static(self) -> np.ndarray:
        s = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.static_terms:
            s += t.coef * t.op
        return s

    def components(self) -> tuple[np.ndarray, list[tuple[np.ndarray, float]]]:
        """``(S, [(X_k, w_k)])`` with ``H(t) = S + sum_k (X_k e^{i w_k t} + h.c.)``."""
        return self.static(), [(t.G * dag(t.h), t.omega) for t in self.harmonic_terms]

    def max_frequency(self) -> float:
        return max((t.omega for t in self.harmonic_terms), default=0.0)


@dataclass
class ValidityReport:
    """Small-parameter ratios of a time-averaging pass (reported, not enforced)."""

    coupling_ratios: dict[str, float]
    static_ratios: dict[str, float]
    pair_beats: list[tuple[str, str, float, float]]

    def max_ratio(self) -> float:
        vals = list(self.coupling_ratios.values()) + list(self.static_ratios.values())
        return max(vals, default=0.0)

    def lines(self) -> list[str]:
        out = [f"G/omega[{k}] = {v:.4g}" for k, v in self.coupling_ratios.items()]
        out += [f"lambda/omega_min[{k}] = {v:.4g}" for k, v in self.static_ratios.items()]
        out += [f"beat[{a} | {b}] = {w:.6g} rad/s (beat/coupling = {r:.4g})"
                for a, b, w, r in self.pair_beats]
        return out


@dataclass
class EffectiveSpec:
    static_terms: list[StaticTerm]
    oscillating_terms: list[OscillatingTerm]
    validity: ValidityReport | None = None

    def __post_init__(self):
        self.dim = _check_dims([t.op for t in self.static_terms] + [t.op for t in self.oscillating_terms])

    def static(self) -> np.ndarray:
        s = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.static_terms:
            s += t.coef * t.op
        return s

    def components(self) -> tuple[np.ndarray, list[tuple[np.ndarray, float]]]:
        """Positive-beat members only; their partners are the Hermitian conjugates."""
        return self.static(), [(t.coef * t.op, t.beat) for t in self.oscillating_terms if t.beat > 0]

    def max_frequency(self) -> float:
        return max((abs(t.beat) for t in self.oscillating_terms), default=0.0)

    def as_hamiltonian_spec(self) -> HamiltonianSpec:
        """Re-express as static + harmonic terms for another averaging pass."""
        harm = [HarmonicTerm(t.coef, t.beat, dag(t.op), t.label + "^dag")
                for t in self.oscillating_terms if t.beat > 0]
        return HamiltonianSpec(list(self.static_terms), harm)


def time_average(spec: HamiltonianSpec, *, herm_tol: float = 1e-10) -> EffectiveSpec:
    """Second-order effective Hamiltonian of ``spec``.

    Pairs whose commutator vanishes identically are dropped.  The validity
    report lists ``G_n/w_n``, ``|lambda_k|/min w`` and every nonzero beat.
    """
    terms = spec.harmonic_terms
    static = list(spec.static_terms)
    osc: list[OscillatingTerm] = []
    beats = []
    for m, tm in enumerate(terms):
        hm_dag = dag(tm.h)
        for n, tn in enumerate(terms):
            c = commutator(hm_dag, tn.h)
            if not np.any(np.abs(c) > 0):
                continue
            coef = tm.G * tn.G * 0.5 * (1 / tm.omega + 1 / tn.omega)
            label = f"[({tm.label})^dag, {tn.label}]"
            beat = tm.omega - tn.omega
            if beat == 0:
                static.append(StaticTerm(coef, c, label))
            else:
                osc.append(OscillatingTerm(coef, c, beat, label))
                if beat > 0:
                    beats.append((tm.label, tn.label, beat, beat / max(abs(tm.G), abs(tn.G))))
    w_min = min((t.omega for t in terms), default=np.inf)
    validity = ValidityReport(
        coupling_ratios={t.label: abs(t.G) / t.omega for t in terms},
        static_ratios={t.label: abs(t.coef) / w_min for t in spec.static_terms},
        pair_beats=beats,
    )
    out = EffectiveSpec(static, osc, validity)
    s = out.static()
    scale = max(1.0, float(np.abs(s).max(initial=0.0)))
    if np.abs(s - dag(s)).max(initial=0.0) > herm_tol * scale:
        raise ValueError("effective static part is not Hermitian; check that static coefficients are real")
    return out


def realize(spec: HamiltonianSpec | EffectiveSpec, t: float) -> np.ndarray:
    """``H(t)`` as a dense matrix, Hermitian by construction."""
    s, xs = spec.components()
    h = s.copy()
    for x, w in xs:
        y = x * np.exp(1j * w * t)
        h += y + dag(y)
    return 0.5 * (h + dag(h))


def format_effective(spec: EffectiveSpec, unit: float = 2 * np.pi * 1e6, unit_name: str = "2pi MHz") -> str:
    """One line per term: coefficient, beat frequency, label (in units of ``unit`` rad/s)."""
    lines = [f"# coefficient [{unit_name}]\tbeat [{unit_name}]\tlabel"]
    for t in spec.static_terms:
        lines.append(f"{t.coef / unit:+.9g}\t0\t{t.label}")
    for t in spec.oscillating_terms:
        lines.append(f"{t.coef / unit:+.9g}\t{t.beat / unit:+.9g}\t{t.label}")
    return "\n".join(lines) + "\n"

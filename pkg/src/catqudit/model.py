"""Physical model: parameters, detunings, Hamiltonian builders and noise.

All frequencies are angular (rad/s) and all times are seconds internally.
Config files and presets give frequencies as ``omega / 2pi`` with an explicit
unit suffix (``GHz``, ``MHz``, ``kHz``, ``Hz``) and times with ``s``, ``ms``,
``us`` or ``ns``.

Every qutrit-cavity coupling is written in the interaction picture as

    G (e^{i (w_cav - w_trans) t} a^dag sigma^- + h.c.)

so the sign of each exponent follows from which side of the transition the
cavity sits on.  Crosstalk is ``g (e^{i (w_1 - w_2) t} a1^dag a2 + h.c.)``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .effective import (EffectiveSpec, HamiltonianSpec, HarmonicTerm, OscillatingTerm,
                        StaticTerm, dag, time_average)
from .hilbert import SpaceSpec

TWO_PI = 2 * math.pi
GHz = TWO_PI * 1e9
MHz = TWO_PI * 1e6
kHz = TWO_PI * 1e3
us = 1e-6

RATIO_KEYS = ("g1_fe", "g1_eg", "g2_fg", "g2_eg", "mu1_fe", "mu1_eg", "mu2_fg", "mu2_eg")


@dataclass(frozen=True)
class SystemParams:
    """Frequencies and couplings of the qutrit and the two cavities (rad/s).

    ``w_c1t``/``w_c2t`` are the retuned cavity frequencies of the second step.
    ``mu1``/``mu2`` default (None) to the scaling rule
    ``mu_i = sqrt(w_cit / w_ci) g_i``.  The ``*_fe``/``*_eg``/``*_fg`` ratios
    scale the unwanted couplings relative to the principal coupling of the
    same cavity and step.  ``g_cr`` is the crosstalk strength used in both
    steps.
    """

    w_fg: float
    w_fe: float
    w_eg: float
    w_c1: float
    w_c2: float
    w_c1t: float
    w_c2t: float
    g1: float
    g2: float
    mu1: float | None = None
    mu2: float | None = None
    g1_fe: float = 1.0
    g1_eg: float = 0.1
    g2_fg: float = 1.0
    g2_eg: float = 0.1
    mu1_fe: float = 1.0
    mu1_eg: float = 0.1
    mu2_fg: float = 1.0
    mu2_eg: float = 0.1
    g_cr: float = 0.0
    d: int = 3
    s: float = 1.0

    def __post_init__(self):
        if abs(self.w_fg - (self.w_fe + self.w_eg)) > 1e-9 * abs(self.w_fg):
            raise ValueError("inconsistent qutrit frequencies: w_fg != w_fe + w_eg")
        if self.d < 1 or self.s < 1:
            raise ValueError(f"need d >= 1 and s >= 1, got d={self.d}, s={self.s}")
        for k in RATIO_KEYS + ("g_cr",):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be >= 0")

    @property
    def mu1_eff(self) -> float:
        return self.mu1 if self.mu1 is not None else self.g1 * math.sqrt(self.w_c1t / self.w_c1)

    @property
    def mu2_eff(self) -> float:
        return self.mu2 if self.mu2 is not None else self.g2 * math.sqrt(self.w_c2t / self.w_c2)

    @property
    def g_max(self) -> float:
        return max(self.g1, self.g2, self.g1_fe * self.g1, self.g2_fg * self.g2,
                   self.mu1_eff, self.mu2_eff, self.mu1_fe * self.mu1_eff, self.mu2_fg * self.mu2_eff)


@dataclass(frozen=True)
class DerivedParams:
    Delta1: float
    Delta2: float
    delta: float
    Delta1t: float
    Delta1p: float
    Delta2t: float
    Delta2p: float
    Delta12: float
    Delta12t: float
    delta1: float
    delta1t: float
    delta1p: float
    delta2: float
    delta2t: float
    delta2p: float
    lam1: float
    lam2: float
    lam: float
    chi: float
    lam1t: float
    tau: float
    ratios: dict = field(default_factory=dict)


def derived_params(p: SystemParams) -> DerivedParams:
    """Detunings, dispersive shifts and step time ``tau = pi/(s d chi)``.

    Raises
    ------
    ValueError
        If a detuning that the protocol requires to be positive is not.
    """
    D1 = p.w_c1 - p.w_fg
    D2 = p.w_c2 - p.w_fe
    dl = p.w_c1 - p.w_c2 - p.w_eg
    d1 = p.w_fg - p.w_c1t
    for name, v in (("Delta1", D1), ("Delta2", D2), ("delta", dl), ("delta1", d1)):
        if not v > 0:
            raise ValueError(f"detuning {name} must be positive, got {v / GHz:.6g} x 2pi GHz")
    lam1 = p.g1 ** 2 / D1
    lam2 = p.g2 ** 2 / D2
    lam = 0.5 * p.g1 * p.g2 * (1 / D1 + 1 / D2)
    chi = lam ** 2 / dl
    mu1 = p.mu1_eff
    lam1t = mu1 ** 2 / d1
    tau = math.pi / (p.s * p.d * chi)
    ratios = {
        "g1/Delta1": p.g1 / D1,
        "g2/Delta2": p.g2 / D2,
        "lambda/delta": lam / dl,
        "max(lambda1,lambda2,lambda)/delta": max(lam1, lam2, lam) / dl,
        "mu1/delta1": mu1 / d1,
    }
    return DerivedParams(
        Delta1=D1, Delta2=D2, delta=dl,
        Delta1t=p.w_c1 - p.w_fe, Delta1p=p.w_c1 - p.w_eg,
        Delta2t=p.w_fg - p.w_c2, Delta2p=p.w_c2 - p.w_eg,
        Delta12=p.w_c1 - p.w_c2, Delta12t=p.w_c1t - p.w_c2t,
        delta1=d1, delta1t=p.w_c1t - p.w_fe, delta1p=p.w_c1t - p.w_eg,
        delta2=p.w_fe - p.w_c2t, delta2t=p.w_fg - p.w_c2t, delta2p=p.w_eg - p.w_c2t,
        lam1=lam1, lam2=lam2, lam=lam, chi=chi, lam1t=lam1t, tau=tau, ratios=ratios,
    )


def quality_factors(p: SystemParams, kappa: float) -> dict[str, float]:
    """``Q = w_c / kappa`` for each cavity in each step."""
    return {"Q1": p.w_c1 / kappa, "Q2": p.w_c2 / kappa,
            "Q1t": p.w_c1t / kappa, "Q2t": p.w_c2t / kappa}


@dataclass(frozen=True)
class NoiseParams:
    """Cavity decay rates and the qutrit decoherence scale ``T`` (seconds).

    Qutrit rates follow ``gamma_eg = 1/(10 T)``, ``gamma_fe = gamma_fg = 1/T``
    and ``gamma_phi = 2/T``.  ``T = inf`` switches qutrit decoherence off.
    """

    kappa1: float = 0.0
    kappa2: float = 0.0
    T: float = math.inf

    def __post_init__(self):
        if self.kappa1 < 0 or self.kappa2 < 0 or not self.T > 0:
            raise ValueError("rates must be >= 0 and T > 0")

    @classmethod
    def from_times(cls, T_us: float | None, kappa_inv_us: float | None) -> "NoiseParams":
        """Build from ``T`` and ``1/kappa`` in microseconds (None disables)."""
        kappa = 0.0 if kappa_inv_us in (None, math.inf) else 1.0 / (kappa_inv_us * us)
        T = math.inf if T_us in (None, math.inf) else T_us * us
        return cls(kappa, kappa, T)

    @property
    def gamma_eg(self) -> float:
        return 1 / (10 * self.T)

    @property
    def gamma_fe(self) -> float:
        return 1 / self.T

    @property
    def gamma_fg(self) -> float:
        return 1 / self.T

    @property
    def gamma_phi_e(self) -> float:
        return 2 / self.T

    @property
    def gamma_phi_f(self) -> float:
        return 2 / self.T


@dataclass(frozen=True)
class CollapseOp:
    rate: float
    op: np.ndarray
    label: str

    @property
    def matrix(self) -> np.ndarray:
        """Jump operator ``sqrt(rate) * op``."""
        return math.sqrt(self.rate) * self.op


def collapse_ops(noise: NoiseParams, space: SpaceSpec) -> list[CollapseOp]:
    """Jump operators of the master equation; zero-rate channels are omitted.

    Dephasing uses the level projectors as jump operators, so that
    ``D[sigma_ee] rho = sigma_ee rho sigma_ee - {sigma_ee, rho}/2``.
    """
    cands = [
        (noise.kappa1, space.a1, "a1"),
        (noise.kappa2, space.a2, "a2"),
        (noise.gamma_eg, space.sigma("e", "g"), "sm_eg"),
        (noise.gamma_fe, space.sigma("f", "e"), "sm_fe"),
        (noise.gamma_fg, space.sigma("f", "g"), "sm_fg"),
        (noise.gamma_phi_e, space.projector("e"), "s_ee"),
        (noise.gamma_phi_f, space.projector("f"), "s_ff"),
    ]
    return [CollapseOp(r, op, lab) for r, op, lab in cands if r > 0]


# ---------------------------------------------------------------- frequency matching

@dataclass(frozen=True)
class MatchResult:
    w_c1t: float
    mu1: float
    delta1: float
    lam1t: float
    target: float
    residual_supplied: float


def matched_cavity_frequency(p: SystemParams, *, rescale: bool = True) -> MatchResult:
    """Retuned cavity-1 frequency satisfying ``lambda1 + chi = mu1^2 / delta1``.

    With ``rescale`` the coupling follows ``mu1^2 = g1^2 w / w_c1`` and the
    linear solve gives ``w = w_fg / (1 + g1^2 / (L w_c1))`` with
    ``L = lambda1 + chi``.  Without it ``mu1 = p.mu1_eff`` is held fixed and
    ``w = w_fg - mu1^2 / L``.  ``residual_supplied`` is
    ``|L - mu1^2/delta1| / (mu1^2/delta1)`` at the supplied ``p.w_c1t`` and
    ``p.mu1_eff``.
    """
    dp = derived_params(p)
    L = dp.lam1 + dp.chi
    if not L > 0:
        raise ValueError("matching needs lambda1 + chi > 0")
    if rescale:
        w = p.w_fg / (1 + p.g1 ** 2 / (L * p.w_c1))
        mu1 = p.g1 * math.sqrt(w / p.w_c1)
    else:
        mu1 = p.mu1_eff
        w = p.w_fg - mu1 ** 2 / L
    d1 = p.w_fg - w
    if not d1 > 0:
        raise ValueError("no matching frequency below the g-f transition")
    return MatchResult(w_c1t=w, mu1=mu1, delta1=d1, lam1t=mu1 ** 2 / d1, target=L,
                       residual_supplied=abs(L - dp.lam1t) / dp.lam1t)


MATCHING_MODES = ("exact", "as-printed")


def apply_matching(p: SystemParams, mode: str = "exact") -> SystemParams:
    """Return parameters used for the second step.

    ``exact`` replaces ``w_c1t`` by the matched value and lets ``mu1`` follow
    the scaling rule; ``as-printed`` returns ``p`` untouched.
    """
    if mode == "as-printed":
        return p
    if mode != "exact":
        raise ValueError(f"unknown matching mode {mode!r}; expected one of {MATCHING_MODES}")
    m = matched_cavity_frequency(p)
    return replace(p, w_c1t=m.w_c1t, mu1=None)


# ---------------------------------------------------------------- Hamiltonians

def _lower(space: SpaceSpec, from_level: str, to_level: str, mode: str) -> tuple[np.ndarray, str]:
    a = space.a1 if mode == "cav1" else space.a2
    k = "1" if mode == "cav1" else "2"
    return dag(a) @ space.sigma(from_level, to_level), f"a{k}^dag sm_{from_level}{to_level}"


def coupling_term(G: float, w_cav: float, w_trans: float, op: np.ndarray, label: str) -> HarmonicTerm:
    """``G (e^{i (w_cav - w_trans) t} op + h.c.)`` as a :class:`HarmonicTerm`."""
    det = w_cav - w_trans
    if det > 0:
        return HarmonicTerm(G, det, dag(op), f"({label})^dag")
    if det < 0:
        return HarmonicTerm(G, -det, op, label)
    raise ValueError(f"resonant coupling {label}: zero detuning")


def _crosstalk(g: float, w1: float, w2: float, space: SpaceSpec) -> HarmonicTerm:
    return coupling_term(g, w1, w2, dag(space.a1) @ space.a2, "a1^dag a2")


def build_step1(p: SystemParams, space: SpaceSpec, ideal: bool = True) -> HamiltonianSpec:
    """First-step interaction Hamiltonian (2 terms ideal, 7 terms full)."""
    op1, l1 = _lower(space, "f", "g", "cav1")
    op2, l2 = _lower(space, "f", "e", "cav2")
    terms = [coupling_term(p.g1, p.w_c1, p.w_fg, op1, l1),
             coupling_term(p.g2, p.w_c2, p.w_fe, op2, l2)]
    if not ideal:
        for G, wc, wt, fl, tl, mode in (
            (p.g1_fe * p.g1, p.w_c1, p.w_fe, "f", "e", "cav1"),
            (p.g1_eg * p.g1, p.w_c1, p.w_eg, "e", "g", "cav1"),
            (p.g2_fg * p.g2, p.w_c2, p.w_fg, "f", "g", "cav2"),
            (p.g2_eg * p.g2, p.w_c2, p.w_eg, "e", "g", "cav2"),
        ):
            op, lab = _lower(space, fl, tl, mode)
            terms.append(coupling_term(G, wc, wt, op, lab))
        terms.append(_crosstalk(p.g_cr, p.w_c1, p.w_c2, space))
    return HamiltonianSpec([], terms)


def build_step2(p: SystemParams, space: SpaceSpec, ideal: bool = True) -> HamiltonianSpec:
    """Second-step interaction Hamiltonian (1 term ideal, 7 terms full)."""
    mu1, mu2 = p.mu1_eff, p.mu2_eff
    op1, l1 = _lower(space, "f", "g", "cav1")
    terms = [coupling_term(mu1, p.w_c1t, p.w_fg, op1, l1)]
    if not ideal:
        for G, wc, wt, fl, tl, mode in (
            (p.mu1_fe * mu1, p.w_c1t, p.w_fe, "f", "e", "cav1"),
            (p.mu1_eg * mu1, p.w_c1t, p.w_eg, "e", "g", "cav1"),
            (mu2, p.w_c2t, p.w_fe, "f", "e", "cav2"),
            (p.mu2_fg * mu2, p.w_c2t, p.w_fg, "f", "g", "cav2"),
            (p.mu2_eg * mu2, p.w_c2t, p.w_eg, "e", "g", "cav2"),
        ):
            op, lab = _lower(space, fl, tl, mode)
            terms.append(coupling_term(G, wc, wt, op, lab))
        terms.append(_crosstalk(p.g_cr, p.w_c1t, p.w_c2t, space))
    return HamiltonianSpec([], terms)


# Hand-written effective Hamiltonians, used as independent references for the
# time-averaging engine.

def _stark_terms(dp: DerivedParams, space: SpaceSpec) -> list[StaticTerm]:
    a1, a2 = space.a1, space.a2
    gg, ee, ff = space.projector("g"), space.projector("e"), space.projector("f")
    return [
        StaticTerm(dp.lam1, dag(a1) @ a1 @ gg - a1 @ dag(a1) @ ff, "a1^dag a1 s_gg - a1 a1^dag s_ff"),
        StaticTerm(dp.lam2, dag(a2) @ a2 @ ee - a2 @ dag(a2) @ ff, "a2^dag a2 s_ee - a2 a2^dag s_ff"),
    ]


def step1_first_pass(p: SystemParams, space: SpaceSpec) -> EffectiveSpec:
    """Stark shifts plus the two-photon g-e coupling oscillating at ``delta``."""
    dp = derived_params(p)
    x = dag(space.a1) @ space.a2 @ space.sigma("e", "g")
    return EffectiveSpec(_stark_terms(dp, space), [
        OscillatingTerm(dp.lam, x, dp.delta, "a1^dag a2 sm_eg"),
        OscillatingTerm(dp.lam, dag(x), -dp.delta, "a1 a2^dag sp_eg"),
    ])


def step1_dispersive(p: SystemParams, space: SpaceSpec) -> EffectiveSpec:
    """Static dispersive Hamiltonian after the second averaging pass.

    The excited-manifold term is ``a1 a1^dag a2^dag a2 s_ee``, the operator
    the commutator produces.
    """
    dp = derived_params(p)
    a1, a2 = space.a1, space.a2
    gg, ee = space.projector("g"), space.projector("e")
    chi_op = dag(a1) @ a1 @ a2 @ dag(a2) @ gg - a1 @ dag(a1) @ dag(a2) @ a2 @ ee
    return EffectiveSpec(_stark_terms(dp, space) + [
        StaticTerm(dp.chi, chi_op, "a1^dag a1 a2 a2^dag s_gg - a1 a1^dag a2^dag a2 s_ee")], [])


def step1_effective(p: SystemParams, space: SpaceSpec) -> EffectiveSpec:
    """Ground-manifold reduction ``(lambda1+chi) n1 s_gg + chi n1 n2 s_gg``."""
    dp = derived_params(p)
    gg = space.projector("g")
    return EffectiveSpec([
        StaticTerm(dp.lam1 + dp.chi, space.n1_op @ gg, "n1 s_gg"),
        StaticTerm(dp.chi, space.n1_op @ space.n2_op @ gg, "n1 n2 s_gg"),
    ], [])


def step2_dispersive(p: SystemParams, space: SpaceSpec) -> EffectiveSpec:
    dp = derived_params(p)
    a1 = space.a1
    op = a1 @ dag(a1) @ space.projector("f") - dag(a1) @ a1 @ space.projector("g")
    return EffectiveSpec([StaticTerm(dp.lam1t, op, "a1 a1^dag s_ff - a1^dag a1 s_gg")], [])


def step2_effective(p: SystemParams, space: SpaceSpec) -> EffectiveSpec:
    dp = derived_params(p)
    return EffectiveSpec([StaticTerm(-dp.lam1t, space.n1_op @ space.projector("g"), "n1 s_gg")], [])


def build_effective(step: int, p: SystemParams, space: SpaceSpec) -> tuple[EffectiveSpec, EffectiveSpec]:
    """Engine-derived effective Hamiltonian of a step and its ground-manifold form.

    Step 1 averages the ideal spec twice (the second pass removes the beat at
    ``delta``); step 2 averages once.
    """
    if step == 1:
        first = time_average(build_step1(p, space, ideal=True))
        return time_average(first.as_hamiltonian_spec()), step1_effective(p, space)
    if step == 2:
        return time_average(build_step2(p, space, ideal=True)), step2_effective(p, space)
    raise ValueError(f"step must be 1 or 2, got {step}")


# ---------------------------------------------------------------- config files

_FREQ_UNITS = {"GHz": GHz, "MHz": MHz, "kHz": kHz, "Hz": TWO_PI}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_VALUE_RE = re.compile(r"^\s*([-+0-9.eE]+|inf|none)\s*([A-Za-z]*)\s*$")

FREQ_KEYS = ("w_fg", "w_fe", "w_eg", "w_c1", "w_c2", "w_c1t", "w_c2t", "g1", "g2", "mu1", "mu2", "g_cr")
TIME_KEYS = ("T", "kappa_inv")


def parse_quantity(text: str, kind: str) -> float | None:
    """Parse ``"12.0 GHz"`` (to rad/s) or ``"10 us"`` (to seconds).

    ``kind`` is ``"freq"``, ``"time"`` or ``"plain"``; ``none`` maps to None.
    """
    m = _VALUE_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    num, unit = m.groups()
    if num == "none":
        return None
    val = float(num)
    if kind == "plain":
        if unit:
            raise ValueError(f"unexpected unit {unit!r} in {text!r}")
        return val
    table = _FREQ_UNITS if kind == "freq" else _TIME_UNITS
    if unit not in table:
        raise ValueError(f"{text!r}: expected a unit suffix from {sorted(table)}")
    return val * table[unit]


@dataclass
class RunConfig:
    """Parsed config file: system parameters, noise times and printed checks."""

    params: SystemParams
    T_us: float | None = None
    kappa_inv_us: float | None = None
    checks: dict[str, float] = field(default_factory=dict)
    source: str = ""


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse a flat ``key = value unit`` file (``#`` comments).

    Keys ``check.<name>`` hold printed detunings (rad/s) compared against the
    recomputed ones by :func:`check_printed`.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    cp.read_string("[run]\n" + text, source=source)
    raw = dict(cp["run"])
    kw, checks = {}, {}
    T_us = kappa_inv_us = None
    names = {f.name for f in fields(SystemParams)}
    for key, val in raw.items():
        if key.startswith("check."):
            checks[key[6:]] = parse_quantity(val, "freq")
        elif key in FREQ_KEYS:
            kw[key] = parse_quantity(val, "freq")
        elif key in TIME_KEYS:
            v = parse_quantity(val, "time")
            v_us = None if v is None else v / us
            if key == "T":
                T_us = v_us
            else:
                kappa_inv_us = v_us
        elif key == "d":
            kw[key] = int(parse_quantity(val, "plain"))
        elif key in names:
            kw[key] = parse_quantity(val, "plain")
        else:
            raise ValueError(f"{source}: unknown key {key!r}")
    if kw.get("g_cr") is None:
        kw.pop("g_cr", None)
    missing = [k for k in FREQ_KEYS[:9] if k not in kw]
    if missing:
        raise ValueError(f"{source}: missing keys {missing}")
    return RunConfig(SystemParams(**kw), T_us, kappa_inv_us, checks, source)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), str(path))


def load_preset(name: str) -> RunConfig:
    ref = resources.files("catqudit") / "presets" / f"{name}.cfg"
    if not ref.is_file():
        raise ValueError(f"unknown preset {name!r}")
    return parse_config(ref.read_text(encoding="utf-8"), f"preset:{name}")


def table1() -> SystemParams:
    return load_preset("table1").params


def check_printed(p: SystemParams, checks: dict[str, float], tol: float = 0.005 * GHz) -> dict[str, tuple[float, float, bool]]:
    """Compare printed detunings with recomputed ones: name -> (printed, computed, ok)."""
    dp = asdict(derived_params(p))
    out = {}
    for k, v in checks.items():
        if k not in dp:
            raise ValueError(f"unknown check quantity {k!r}")
        out[k] = (v, dp[k], abs(v - dp[k]) <= tol)
    return out

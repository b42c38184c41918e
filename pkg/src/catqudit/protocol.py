"""Two-step protocol entangling a Fock-state qudit with a cat-state qudit.

Step 1 runs the first-step Hamiltonian for ``tau (1 + dtau_frac)``, step 2
the retuned Hamiltonian for ``tau (1 - dtau_frac)``.  The state is carried
across the boundary unchanged, and each step's interaction picture starts at
its own ``t = 0``.  Fidelity is taken against the target with cat phase step
``phi = -pi/(s d)`` in the interaction picture of the simulation.

Model levels
------------
effective
    Ground-manifold Hamiltonians ``(lam1+chi) n1 s_gg + chi n1 n2 s_gg`` and
    ``-lam1t n1 s_gg``.  Static and cheap; crosstalk is not represented.
intermediate
    Time-averaged ideal step Hamiltonians (one averaging pass, so step 1
    keeps the two-photon term beating at ``delta``) plus the un-averaged
    cavity-cavity crosstalk.
full
    All seven harmonic terms of each step, including every unwanted coupling.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cat_algebra import cat_fock, choose_parameters, fock_truncation
from .dynamics import EvolutionResult, IntegratorConfig, evolve_master, evolve_unitary, fidelity
from .effective import EffectiveSpec, OscillatingTerm, dag, time_average
from .hilbert import SpaceSpec
from .model import (NoiseParams, SystemParams, apply_matching, build_step1, build_step2,
                    collapse_ops, coupling_term, derived_params, step1_effective, step2_effective, table1, us)

LEVELS = ("effective", "intermediate", "full")
AXES = ("T", "kappa_inv", "x", "dtau_frac", "g_cr")


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol run.

    ``dtau_mode="opposite"`` lengthens step 1 and shortens step 2 by the same
    amount; ``"same"`` lengthens both (a diagnostic variant).
    ``g_cr_frac`` is the crosstalk strength as a fraction of ``g_max``;
    ``alpha`` None uses the quasiorthogonal choice for ``(d, s)``; ``n1``/``n2``
    None use ``d + 3`` and the Poisson-tail rule.
    """

    params: SystemParams = field(default_factory=table1)
    noise: NoiseParams = field(default_factory=NoiseParams)
    model_level: str = "effective"
    x: float = 0.0
    dtau_frac: float = 0.0
    g_cr_frac: float = 0.0
    alpha: complex | None = None
    n1: int | None = None
    n2: int | None = None
    matching: str = "exact"
    dtau_mode: str = "opposite"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    n_samples: int = 11

    def __post_init__(self):
        if self.model_level not in LEVELS:
            raise ValueError(f"model_level must be one of {LEVELS}, got {self.model_level!r}")
        if abs(self.x) >= 1 / math.sqrt(3):
            raise ValueError("|x| must be < 1/sqrt(3)")
        if self.x != 0 and self.params.d != 3:
            raise ValueError("the skew x is defined for d = 3 only")
        if not -1 < self.dtau_frac < 1:
            raise ValueError("dtau_frac must lie in (-1, 1)")
        if self.dtau_mode not in ("opposite", "same"):
            raise ValueError("dtau_mode must be 'opposite' or 'same'")
        if self.g_cr_frac < 0:
            raise ValueError("g_cr_frac must be >= 0")

    @property
    def alpha_value(self) -> complex:
        if self.alpha is not None:
            return self.alpha
        return choose_parameters(max(self.params.d, 2), self.params.s).alpha

    @property
    def space(self) -> SpaceSpec:
        n1 = self.n1 if self.n1 is not None else self.params.d + 3
        n2 = self.n2 if self.n2 is not None else fock_truncation(self.alpha_value)
        return SpaceSpec(n1, n2)

    @property
    def T_us(self) -> float:
        return self.noise.T / us

    @property
    def kappa_inv_us(self) -> float:
        return math.inf if self.noise.kappa2 == 0 else 1 / self.noise.kappa2 / us

    def with_axis(self, axis: str, value: float) -> "ProtocolConfig":
        """Copy with one sweep knob set; ``T``/``kappa_inv`` are in microseconds."""
        if axis == "T":
            return replace(self, noise=NoiseParams(self.noise.kappa1, self.noise.kappa2, value * us))
        if axis == "kappa_inv":
            k = 1 / (value * us)
            return replace(self, noise=NoiseParams(k, k, self.noise.T))
        if axis == "x":
            return replace(self, x=value)
        if axis == "dtau_frac":
            return replace(self, dtau_frac=value)
        if axis == "g_cr":
            return replace(self, g_cr_frac=value)
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


@dataclass
class FidelityResult:
    config: ProtocolConfig
    F: float
    leakage: float
    runtime: float
    diagnostics: dict
    flagged: bool
    samples: list[dict] = field(default_factory=list, repr=False)
    state: np.ndarray | None = field(default=None, repr=False)


def skew_weights(d: int, x: float) -> np.ndarray:
    """Normalized cavity-1 weights; ``x`` tilts ``|0>`` up and ``|2>`` down (d = 3)."""
    if x != 0 and d != 3:
        raise ValueError("the skew x is defined for d = 3 only")
    if d == 3:
        w = np.array([1 / math.sqrt(3) + x, 1 / math.sqrt(3), 1 / math.sqrt(3) - x])
        return w / math.sqrt(1 + 2 * x * x)
    return np.full(d, 1 / math.sqrt(d))


def initial_state(d: int, alpha: complex, x: float, space: SpaceSpec) -> np.ndarray:
    """Normalized ``(sum_n w_n |n>) (|alpha> + |-alpha>) |g>``."""
    if d > space.n1:
        raise ValueError(f"d={d} Fock states do not fit in n1={space.n1}")
    c1 = np.zeros(space.n1, dtype=complex)
    c1[:d] = skew_weights(d, x)
    cat = cat_fock(alpha, 0, 0.0, space.n2)
    psi = space.product_state("g", c1, cat)
    return psi / np.linalg.norm(psi)


def ideal_target(d: int, alpha: complex, phi: float, space: SpaceSpec) -> np.ndarray:
    """Normalized ``sum_n |n> |C_n> |g>`` with ``C_n`` the cat at phase ``n phi``."""
    if d > space.n1:
        raise ValueError(f"d={d} Fock states do not fit in n1={space.n1}")
    two = np.zeros((space.n1, space.n2), dtype=complex)
    for n in range(d):
        two[n] = cat_fock(alpha, n, phi, space.n2) / math.sqrt(d)
    psi = np.kron(np.eye(3)[0], two.ravel()).astype(complex)
    return psi / np.linalg.norm(psi)


def _with_crosstalk(avg: EffectiveSpec, p: SystemParams, w1: float, w2: float, space: SpaceSpec) -> EffectiveSpec:
    if p.g_cr == 0:
        return avg
    ht = coupling_term(p.g_cr, w1, w2, dag(space.a1) @ space.a2, "a1^dag a2")
    extra = [OscillatingTerm(ht.G, dag(ht.h), ht.omega, "crosstalk"),
             OscillatingTerm(ht.G, ht.h, -ht.omega, "crosstalk^dag")]
    return EffectiveSpec(avg.static_terms, avg.oscillating_terms + extra, avg.validity)


def step_hamiltonians(cfg: ProtocolConfig) -> tuple:
    """Hamiltonians of both steps at the configured model level."""
    p1 = replace(cfg.params, g_cr=cfg.g_cr_frac * cfg.params.g_max)
    p2 = apply_matching(p1, cfg.matching)
    space = cfg.space
    if cfg.model_level == "effective":
        return step1_effective(p1, space), step2_effective(p2, space), p1, p2
    if cfg.model_level == "intermediate":
        h1 = _with_crosstalk(time_average(build_step1(p1, space)), p1, p1.w_c1, p1.w_c2, space)
        h2 = _with_crosstalk(time_average(build_step2(p2, space)), p2, p2.w_c1t, p2.w_c2t, space)
        return h1, h2, p1, p2
    return build_step1(p1, space, ideal=False), build_step2(p2, space, ideal=False), p1, p2


def run(cfg: ProtocolConfig) -> FidelityResult:
    started = time.perf_counter()
    p = cfg.params
    space = cfg.space
    alpha = cfg.alpha_value
    h1, h2, p1, p2 = step_hamiltonians(cfg)
    tau = derived_params(p1).tau
    psi0 = initial_state(p.d, alpha, cfg.x, space)
    target = ideal_target(p.d, alpha, -math.pi / (p.s * p.d), space)
    c_ops = collapse_ops(cfg.noise, space)
    t1 = tau * (1 + cfg.dtau_frac)
    t2 = tau * (1 - cfg.dtau_frac) if cfg.dtau_mode == "opposite" else t1
    kw = dict(space=space, target=target, n_samples=cfg.n_samples)
    if c_ops:
        r1 = evolve_master(psi0, h1, c_ops, (0.0, t1), cfg.integrator, **kw)
        r2 = evolve_master(r1.state, h2, c_ops, (0.0, t2), cfg.integrator, **kw)
        final = r2.state
        pops = np.real(np.diag(final))
    else:
        r1 = evolve_unitary(psi0, h1, (0.0, t1), cfg.integrator, **kw)
        r2 = evolve_unitary(r1.state, h2, (0.0, t2), cfg.integrator, **kw)
        final = r2.state
        pops = np.abs(final) ** 2
    q = np.arange(space.dim) // (space.n1 * space.n2)
    leakage = float(pops[q > 0].sum())
    diag = _merge_diagnostics(r1, r2)
    samples = r1.samples + [dict(s, t=s["t"] + t1) for s in r2.samples[1:]]
    return FidelityResult(cfg, fidelity(final, target), leakage, time.perf_counter() - started,
                          diag, r1.flagged or r2.flagged, samples, final)


def _merge_diagnostics(r1: EvolutionResult, r2: EvolutionResult) -> dict:
    out = {}
    for k in r1.diagnostics:
        a, b = r1.diagnostics[k], r2.diagnostics[k]
        if k == "min_eigenvalue":
            out[k] = min(a, b)
        elif k in ("steps", "wall_time_s"):
            out[k] = a + b
        elif k == "reduced_dim":
            out[k] = max(a, b)
        else:
            out[k] = max(a, b)
    return out


@dataclass
class SweepPoint:
    axis: str
    value: float
    result: FidelityResult | None
    error: str | None = None


def _run_point(args) -> SweepPoint:
    cfg, axis, value = args
    try:
        res = run(cfg.with_axis(axis, value))
        res.state = None
        return SweepPoint(axis, value, res)
    except Exception as exc:  # recorded per point; the sweep continues
        return SweepPoint(axis, value, None, f"{type(exc).__name__}: {exc}")


def sweep(template: ProtocolConfig, axis: str, points, jobs: int = 1) -> list[SweepPoint]:
    """Independent runs over ``points`` on ``axis``, returned in input order."""
    points = list(points)
    if not points:
        raise ValueError("sweep needs at least one point")
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    tasks = [(template, axis, float(v)) for v in points]
    if jobs <= 1 or len(tasks) == 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_point, tasks))


RESULT_COLUMNS = ("axis_value", "F", "model_level", "T_us", "kappa_inv_us", "x", "dtau_frac",
                  "g_cr_frac", "runtime_s", "leakage", "max_trace_error", "max_hermiticity_defect",
                  "min_eigenvalue", "max_excited_population", "reduced_dim", "steps", "flagged", "error")


def result_row(res: FidelityResult | None, cfg: ProtocolConfig, axis_value, error: str | None = None) -> dict:
    """Flat record following :data:`RESULT_COLUMNS`."""
    row = dict.fromkeys(RESULT_COLUMNS, "")
    row.update(axis_value=axis_value, model_level=cfg.model_level, T_us=cfg.T_us,
               kappa_inv_us=cfg.kappa_inv_us, x=cfg.x, dtau_frac=cfg.dtau_frac,
               g_cr_frac=cfg.g_cr_frac, error=error or "")
    if res is not None:
        row.update(F=res.F, runtime_s=res.runtime, leakage=res.leakage, flagged=res.flagged)
        for k in ("max_trace_error", "max_hermiticity_defect", "min_eigenvalue",
                  "max_excited_population", "reduced_dim", "steps"):
            row[k] = res.diagnostics.get(k, "")
    return row


def config_dict(cfg: ProtocolConfig) -> dict:
    """JSON-friendly echo of a config (frequencies in rad/s, times in s)."""
    d = asdict(cfg)
    if cfg.alpha is not None:
        d["alpha"] = [float(np.real(cfg.alpha)), float(np.imag(cfg.alpha))]
    for k, v in list(d["noise"].items()):
        if v == math.inf:
            d["noise"][k] = "inf"
    return d

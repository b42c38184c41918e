"""Time evolution: Lindblad master equation, Schroedinger equation, closed forms.

Hamiltonians are taken in the decomposed form
``H(t) = S + sum_k (X_k e^{i w_k t} + h.c.)`` provided by
:meth:`HamiltonianSpec.components` / :meth:`EffectiveSpec.components`.

Before integrating, the problem is restricted to the smallest set of basis
states that is closed under every operator that can move amplitude (``S``,
``X_k``, ``X_k^dag``, jump operators and ``c^dag c``) and that contains the
support of the initial state.  This restriction is exact.  Operators are
stored as CSR matrices on a shared sparsity pattern so that ``H(t)`` only
needs a data update per stage.  Time-independent Schroedinger problems are
propagated exactly with ``expm_multiply`` regardless of ``method``.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from .cat_algebra import cat_fock
from .hilbert import SpaceSpec

log = logging.getLogger(__name__)

HEARTBEAT_S = 30.0
TRACE_TOL = 1e-6
HERM_TOL = 1e-8
POS_TOL = 1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    """``method`` is ``"rk4"`` (fixed step) or ``"adaptive"`` (DOP853).

    The RK4 step is ``min(max_step, 2 pi / (w_fast * steps_per_fastest_period))``
    where ``w_fast`` is the larger of the fastest harmonic frequency and a
    norm bound of ``H`` on the reachable subspace.
    """

    method: str = "rk4"
    max_step: float = 1e-9
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    steps_per_fastest_period: int = 50

    def __post_init__(self):
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ValueError("tolerances and max_step must be > 0")
        if self.steps_per_fastest_period < 20:
            raise ValueError("steps_per_fastest_period must be >= 20")


@dataclass
class EvolutionResult:
    state: np.ndarray
    times: np.ndarray
    samples: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    flagged: bool = False
    states: list = field(default_factory=list, repr=False)


class IntegrationError(RuntimeError):
    pass


def _as_list(c_ops) -> list[np.ndarray]:
    out = []
    for c in c_ops or []:
        out.append(c.matrix if hasattr(c, "matrix") else np.asarray(c, dtype=complex))
    return out


def reachable_indices(seed: np.ndarray, ops: Sequence) -> np.ndarray:
    """Sorted basis indices reachable from ``seed`` under the operator patterns."""
    dim = seed.size
    adj = sp.csr_matrix((dim, dim), dtype=bool)
    for op in ops:
        adj = adj + (abs(sp.csr_matrix(op)) > 0)
    adj = adj.T.tocsr()  # column j of op maps |j> to rows i; adjacency j -> i
    seen = seed.copy()
    frontier = np.flatnonzero(seed)
    while frontier.size:
        nxt = np.unique(adj[frontier].indices)
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return np.flatnonzero(seen)


class _Generator:
    """``A(t) = -i H(t) - K/2`` on a shared CSR pattern, plus jump operators."""

    def __init__(self, s: np.ndarray, xs: list[tuple[np.ndarray, float]], jumps: list[np.ndarray]):
        dim = s.shape[0]
        k = np.zeros((dim, dim), dtype=complex)
        for c in jumps:
            k += c.conj().T @ c
        a0 = -1j * s - 0.5 * k
        bs = [-1j * x for x, _ in xs]
        cs = [-1j * x.conj().T for x, _ in xs]
        mask = np.abs(a0) > 0
        for b in bs + cs:
            mask |= np.abs(b) > 0
        rows, cols = np.nonzero(mask)
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=dim))])
        self.a0 = a0[rows, cols]
        self.freqs = np.array([w for _, w in xs], dtype=float)
        self.b = np.array([b[rows, cols] for b in bs]).reshape(len(bs), rows.size)
        self.c = np.array([c[rows, cols] for c in cs]).reshape(len(cs), rows.size)
        self.A = sp.csr_matrix((self.a0.copy(), cols, indptr), shape=(dim, dim))
        self.jumps = [sp.csr_matrix(c) for c in jumps]
        self.static = len(xs) == 0

    def update(self, t: float) -> sp.csr_matrix:
        if not self.static:
            ph = np.exp(1j * self.freqs * t)
            self.A.data[:] = self.a0 + ph @ self.b + ph.conj() @ self.c
        return self.A

    def rhs_rho(self, t: float, rho: np.ndarray) -> np.ndarray:
        y = self.update(t) @ rho
        out = y + y.conj().T
        for c in self.jumps:
            m = c @ rho
            out += c @ m.conj().T
        return out

    def rhs_psi(self, t: float, psi: np.ndarray) -> np.ndarray:
        return self.update(t) @ psi


def _fast_frequency(s: np.ndarray, xs) -> float:
    """Largest harmonic frequency or infinity-norm bound of ``H``, whichever is larger."""
    bound = np.abs(s).sum(axis=1).max(initial=0.0)
    extra = np.zeros(s.shape[0])
    for x, _ in xs:
        extra += np.abs(x).sum(axis=1) + np.abs(x).sum(axis=0)
    bound += extra.max(initial=0.0)
    return max([bound] + [w for _, w in xs])


def _rk4_grid(t0: float, t1: float, w_fast: float, cfg: IntegratorConfig) -> tuple[int, float]:
    span = t1 - t0
    dt = cfg.max_step
    if w_fast > 0:
        dt = min(dt, 2 * math.pi / (w_fast * cfg.steps_per_fastest_period))
    n = max(1, int(math.ceil(span / dt - 1e-9)))
    return n, span / n


def _rk4(f, y, t0: float, n: int, dt: float, sample_steps: set[int], on_sample):
    t = t0
    on_sample(0, t, y)
    beat = time.perf_counter() + HEARTBEAT_S
    for i in range(1, n + 1):
        k1 = f(t, y)
        k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + i * dt
        if i in sample_steps:
            if not np.all(np.isfinite(y)):
                raise IntegrationError(f"non-finite state at t={t:.6g}; step {dt:.3g} too large")
            on_sample(i, t, y)
        if i % 256 == 0 and time.perf_counter() > beat:
            log.info("rk4 step %d/%d (t = %.4g us)", i, n, t * 1e6)
            beat = time.perf_counter() + HEARTBEAT_S
    return y


def _sample_steps(n: int, n_samples: int) -> set[int]:
    if n_samples <= 1:
        return {n}
    return {int(round(k)) for k in np.linspace(0, n, n_samples)} | {n}


class _Sampler:
    def __init__(self, idx, space, target, kind, full_dim=None):
        self.idx = idx
        self.full_dim = full_dim
        self.states: list[np.ndarray] = []
        self.space = space
        self.kind = kind
        self.target = None if target is None else np.asarray(target, dtype=complex)[idx]
        self.rows: list[dict] = []
        self.worst = {"max_trace_error": 0.0, "max_hermiticity_defect": 0.0,
                      "min_eigenvalue": math.inf, "max_excited_population": 0.0}

    def __call__(self, step, t, y):
        row = {"t": t}
        if self.kind == "rho":
            rho = y
            pops = np.real(np.diag(rho))
            tr = float(pops.sum())
            herm = float(np.linalg.norm(rho - rho.conj().T))
            mineig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
            row.update(trace=tr)
            self.worst["max_trace_error"] = max(self.worst["max_trace_error"], abs(tr - 1))
            self.worst["max_hermiticity_defect"] = max(self.worst["max_hermiticity_defect"], herm)
            self.worst["min_eigenvalue"] = min(self.worst["min_eigenvalue"], mineig)
            if self.target is not None:
                row["fidelity_to_target"] = fidelity(rho, self.target)
        else:
            pops = np.abs(y) ** 2
            tr = float(pops.sum())
            row.update(trace=tr)
            self.worst["max_trace_error"] = max(self.worst["max_trace_error"], abs(tr - 1))
            if self.target is not None:
                row["fidelity_to_target"] = abs(np.vdot(self.target, y))
        if self.space is not None:
            sp_ = self.space
            q = self.idx // (sp_.n1 * sp_.n2)
            m1 = (self.idx // sp_.n2) % sp_.n1
            m2 = self.idx % sp_.n2
            for lev, name in enumerate("gef"):
                row[f"qutrit_{name}_pop"] = float(pops[q == lev].sum())
            row["cav1_n"] = float(pops @ m1)
            row["cav2_n"] = float(pops @ m2)
            self.worst["max_excited_population"] = max(
                self.worst["max_excited_population"], row["qutrit_e_pop"] + row["qutrit_f_pop"])
        self.rows.append(row)
        if self.full_dim is not None:
            self.states.append(_embed_state(y, self.idx, self.full_dim, self.kind))


def _embed_state(y, idx, full_dim, kind):
    if kind == "rho":
        out = np.zeros((full_dim, full_dim), dtype=complex)
        out[np.ix_(idx, idx)] = y
    else:
        out = np.zeros(full_dim, dtype=complex)
        out[idx] = y
    return out


def _prepare(state0, h, c_ops, kind):
    s, xs = h.components()
    s = sp.csr_matrix(s)
    xs = [(sp.csr_matrix(x), w) for x, w in xs]
    xs = [(x, w) for x, w in xs if x.count_nonzero()]
    jumps = [sp.csr_matrix(c) for c in _as_list(c_ops)] if kind == "rho" else []
    if kind == "rho":
        seed = np.any(np.abs(state0) > 0, axis=0) | np.any(np.abs(state0) > 0, axis=1)
    else:
        seed = np.abs(state0) > 0
    ops = ([s] + [x for x, _ in xs] + [x.conj().T for x, _ in xs] + jumps
           + [c.conj().T @ c for c in jumps])
    idx = reachable_indices(seed, ops)

    def restrict(m):
        return m[idx][:, idx].toarray()

    s_r = restrict(s)
    xs_r = [(restrict(x), w) for x, w in xs]
    jumps_r = [j for j in (restrict(c) for c in jumps) if np.any(j != 0)]
    return idx, s_r, xs_r, jumps_r


def _integrate(kind, state0, h, c_ops, t_span, cfg, space, target, n_samples, keep_states=False):
    cfg = cfg or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    idx, s_r, xs_r, jumps_r = _prepare(state0, h, c_ops, kind)
    gen = _Generator(s_r, xs_r, jumps_r)
    y0 = state0[np.ix_(idx, idx)] if kind == "rho" else state0[idx]
    f = gen.rhs_rho if kind == "rho" else gen.rhs_psi
    full_dim = state0.shape[0]
    sampler = _Sampler(idx, space, target, kind, full_dim if keep_states else None)
    w_fast = _fast_frequency(s_r, xs_r)
    started = time.perf_counter()
    if t1 == t0:
        sampler(0, t0, y0)
        y, n_steps = y0, 0
    elif gen.static and kind == "psi":
        # time-independent Schroedinger problem: exact propagation
        ts = np.linspace(t0, t1, max(2, n_samples))
        ys = expm_multiply(gen.update(t0), y0, start=0.0, stop=t1 - t0, num=ts.size, endpoint=True)
        for k, t in enumerate(ts):
            sampler(k, t, ys[k])
        y, n_steps = ys[-1], 0
    elif cfg.method == "rk4":
        n, dt = _rk4_grid(t0, t1, w_fast, cfg)
        y = _rk4(f, y0, t0, n, dt, _sample_steps(n, n_samples), sampler)
        n_steps = n
    else:
        shape = y0.shape
        t_eval = np.linspace(t0, t1, max(2, n_samples))
        sol = solve_ivp(lambda t, v: f(t, v.reshape(shape)).ravel(), (t0, t1), y0.ravel(),
                        method="DOP853", t_eval=t_eval, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                        max_step=cfg.max_step)
        if not sol.success:
            raise IntegrationError(sol.message)
        for k, t in enumerate(sol.t):
            sampler(k, t, sol.y[:, k].reshape(shape))
        y = sol.y[:, -1].reshape(shape)
        n_steps = int(sol.nfev)
    out = _embed_state(y, idx, full_dim, kind)
    diag = dict(sampler.worst)
    diag.update(reduced_dim=int(idx.size), steps=n_steps, w_fast=w_fast,
                wall_time_s=time.perf_counter() - started)
    if kind == "psi":
        diag.pop("min_eigenvalue", None)
        diag.pop("max_hermiticity_defect", None)
    flagged = (diag["max_trace_error"] > TRACE_TOL
               or diag.get("max_hermiticity_defect", 0.0) > HERM_TOL
               or diag.get("min_eigenvalue", 0.0) < -POS_TOL)
    times = np.array([r["t"] for r in sampler.rows])
    return EvolutionResult(out, times, sampler.rows, diag, bool(flagged), sampler.states)


def evolve_master(rho0: np.ndarray, h, c_ops, t_span, cfg: IntegratorConfig | None = None, *,
                  space: SpaceSpec | None = None, target: np.ndarray | None = None,
                  n_samples: int = 11, keep_states: bool = False) -> EvolutionResult:
    """Integrate ``drho/dt = -i[H(t), rho] + sum_c D[c] rho`` over ``t_span``.

    Parameters
    ----------
    rho0 : ndarray
        Initial density matrix (a state vector is promoted to a projector).
    h : HamiltonianSpec or EffectiveSpec
        Anything with a ``components()`` method.
    c_ops : sequence
        Jump operators, either matrices or objects with a ``matrix`` attribute.
    target : ndarray, optional
        Pure state whose fidelity is recorded at each sample.
    keep_states : bool
        Store the full-space state at every sample in ``result.states``.

    Trace, Hermiticity and positivity are checked at the sample times; runs
    exceeding the tolerances are flagged rather than aborted.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (h.dim, h.dim):
        raise ValueError(f"state dimension {rho0.shape} does not match Hamiltonian dimension {h.dim}")
    return _integrate("rho", rho0, h, c_ops, t_span, cfg, space, target, n_samples, keep_states)


def evolve_unitary(psi0: np.ndarray, h, t_span, cfg: IntegratorConfig | None = None, *,
                   space: SpaceSpec | None = None, target: np.ndarray | None = None,
                   n_samples: int = 11, keep_states: bool = False) -> EvolutionResult:
    """Schroedinger propagation ``dpsi/dt = -i H(t) psi``."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (h.dim,):
        raise ValueError(f"state dimension {psi0.shape} does not match Hamiltonian dimension {h.dim}")
    return _integrate("psi", psi0, h, [], t_span, cfg, space, target, n_samples, keep_states)


def trajectory_infidelity(psi0: np.ndarray, h_ref, h_test, t_span, n_samples: int = 21,
                          cfg: IntegratorConfig | None = None) -> np.ndarray:
    """``1 - |<psi_ref(t)|psi_test(t)>|^2`` at ``n_samples`` equally spaced times after ``t_span[0]``.

    Both runs use the adaptive integrator so that the sample times coincide.
    Averaging over many end times suppresses the dependence on the phase of
    fast transients.
    """
    cfg = replace(cfg or IntegratorConfig(), method="adaptive")
    a = evolve_unitary(psi0, h_ref, t_span, cfg, n_samples=n_samples + 1, keep_states=True)
    b = evolve_unitary(psi0, h_test, t_span, cfg, n_samples=n_samples + 1, keep_states=True)
    return np.array([1 - abs(np.vdot(x, y)) ** 2 for x, y in zip(a.states[1:], b.states[1:])])


def closed_form_step1(d: int, alpha: complex, lam1: float, chi: float, tau: float, n1: int, n2: int,
                      weights: Sequence[complex] | None = None) -> np.ndarray:
    """Two-mode state after the first step under the ground-manifold Hamiltonian.

    ``sum_n w_n e^{-i (lam1 + chi) n tau} |n> (|alpha e^{-i chi n tau}> + |-alpha e^{-i chi n tau}>)``
    with ``w_n = 1/sqrt(d)`` by default; the cat factor is unnormalized.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    w = np.full(d, 1 / math.sqrt(d)) if weights is None else np.asarray(weights)
    out = np.zeros((n1, n2), dtype=complex)
    for n in range(d):
        out[n] = w[n] * np.exp(-1j * (lam1 + chi) * n * tau) * cat_fock(alpha, n, -chi * tau, n2, check=False)
    return out.ravel()


def closed_form_step2(state: np.ndarray, lam1t: float, tau: float, n1: int, n2: int) -> np.ndarray:
    """Apply ``exp(+i lam1t n1 tau)`` to each cavity-1 Fock component."""
    ph = np.exp(1j * lam1t * np.arange(n1) * tau)
    return (np.asarray(state).reshape(n1, n2) * ph[:, None]).ravel()


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """``sqrt(<psi|rho|psi>)``; ``rho`` may be a state vector.

    Raises
    ------
    ValueError
        On dimension mismatch or if ``<psi|rho|psi>`` is below ``-1e-12``.
    """
    psi = np.asarray(psi, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {psi.shape}")
    if rho.ndim == 1:
        val = abs(np.vdot(psi, rho)) ** 2
    else:
        val = float(np.real(np.vdot(psi, rho @ psi)))
    if val < -1e-12:
        raise ValueError(f"negative expectation {val:.3g}: rho is not positive")
    return math.sqrt(min(max(val, 0.0), 1.0))


TRAJECTORY_COLUMNS = ("t", "fidelity_to_target", "trace", "qutrit_g_pop", "qutrit_e_pop",
                      "qutrit_f_pop", "cav1_n", "cav2_n")


def write_trajectory(samples: Sequence[dict], path: str | Path, t_offset: float = 0.0) -> None:
    """CSV of sampled observables; ``t`` in microseconds."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in samples:
            vals = []
            for c in TRAJECTORY_COLUMNS:
                v = row.get(c, "")
                if c == "t":
                    v = (v + t_offset) * 1e6
                vals.append(repr(float(v)) if v != "" else "")
            w.writerow(vals)

"""Brute-force checks that do not use the dressed-state coherence formulas.

:func:`fd_eigen_derivative` differentiates the tracked eigenvalue numerically
with respect to one Rabi frequency. :func:`evolve_adiabatic` integrates the
time-dependent Schrodinger equation through an up-and-down coupling ramp and
compares the phase picked up by the initial level with the integral of the
dressed energy along the ramp.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp

from .dressed import (
    DressedState,
    _parts,
    check_bare_nondegenerate,
    continuation,
    degeneracy_tolerance,
    follow,
    rayleigh,
    track_dressed_state,
)
from .exceptions import IntegrationFailure
from .manifold import ManifoldMap, require_closed
from .scheme import LevelScheme, reference_rate

FD_RELATIVE_STEP = 1e-2
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12


def default_fd_step(s: LevelScheme, transition_index: int, gap: float = math.inf) -> float:
    """Step small against the Rabi frequency and against the nearest eigenvalue gap.

    Richardson extrapolation removes the O(step**2) error, so a fairly large
    relative step keeps rounding (about eps * ||H|| / step) negligible.
    """
    base = max(s.transitions[transition_index].rabi, reference_rate(s))
    return FD_RELATIVE_STEP * min(base, gap)


def fd_eigen_derivative(s: LevelScheme, m: ManifoldMap, transition_index: int,
                        step: float = None, dressed: DressedState = None,
                        richardson: bool = True) -> float:
    """Central difference of the dressed eigenvalue in one Rabi frequency.

    Every displaced eigenproblem selects the eigenvector closest to the
    dressed state at the unshifted point, so all samples sit on the same
    branch. With ``richardson`` the central differences at ``step`` and
    ``step/2`` are combined to cancel the O(step**2) error, which matters
    near avoided crossings. The result is in units of hbar, comparable with
    the coherence.
    """
    if dressed is None:
        dressed = track_dressed_state(s, m)
    h0, v, levels, entries = _parts(s, m)
    if transition_index not in entries:
        raise ValueError(f"transition {transition_index + 1} is outside the manifold")
    r, c = entries[transition_index]
    # shift by the unperturbed eigenvalue so rounding scales with the level shift
    h = h0 + v - dressed.eigenvalue * np.eye(len(levels))
    if step is None:
        w = np.linalg.eigvalsh(h)
        others = np.delete(w, np.argmin(np.abs(w)))
        gap = float(np.min(np.abs(others))) if len(others) else math.inf
        step = default_fd_step(s, transition_index, gap)
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    bump = np.zeros_like(h)
    bump[r, c] = bump[c, r] = 0.5
    tol = degeneracy_tolerance(s, m)
    psi0 = np.array([dressed.amplitude(lv) for lv in levels])

    def shifted_eigenvalue(delta):
        hd = h + delta * bump
        w, u = np.linalg.eigh(hd)
        vec, _ = follow(w, u, psi0, tol)
        return rayleigh(hd, vec)

    def central(h):
        return (shifted_eigenvalue(h) - shifted_eigenvalue(-h)) / (2.0 * h)

    if not richardson:
        return central(step)
    return (4.0 * central(0.5 * step) - central(step)) / 3.0


def sin2_envelope(u):
    """Default ramp: rises from 0 to 1 and back as sin^2(pi u)."""
    return math.sin(math.pi * u) ** 2


@dataclass(frozen=True)
class EvolutionResult:
    duration: float
    return_fidelity: float
    accumulated_phase: float
    predicted_phase: float
    winding: int
    max_excited_exposure: float
    max_norm_error: float
    steps: int

    @property
    def phase_error(self) -> float:
        return self.accumulated_phase - self.predicted_phase

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "return_fidelity": self.return_fidelity,
            "accumulated_phase": self.accumulated_phase,
            "predicted_phase": self.predicted_phase,
            "phase_error": self.phase_error,
            "winding": self.winding,
            "max_excited_exposure": self.max_excited_exposure,
            "max_norm_error": self.max_norm_error,
            "steps": self.steps,
        }


class _Branch:
    """Tracked eigenvalue of ``h0 + s*v`` as a function of the coupling scale s."""

    def __init__(self, h0, v, start, tol):
        self.h0, self.v, self.tol = h0, v, tol
        _, _, path = continuation(h0, v, start, tol, step=1e-3)
        self.scales = [p[0] for p in path]
        self.vectors = [p[1] for p in path]

    def __call__(self, s):
        k = max(0, bisect_right(self.scales, s) - 1)
        if k + 1 < len(self.scales) and self.scales[k + 1] - s < s - self.scales[k]:
            k += 1
        h = self.h0 + s * self.v
        w, u = np.linalg.eigh(h)
        vec, _ = follow(w, u, self.vectors[k], self.tol)
        return rayleigh(h, vec)


def evolve_adiabatic(s: LevelScheme, m: ManifoldMap, duration: float, shape=sin2_envelope,
                     rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> EvolutionResult:
    """Integrate i dpsi/dt = H(shape(t/T)) psi from the bare initial level.

    ``shape`` maps [0, 1] to coupling scales in [0, 1] and must vanish at both
    ends so the atom is returned to its bare manifold. Integration is done in
    the frame rotating at the initial level's energy with an adaptive
    8th-order Runge-Kutta scheme; the excited-state exposure is integrated as
    an extra component.

    Raises
    ------
    DegenerateBareState
        The initial level is degenerate at zero coupling.
    IntegrationFailure
        The integrator stopped before the end of the ramp.
    """
    require_closed(m)
    if duration <= 0:
        raise ValueError("duration must be positive")
    if abs(shape(0.0)) > 1e-12 or abs(shape(1.0)) > 1e-12:
        raise ValueError("ramp shape must vanish at both ends")
    tol = check_bare_nondegenerate(s, m)
    h0, v, levels, _ = _parts(s, m)
    n = len(levels)
    init = levels.index(m.initial_level)
    e0 = h0[init, init]
    hs0 = h0 - e0 * np.eye(n)
    decaying = np.array([s.level(lv).gamma > 0 for lv in levels], dtype=float)
    T = float(duration)

    def rhs(t, y):
        h = hs0 + shape(t / T) * v
        re, im = y[:n], y[n:2 * n]
        out = np.empty_like(y)
        out[:n] = h @ im
        out[n:2 * n] = -(h @ re)
        out[-1] = decaying @ (re * re + im * im)
        return out

    y0 = np.zeros(2 * n + 1)
    y0[init] = 1.0
    sol = solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success or sol.t[-1] < T * (1 - 1e-12):
        raise IntegrationFailure(f"integration stopped at t={sol.t[-1]:.6g}: {sol.message}")

    psi = sol.y[:n] + 1j * sol.y[n:2 * n]
    norm_error = float(np.max(np.abs(np.linalg.norm(psi, axis=0) - 1.0)))

    # phase of the tracked dressed component at every accepted step
    scales = np.array([shape(t / T) for t in sol.t])
    evals, evecs = np.linalg.eigh(hs0[None] + scales[:, None, None] * v[None])
    dressed_vec = np.zeros(n)
    dressed_vec[init] = 1.0
    args = np.empty(len(sol.t))
    for k in range(len(sol.t)):
        dressed_vec, _ = follow(evals[k], evecs[k], dressed_vec, tol)
        args[k] = np.angle(dressed_vec @ psi[:, k])
    unwrapped = np.unwrap(args)
    final_amp = psi[init, -1]
    final_arg = float(np.angle(final_amp))
    winding_local = int(round((unwrapped[-1] - final_arg) / (2 * math.pi)))
    accumulated = e0 * T - (final_arg + 2 * math.pi * winding_local)

    start = np.zeros(n)
    start[init] = 1.0
    branch = _Branch(hs0, v, start, tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        integral, _ = quad(lambda u: branch(shape(u)), 0.0, 1.0, limit=500,
                           epsabs=1e-14, epsrel=1e-13)
    predicted = e0 * T + T * integral

    return EvolutionResult(
        duration=T,
        return_fidelity=float(abs(final_amp) ** 2),
        accumulated_phase=float(accumulated),
        predicted_phase=float(predicted),
        winding=int(math.floor(accumulated / (2 * math.pi))),
        max_excited_exposure=float(sol.y[-1, -1]),
        max_norm_error=norm_error,
        steps=len(sol.t),
    )


def _evolve_job(args):
    s, m, duration = args
    return evolve_adiabatic(s, m, duration)


def evolve_many(s: LevelScheme, m: ManifoldMap, durations, workers: int = 1) -> list:
    """Run :func:`evolve_adiabatic` for several durations, optionally in processes.

    Results come back in the order of ``durations``.
    """
    jobs = [(s, m, float(T)) for T in durations]
    if workers <= 1 or len(jobs) <= 1:
        return [_evolve_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_evolve_job, jobs))


def fd_comparison(s: LevelScheme, m: ManifoldMap, dressed: DressedState = None) -> list:
    """Hellmann-Feynman coherence vs finite difference for every transition."""
    if dressed is None:
        dressed = track_dressed_state(s, m)
    rows = []
    for idx in m.reachable_transitions(s):
        t = s.transitions[idx]
        hf = dressed.amplitude(t.lower) * dressed.amplitude(t.upper)
        fd = fd_eigen_derivative(s, m, idx, dressed=dressed)
        rows.append({
            "transition": idx + 1,
            "laser": t.laser,
            "lower": t.lower,
            "upper": t.upper,
            "hellmann_feynman": hf,
            "finite_difference": fd,
            "abs_error": abs(fd - hf),
        })
    return rows

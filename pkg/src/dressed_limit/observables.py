"""Observables of a dressed state and the two-level bound on its SNR.

All quantities follow from the real dressed-state amplitudes psi. For a
transition (L, U) the Hellmann-Feynman derivative of the dressed energy with
respect to its Rabi frequency is ``hbar * psi_L * psi_U``, which is also the
real part of the coherence rho_LU. For laser j, summing over its transitions l
(upper-level decay rate gamma_l, cross-section sigma_j):

    phase_j = -sum_l n sigma_j gamma_l Re(rho_l) / (2 Omega_l)
    SNR_j   = |sum_l (n/2) sqrt(eta A sigma_j gamma_l / B) Re(rho_l)|
    bound_j =  sum_l (n/2) sqrt(eta A sigma_j gamma_l rho_UU,l / B)

and SNR_j <= bound_j because |psi_L| <= 1. The saturation ratio SNR/bound
does not depend on column density, area, bandwidth or efficiency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.constants import hbar

from .dressed import DressedState, TrackingStep, track_dressed_state
from .exceptions import (
    MissingPower,
    MultiTransitionUnsupported,
    PowerConsistencyWarning,
    SingularTerm,
)
from .manifold import ManifoldMap, analyze_manifold
from .scheme import LevelScheme, Transition, cross_section

# amplitudes below this are eigensolver noise, not physics
NOISE_AMPLITUDE = 1e-13


@dataclass(frozen=True)
class TransitionObservables:
    index: int
    transition: Transition
    coherence: float
    lower_population: float
    upper_population: float
    emission_rate: float

    @property
    def hf_derivative(self) -> float:
        """d<H>/dOmega in units of hbar."""
        return self.coherence


@dataclass(frozen=True)
class LaserObservables:
    laser: int
    phase_shift: float
    snr: float
    bound: float
    saturation: Optional[float]


def coherences(d: DressedState, s: LevelScheme) -> list:
    """Coherence and populations of every transition inside the manifold."""
    out = []
    for idx, t in enumerate(s.transitions):
        if t.lower not in d.levels:
            continue
        a_lo, a_up = d.amplitude(t.lower), d.amplitude(t.upper)
        rho_uu = a_up * a_up
        out.append(TransitionObservables(
            index=idx,
            transition=t,
            coherence=a_lo * a_up,
            lower_population=a_lo * a_lo,
            upper_population=rho_uu,
            emission_rate=s.level(t.upper).gamma * rho_uu,
        ))
    return out


def _by_laser(s: LevelScheme, obs) -> dict:
    groups = {ls.id: [] for ls in s.lasers}
    for o in obs:
        groups[o.transition.laser].append(o)
    return groups


def phase_shift(s: LevelScheme, obs) -> dict:
    """Total phase shift in rad imprinted on each laser, keyed by laser id.

    Raises
    ------
    SingularTerm
        A transition with zero Rabi frequency, nonzero decay and a
        non-negligible coherence.
    """
    n = s.context.column_density
    out = {}
    for j, group in _by_laser(s, obs).items():
        sigma = cross_section(s.laser(j))
        total = 0.0
        for o in group:
            gamma = s.level(o.transition.upper).gamma
            if gamma == 0.0:
                continue
            rabi = o.transition.rabi
            if rabi == 0.0:
                if abs(o.coherence) > NOISE_AMPLITUDE:
                    raise SingularTerm(
                        f"transition {o.index + 1} has zero Rabi frequency but "
                        f"coherence {o.coherence:.3e}"
                    )
                continue
            total -= n * sigma * gamma * o.coherence / (2.0 * rabi)
        out[j] = total
    return out


def _prefactor(s: LevelScheme, laser_id: int) -> float:
    ctx = s.context
    sigma = cross_section(s.laser(laser_id))
    return 0.5 * ctx.column_density * math.sqrt(ctx.efficiency * ctx.area * sigma / ctx.bandwidth)


def snr(s: LevelScheme, obs) -> dict:
    """Shot-noise-limited SNR of a phase measurement on each laser."""
    out = {}
    for j, group in _by_laser(s, obs).items():
        signed = sum(math.sqrt(s.level(o.transition.upper).gamma) * o.coherence for o in group)
        out[j] = _prefactor(s, j) * abs(signed)
    return out


def bound(s: LevelScheme, obs) -> dict:
    """Two-level limit on each laser's SNR and the saturation SNR/bound.

    Values are ``(bound, saturation)``; saturation is ``None`` when the bound
    vanishes (no decaying upper state carries resolvable population).
    """
    out = {}
    for j, group in _by_laser(s, obs).items():
        signed = 0.0
        limit = 0.0
        scale = 0.0
        for o in group:
            root_gamma = math.sqrt(s.level(o.transition.upper).gamma)
            signed += root_gamma * o.coherence
            limit += root_gamma * math.sqrt(o.upper_population)
            scale += root_gamma
        b = _prefactor(s, j) * limit
        saturation = None
        if limit > NOISE_AMPLITUDE * scale and limit > 0.0:
            saturation = abs(signed) / limit
        out[j] = (b, saturation)
    return out


def consistent_power(s: LevelScheme, transition_index: int) -> float:
    """Laser power that makes the power-form SNR equal :func:`snr`.

    Solves Omega**2 = sigma * gamma * P / (A * hbar * omega) for P.
    """
    t = s.transitions[transition_index]
    laser = s.laser(t.laser)
    gamma = s.level(t.upper).gamma
    return t.rabi**2 * s.context.area * hbar * laser.angular_frequency / (cross_section(laser) * gamma)


def snr_power_form(s: LevelScheme, phase_shifts: dict, rtol: float = 1e-9) -> dict:
    """SNR from laser power and phase shift, sqrt(eta P / (B hbar omega)) |phase|.

    Only defined for lasers that drive a single transition: the identity with
    :func:`snr` fixes the power through that transition's Rabi frequency. A
    :class:`PowerConsistencyWarning` is issued when the declared power breaks
    that relation by more than ``rtol``.

    Raises
    ------
    MissingPower
        A requested laser has no power.
    MultiTransitionUnsupported
        A requested laser drives more than one transition.
    """
    ctx = s.context
    out = {}
    for j, phi in phase_shifts.items():
        laser = s.laser(j)
        if laser.power is None:
            raise MissingPower(f"laser {j} has no power")
        driven = s.transitions_of(j)
        if len(driven) != 1:
            raise MultiTransitionUnsupported(
                f"laser {j} drives {len(driven)} transitions; the power form needs exactly one"
            )
        t = s.transitions[driven[0]]
        if t.rabi > 0 and s.level(t.upper).gamma > 0:
            expected = consistent_power(s, driven[0])
            if abs(laser.power / expected - 1.0) > rtol:
                warnings.warn(
                    f"laser {j}: power {laser.power:.6e} W differs from "
                    f"{expected:.6e} W implied by its Rabi frequency",
                    PowerConsistencyWarning,
                    stacklevel=2,
                )
        photon_flux = ctx.efficiency * laser.power / (ctx.bandwidth * hbar * laser.angular_frequency)
        out[j] = math.sqrt(photon_flux) * abs(phi)
    return out


def destruction(s: LevelScheme, d: DressedState) -> float:
    """Total spontaneous emission rate per atom, sum of gamma_n * rho_nn, in 1/s."""
    return float(sum(s.level(lv).gamma * d.population(lv) for lv in d.levels))


@dataclass(frozen=True)
class ObservableReport:
    dressed: DressedState
    transitions: tuple
    lasers: tuple
    destruction: float
    populations: dict
    shared_upper: tuple = ()
    unreachable: tuple = ()

    def laser(self, laser_id: int) -> LaserObservables:
        for lo in self.lasers:
            if lo.laser == laser_id:
                return lo
        raise KeyError(laser_id)

    def to_dict(self) -> dict:
        d = self.dressed
        return {
            "dressed_state": {
                "eigenvalue": d.eigenvalue,
                "levels": list(d.levels),
                "eigenvector": [float(x) for x in d.eigenvector],
                "selection": d.selection,
                "min_overlap": d.min_overlap,
                "tracking": [{"scale": st.scale, "overlap": st.overlap} for st in d.tracking],
            },
            "transitions": [
                {
                    "index": o.index + 1,
                    "laser": o.transition.laser,
                    "lower": o.transition.lower,
                    "upper": o.transition.upper,
                    "rabi": o.transition.rabi,
                    "coherence": o.coherence,
                    "lower_population": o.lower_population,
                    "upper_population": o.upper_population,
                    "emission_rate": o.emission_rate,
                    "hf_derivative": o.hf_derivative,
                }
                for o in self.transitions
            ],
            "lasers": [
                {"laser": lo.laser, "phase_shift": lo.phase_shift, "snr": lo.snr,
                 "bound": lo.bound, "saturation": lo.saturation}
                for lo in self.lasers
            ],
            "destruction": self.destruction,
            "populations": {str(k): v for k, v in self.populations.items()},
            "shared_upper_levels": [
                {"level": lv, "transitions": [i + 1 for i in idx]} for lv, idx in self.shared_upper
            ],
            "unreachable_levels": list(self.unreachable),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObservableReport":
        ds = data["dressed_state"]
        dressed = DressedState(
            eigenvalue=ds["eigenvalue"],
            eigenvector=np.asarray(ds["eigenvector"], dtype=float),
            levels=tuple(ds["levels"]),
            selection=ds["selection"],
            tracking=tuple(TrackingStep(st["scale"], st["overlap"]) for st in ds["tracking"]),
        )
        transitions = tuple(
            TransitionObservables(
                index=t["index"] - 1,
                transition=Transition(t["laser"], t["lower"], t["upper"], t["rabi"]),
                coherence=t["coherence"],
                lower_population=t["lower_population"],
                upper_population=t["upper_population"],
                emission_rate=t["emission_rate"],
            )
            for t in data["transitions"]
        )
        lasers = tuple(LaserObservables(**lo) for lo in data["lasers"])
        return cls(
            dressed=dressed,
            transitions=transitions,
            lasers=lasers,
            destruction=data["destruction"],
            populations={int(k): v for k, v in data["populations"].items()},
            shared_upper=tuple((e["level"], tuple(i - 1 for i in e["transitions"]))
                               for e in data["shared_upper_levels"]),
            unreachable=tuple(data["unreachable_levels"]),
        )


def _shared_upper(obs) -> tuple:
    # an upper level counted by several bound terms (same or different lasers)
    users = {}
    for o in obs:
        users.setdefault(o.transition.upper, []).append(o.index)
    return tuple((lv, tuple(idx)) for lv, idx in sorted(users.items()) if len(idx) > 1)


def assemble(s: LevelScheme, d: DressedState, m: Optional[ManifoldMap] = None) -> ObservableReport:
    """Every observable of the scheme for an already selected dressed state."""
    obs = coherences(d, s)
    phases = phase_shift(s, obs)
    snrs = snr(s, obs)
    bounds = bound(s, obs)
    lasers = tuple(
        LaserObservables(j, phases[j], snrs[j], bounds[j][0], bounds[j][1])
        for j in sorted(phases)
    )
    return ObservableReport(
        dressed=d,
        transitions=tuple(obs),
        lasers=lasers,
        destruction=destruction(s, d),
        populations={lv: d.population(lv) for lv in d.levels},
        shared_upper=_shared_upper(obs),
        unreachable=m.unreachable if m is not None else (),
    )


def analyze(s: LevelScheme, rule="overlap", m: Optional[ManifoldMap] = None, **track_kwargs) -> ObservableReport:
    """Go from a scheme to its full report in one call."""
    if m is None:
        m = analyze_manifold(s)
    d = track_dressed_state(s, m, rule, **track_kwargs)
    return assemble(s, d, m)

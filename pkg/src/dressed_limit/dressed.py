"""Manifold Hamiltonian and the dressed state connected to the initial level.

Inside one closed manifold the Hamiltonian (divided by hbar) is the real
symmetric matrix with the level detunings on the diagonal and half the Rabi
frequency of each transition on the (lower, upper) entries. Because Rabi
frequencies are real, eigenvectors are real and coherences need no phase
convention.

Three rules pick the dressed state:

``overlap``
    continuation in a coupling scale ``s`` from 0 (bare levels) to 1, always
    following the eigenvector of maximal overlap with the previous step. This
    is the state an atom reaches by adiabatically switching the lasers on.
``index:k``
    the k-th eigenvector (0-based, ascending eigenvalue) at full coupling.
``min-excited``
    the eigenvector with the least population in decaying levels, ties going
    to the lowest eigenvalue. Used for dark states, where the bare initial
    level is degenerate and adiabatic connection is ill-defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateBareState, TrackingLost
from .manifold import ManifoldMap, require_closed
from .scheme import LevelScheme

OVERLAP_THRESHOLD = 0.9
DEFAULT_STEP = 1e-2
MIN_STEP = 1e-6
DEGENERACY_RTOL = 1e-9
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ManifoldHamiltonian:
    matrix: np.ndarray
    levels: tuple
    entries: dict  # transition index -> (row, col)

    @property
    def dim(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class TrackingStep:
    scale: float
    overlap: float


@dataclass(frozen=True)
class DressedState:
    eigenvalue: float
    eigenvector: np.ndarray
    levels: tuple
    selection: str
    tracking: tuple = ()
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_pos", {lv: i for i, lv in enumerate(self.levels)})

    def amplitude(self, level: int) -> float:
        """Amplitude on a level; zero for levels outside the manifold."""
        i = self._pos.get(level)
        return 0.0 if i is None else float(self.eigenvector[i])

    def population(self, level: int) -> float:
        return self.amplitude(level) ** 2

    @property
    def min_overlap(self) -> float:
        return min((st.overlap for st in self.tracking), default=1.0)


def _parts(s: LevelScheme, m: ManifoldMap):
    """Diagonal and coupling parts of the manifold Hamiltonian, H = H0 + scale * V."""
    require_closed(m)
    levels = m.reachable_levels()
    pos = {lv: i for i, lv in enumerate(levels)}
    h0 = np.diag([s.level(lv).detuning for lv in levels]).astype(float)
    v = np.zeros_like(h0)
    entries = {}
    for idx in m.reachable_transitions(s):
        t = s.transitions[idx]
        r, c = pos[t.lower], pos[t.upper]
        v[r, c] += 0.5 * t.rabi
        v[c, r] += 0.5 * t.rabi
        entries[idx] = (r, c)
    return h0, v, levels, entries


def build_hamiltonian(s: LevelScheme, m: ManifoldMap, scale: float = 1.0) -> ManifoldHamiltonian:
    """H/hbar restricted to the reachable levels, with every Rabi frequency times ``scale``."""
    if not 0.0 <= scale <= 1.0:
        raise ValueError(f"scale must lie in [0, 1], got {scale}")
    h0, v, levels, entries = _parts(s, m)
    return ManifoldHamiltonian(h0 + scale * v, levels, entries)


def degeneracy_tolerance(s: LevelScheme, m: ManifoldMap) -> float:
    """Scale-free threshold below which two eigenvalues count as equal."""
    scales = [abs(s.level(lv).detuning) for lv in m.reachable]
    scales += [s.transitions[i].rabi for i in m.reachable_transitions(s)]
    return DEGENERACY_RTOL * max(scales, default=0.0)


def _clusters(evals, tol):
    """Group ascending eigenvalues whose neighbours differ by at most ``tol``."""
    groups = [[0]]
    for k in range(1, len(evals)):
        if evals[k] - evals[k - 1] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def follow(evals, evecs, prev, tol):
    """Eigenvector of maximal overlap with ``prev``, sign-aligned to it.

    Within a degenerate eigenvalue cluster the best vector is the normalised
    projection of ``prev`` onto the eigenspace, so exact crossings are passed
    without an arbitrary basis choice.
    """
    proj = evecs.T @ prev
    if not np.any(np.diff(evals) <= tol):
        k = int(np.argmax(np.abs(proj)))
        sign = 1.0 if proj[k] >= 0 else -1.0
        return evecs[:, k] * sign, float(abs(proj[k]))
    best, best_overlap = None, -1.0
    for group in _clusters(evals, tol):
        weight = math.sqrt(float(np.sum(proj[group] ** 2)))
        if weight > best_overlap:
            best, best_overlap = group, weight
    if len(best) == 1:
        k = best[0]
        vec = evecs[:, k] * (1.0 if proj[k] >= 0 else -1.0)
    else:
        vec = evecs[:, best] @ proj[best]
        vec = vec / np.linalg.norm(vec)
    return vec, best_overlap


def rayleigh(h, vec) -> float:
    return float(vec @ (h @ vec))


def _continuation_fast(grid, evals, evecs, start, tol, threshold):
    """Batch version of the coarse-grid walk for the common easy case.

    Applies when no grid point has a degenerate cluster and every coarse step
    keeps the overlap above ``threshold``; returns None otherwise. The choices
    are the same as those made by :func:`follow` step by step.
    """
    if np.any(np.diff(evals, axis=1) <= tol):
        return None
    # signed overlaps between consecutive eigenbases: [step, new, old]
    links = np.einsum("kij,kil->kjl", evecs[1:], evecs[:-1])
    proj = evecs[0].T @ start
    k = int(np.argmax(np.abs(proj)))
    chosen, signed = [k], [float(proj[k])]
    for i in range(len(links)):
        col = links[i][:, k]
        k = int(np.argmax(np.abs(col)))
        chosen.append(k)
        signed.append(float(col[k]))
    overlaps = np.abs(signed)
    if np.any(overlaps < threshold):
        return None
    signs = np.cumprod(np.sign(signed))
    records, path = [], [(0.0, start)]
    for i, (k, ov, sg) in enumerate(zip(chosen, overlaps, signs)):
        vec = evecs[i][:, k] * sg
        records.append(TrackingStep(float(grid[i + 1]), float(ov)))
        path.append((float(grid[i + 1]), vec))
    return vec, tuple(records), path


def continuation(h0, v, start, tol, step=DEFAULT_STEP, min_step=MIN_STEP,
                 threshold=OVERLAP_THRESHOLD, stop=1.0):
    """Follow an eigenvector of ``h0 + s*v`` from s=0 to s=``stop``.

    The coarse grid of spacing ``step`` is diagonalised in one batch; any
    interval where the overlap falls below ``threshold`` is bisected until it
    does not, or until the local step drops below ``min_step``.

    Returns the final vector, the tracking record and all accepted
    (scale, vector) pairs.
    """
    n = max(1, math.ceil(stop / step - 1e-12))
    grid = np.linspace(0.0, stop, n + 1)
    evals, evecs = np.linalg.eigh(h0[None, :, :] + grid[1:, None, None] * v[None, :, :])
    vec = np.asarray(start, dtype=float)
    fast = _continuation_fast(grid, evals, evecs, vec, tol, threshold)
    if fast is not None:
        return fast
    records, path = [], [(0.0, vec)]

    def refine(s_lo, s_hi, vec, failed_overlap):
        # bisect [s_lo, s_hi] until every sub-step keeps the overlap up
        half = 0.5 * (s_hi - s_lo)
        if half < min_step:
            raise TrackingLost(s_lo, failed_overlap, half)
        mid = s_lo + half
        for a, b in ((s_lo, mid), (mid, s_hi)):
            w, u = np.linalg.eigh(h0 + b * v)
            cand, o = follow(w, u, vec, tol)
            if o < threshold:
                vec = refine(a, b, vec, o)
            else:
                vec = cand
                records.append(TrackingStep(b, o))
                path.append((b, vec))
        return vec

    for i in range(n):
        cand, ov = follow(evals[i], evecs[i], vec, tol)
        if ov >= threshold:
            vec = cand
            records.append(TrackingStep(float(grid[i + 1]), ov))
            path.append((float(grid[i + 1]), vec))
        else:
            vec = refine(float(grid[i]), float(grid[i + 1]), vec, ov)
    return vec, tuple(records), path


def check_bare_nondegenerate(s: LevelScheme, m: ManifoldMap) -> float:
    """Raise :class:`DegenerateBareState` unless the initial level is isolated.

    Returns the degeneracy tolerance used.
    """
    tol = degeneracy_tolerance(s, m)
    init = m.initial_level
    e0 = s.level(init).detuning
    for lv in sorted(m.reachable):
        if lv == init:
            continue
        gap = abs(s.level(lv).detuning - e0)
        if gap <= tol:
            raise DegenerateBareState(init, lv, gap, tol)
    return tol


def parse_rule(rule) -> tuple:
    """Normalise a selection rule to ``(name, index)``.

    Accepts ``"overlap"``, ``"min-excited"``, ``"index:k"`` or an already
    normalised tuple.
    """
    if isinstance(rule, tuple):
        return rule
    if rule in ("overlap", "min-excited"):
        return (rule, None)
    if isinstance(rule, str) and rule.startswith("index:"):
        try:
            k = int(rule.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad tracking rule {rule!r}") from None
        return ("index", k)
    raise ValueError(f"unknown tracking rule {rule!r}; use overlap, index:k or min-excited")


def _min_excited(h, levels, s: LevelScheme, tol):
    decaying = np.array([s.level(lv).gamma > 0 for lv in levels], dtype=float)
    evals, evecs = np.linalg.eigh(h)
    best = None
    for group in _clusters(evals, tol):
        sub = evecs[:, group]
        # least-excited vector inside a (possibly degenerate) eigenspace
        w, u = np.linalg.eigh(sub.T @ (decaying[:, None] * sub))
        excited = float(w[0])
        if best is None or excited < best[0] - TIE_TOLERANCE:
            best = (excited, sub @ u[:, 0])
    return best[1]


def track_dressed_state(s: LevelScheme, m: ManifoldMap, rule="overlap",
                        step: float = DEFAULT_STEP, min_step: float = MIN_STEP) -> DressedState:
    """Select the dressed state of the manifold at full coupling.

    Raises
    ------
    DegenerateBareState
        ``overlap`` rule with a degenerate bare initial level.
    TrackingLost
        ``overlap`` rule could not keep the overlap above 0.9.
    """
    name, k = parse_rule(rule)
    h0, v, levels, _ = _parts(s, m)
    h = h0 + v
    tol = degeneracy_tolerance(s, m)
    tracking = ()
    if name == "overlap":
        check_bare_nondegenerate(s, m)
        start = np.zeros(len(levels))
        start[levels.index(m.initial_level)] = 1.0
        vec, tracking, _ = continuation(h0, v, start, tol, step, min_step)
        label = "overlap"
    elif name == "index":
        evals, evecs = np.linalg.eigh(h)
        if not -len(levels) <= k < len(levels):
            raise ValueError(f"eigenvector index {k} out of range for dimension {len(levels)}")
        vec = evecs[:, k]
        label = f"index:{k}"
    else:
        vec = _min_excited(h, levels, s, tol)
        label = "min-excited"
    vec = vec / np.linalg.norm(vec)
    return DressedState(rayleigh(h, vec), vec, levels, label, tracking)

"""Parameter scans and derivative-free searches over scheme families.

Free parameters are named after what they change:

``detuning.N``
    detuning of level N (rad/s)
``rabi.J``
    Rabi frequency of the only transition driven by laser J
``rabi.J.L.U``
    Rabi frequency of laser J's transition between levels L and U

The searches are multi-start Nelder-Mead runs in the unit cube of the box
bounds. Every evaluation, including failed ones, lands in the trace, and the
budget counts evaluations exactly. :func:`random_scheme` draws closed schemes
for property tests.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .exceptions import CapExceeded, DressedLimitError
from .manifold import analyze_manifold
from .observables import ObservableReport, _prefactor, analyze
from .scheme import Laser, Level, LevelScheme, MeasurementContext, Transition

DEFAULT_CAP = 100_000
SATURATION_SLACK = 1e-6


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DRESSED_LIMIT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Parameter:
    name: str
    lower: float
    upper: float


def _resolve(scheme: LevelScheme, name: str):
    parts = name.split(".")
    try:
        ids = [int(p) for p in parts[1:]]
    except ValueError:
        raise ValueError(f"bad parameter name {name!r}") from None
    if parts[0] == "detuning" and len(ids) == 1:
        scheme.level(ids[0])
        return ("detuning", ids[0])
    if parts[0] == "rabi" and len(ids) == 1:
        driven = scheme.transitions_of(ids[0])
        if len(driven) != 1:
            raise ValueError(
                f"laser {ids[0]} drives {len(driven)} transitions; name one as rabi.J.L.U"
            )
        return ("rabi", driven[0])
    if parts[0] == "rabi" and len(ids) == 3:
        j, lo, up = ids
        for i, t in enumerate(scheme.transitions):
            if t.laser == j and {t.lower, t.upper} == {lo, up}:
                return ("rabi", i)
        raise ValueError(f"no transition of laser {j} between levels {lo} and {up}")
    raise ValueError(f"bad parameter name {name!r}; use detuning.N, rabi.J or rabi.J.L.U")


@dataclass(frozen=True)
class ParameterSpace:
    """A scheme template with some detunings and Rabi frequencies left free."""

    template: LevelScheme
    parameters: tuple
    _targets: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        targets = []
        for p in self.parameters:
            if not (math.isfinite(p.lower) and math.isfinite(p.upper)) or p.lower >= p.upper:
                raise ValueError(f"{p.name}: need finite bounds with lower < upper")
            try:
                target = _resolve(self.template, p.name)
            except KeyError:
                raise ValueError(f"{p.name}: unknown level") from None
            if target[0] == "rabi" and p.lower < 0:
                raise ValueError(f"{p.name}: Rabi frequencies must stay >= 0")
            targets.append(target)
        if len(set(targets)) != len(targets):
            raise ValueError("a scheme value is named by more than one parameter")
        object.__setattr__(self, "_targets", tuple(targets))
        # closure only depends on topology, so the template decides it
        analyze_manifold(self.template)

    @property
    def names(self) -> tuple:
        return tuple(p.name for p in self.parameters)

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.lower for p in self.parameters])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.upper for p in self.parameters])

    def current(self) -> np.ndarray:
        """Template values of the free parameters, clipped into the box."""
        vals = []
        for kind, key in self._targets:
            if kind == "detuning":
                vals.append(self.template.level(key).detuning)
            else:
                vals.append(self.template.transitions[key].rabi)
        return np.clip(np.array(vals, dtype=float), self.lower, self.upper)

    def apply(self, point) -> LevelScheme:
        levels = {lv.id: lv for lv in self.template.levels}
        transitions = list(self.template.transitions)
        for (kind, key), value in zip(self._targets, point):
            value = float(value)
            if kind == "detuning":
                lv = levels[key]
                levels[key] = Level(lv.id, value, lv.gamma)
            else:
                t = transitions[key]
                transitions[key] = Transition(t.laser, t.lower, t.upper, value)
        return self.template.replace(
            levels=[levels[k] for k in sorted(levels)], transitions=transitions
        )


def evaluate(space: ParameterSpace, point, rule="overlap") -> ObservableReport:
    return analyze(space.apply(point), rule)


# --- scans ------------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    point: tuple
    report: Optional[ObservableReport]
    error: Optional[str] = None


@dataclass(frozen=True)
class ScanTable:
    names: tuple
    laser_ids: tuple
    rows: tuple

    def column(self, kind: str, laser: int = None) -> np.ndarray:
        """One output column as floats; NaN where undefined or failed."""
        out = []
        for row in self.rows:
            r = row.report
            if r is None:
                out.append(math.nan)
            elif kind == "destruction":
                out.append(r.destruction)
            else:
                value = getattr(r.laser(laser), kind)
                out.append(math.nan if value is None else value)
        return np.array(out)

    def header(self) -> list:
        cols = list(self.names)
        for kind in ("snr", "bound", "saturation"):
            cols += [f"{kind}_{j}" for j in self.laser_ids]
        return cols + ["destruction"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for row in self.rows:
            values = list(row.point)
            r = row.report
            for kind in ("snr", "bound", "saturation"):
                for j in self.laser_ids:
                    v = None if r is None else getattr(r.laser(j), kind)
                    values.append(v)
            values.append(None if r is None else r.destruction)
            writer.writerow([format_float(v) for v in values])
        return buf.getvalue()


def format_float(x) -> str:
    """17 significant digits in scientific notation; ``nan`` for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(float(x), ".16e")


def scan(space: ParameterSpace, grid, rule="overlap", cap: int = DEFAULT_CAP,
         threads: int = None) -> ScanTable:
    """Evaluate every point of a regular grid over the box.

    ``grid`` is a points-per-axis count, either one int or one per parameter.
    Rows are ordered with the first parameter varying slowest. Points where
    the dressed state cannot be selected are kept with ``report=None``.

    Raises
    ------
    ValueError
        Fewer than two points on some axis.
    CapExceeded
        The grid has more than ``cap`` points.
    """
    counts = [grid] * len(space.parameters) if isinstance(grid, int) else list(grid)
    if len(counts) != len(space.parameters):
        raise ValueError("need one grid size per parameter")
    if any(n < 2 for n in counts):
        raise ValueError("a scan needs at least 2 points per axis")
    total = math.prod(counts)
    if total > cap:
        raise CapExceeded(f"scan of {total} points exceeds cap {cap}")
    axes = [np.linspace(p.lower, p.upper, n) for p, n in zip(space.parameters, counts)]
    points = [tuple(float(x) for x in pt) for pt in itertools.product(*axes)]

    def run(point):
        try:
            return ScanRow(point, evaluate(space, point, rule))
        except DressedLimitError as exc:
            return ScanRow(point, None, str(exc))

    threads = default_threads() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(p) for p in points]
    laser_ids = tuple(sorted(ls.id for ls in space.template.lasers))
    return ScanTable(space.names, laser_ids, tuple(rows))


# --- searches ---------------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    point: tuple
    snr: tuple
    bound: tuple
    saturation: tuple
    destruction: float
    objective: float
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "snr": list(self.snr),
            "bound": list(self.bound),
            "saturation": list(self.saturation),
            "destruction": self.destruction,
            "objective": self.objective,
            "error": self.error,
        }


@dataclass(frozen=True)
class SearchResult:
    objective: str
    names: tuple
    laser_ids: tuple
    best_point: Optional[tuple]
    best_value: Optional[float]
    evaluations: int
    trace: tuple
    feasible: bool = True
    target_destruction: Optional[float] = None
    tolerance: Optional[float] = None
    reference_snr: Optional[float] = None
    laser: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "parameters": list(self.names),
            "lasers": list(self.laser_ids),
            "laser": self.laser,
            "best_point": None if self.best_point is None else list(self.best_point),
            "best_value": self.best_value,
            "evaluations": self.evaluations,
            "feasible": self.feasible,
            "target_destruction": self.target_destruction,
            "tolerance": self.tolerance,
            "reference_snr": self.reference_snr,
            "trace": [e.to_dict() for e in self.trace],
        }


class _BudgetSpent(Exception):
    pass


class _Recorder:
    """Objective wrapper that evaluates schemes, records the trace, enforces the budget."""

    def __init__(self, space, budget, rule, value_of):
        self.space, self.budget, self.rule = space, budget, rule
        self.value_of = value_of
        self.laser_ids = tuple(sorted(ls.id for ls in space.template.lasers))
        self.trace = []

    def __call__(self, point) -> TraceEntry:
        if len(self.trace) >= self.budget:
            raise _BudgetSpent
        point = tuple(float(x) for x in point)
        try:
            r = evaluate(self.space, point, self.rule)
        except DressedLimitError as exc:
            entry = TraceEntry(point, (), (), (), math.nan, -math.inf, str(exc))
        else:
            lasers = [r.laser(j) for j in self.laser_ids]
            entry = TraceEntry(
                point,
                tuple(lo.snr for lo in lasers),
                tuple(lo.bound for lo in lasers),
                tuple(lo.saturation for lo in lasers),
                r.destruction,
                self.value_of(r),
            )
        self.trace.append(entry)
        return entry


def _initial_simplex(u0):
    d = len(u0)
    simplex = np.tile(u0, (d + 1, 1))
    for i in range(d):
        simplex[i + 1, i] += 0.1 if u0[i] + 0.1 <= 1.0 else -0.1
    return simplex


def _multistart(space, budget, seed, penalized, recorder):
    """Run Nelder-Mead restarts until ``budget`` evaluations are spent.

    ``penalized(entry, restart)`` returns the value to minimise.
    """
    rng = np.random.default_rng(seed)
    lo, hi = space.lower, space.upper
    width = hi - lo
    u0 = (space.current() - lo) / width
    restart = 0
    try:
        while len(recorder.trace) < budget:
            if restart > 0:
                u0 = rng.uniform(0.0, 1.0, size=len(lo))

            def f(u, restart=restart):
                return penalized(recorder(lo + np.clip(u, 0.0, 1.0) * width), restart)

            if len(lo) == 0:
                f(u0)
                continue
            minimize(
                f, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(lo),
                options={"initial_simplex": _initial_simplex(u0), "xatol": 1e-10,
                         "fatol": 1e-14, "maxfev": budget, "maxiter": budget},
            )
            restart += 1
    except _BudgetSpent:
        pass


def _max_saturation(laser):
    def value_of(report):
        sats = [lo.saturation for lo in report.lasers if laser is None or lo.laser == laser]
        sats = [x for x in sats if x is not None]
        return max(sats) if sats else -math.inf
    return value_of


def search_max_saturation(space: ParameterSpace, budget: int, seed: int,
                          rule="overlap", laser: int = None) -> SearchResult:
    """Largest saturation ratio SNR/bound found over the box.

    The objective is the best saturation over all lasers (or over ``laser``
    alone); points with undefined saturation count as minus infinity.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    recorder = _Recorder(space, budget, rule, _max_saturation(laser))

    def penalized(entry, restart):
        return -entry.objective if math.isfinite(entry.objective) else math.inf

    _multistart(space, budget, seed, penalized, recorder)
    trace = tuple(recorder.trace)
    best = max(trace, key=lambda e: e.objective)
    ok = math.isfinite(best.objective)
    return SearchResult(
        objective="saturation",
        names=space.names,
        laser_ids=recorder.laser_ids,
        best_point=best.point if ok else None,
        best_value=best.objective if ok else None,
        evaluations=len(trace),
        trace=trace,
        feasible=ok,
        laser=laser,
    )


def two_level_reference_snr(scheme: LevelScheme, laser: int, destruction: float) -> float:
    """SNR of the saturated two-level limit for the same laser and destruction rate."""
    return _prefactor(scheme, laser) * math.sqrt(destruction)


def search_max_snr_at_fixed_destruction(space: ParameterSpace, target: float, tolerance: float,
                                        budget: int, seed: int, rule="overlap",
                                        laser: int = None) -> SearchResult:
    """Largest SNR on one laser among points with destruction within ``tolerance`` of ``target``.

    The constraint enters as a quadratic penalty in units of the tolerance,
    weighted 1 on the first restart and ten times more on each later one. The
    result is infeasible (``feasible=False``, no best point) when no evaluated
    point meets the constraint.
    """
    if target <= 0:
        raise ValueError("target destruction must be positive")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if laser is None:
        laser = min(ls.id for ls in space.template.lasers)
    reference = two_level_reference_snr(space.template, laser, target)
    laser_ids = tuple(sorted(ls.id for ls in space.template.lasers))
    col = laser_ids.index(laser)

    recorder = _Recorder(space, budget, rule,
                         lambda r: r.laser(laser).snr)

    def penalized(entry, restart):
        if not math.isfinite(entry.objective):
            return math.inf
        miss = (entry.destruction - target) / tolerance
        return -entry.objective / reference + 10.0**restart * miss * miss

    _multistart(space, budget, seed, penalized, recorder)
    trace = tuple(recorder.trace)
    feasible = [e for e in trace
                if e.error is None and abs(e.destruction - target) <= tolerance]
    best = max(feasible, key=lambda e: e.snr[col]) if feasible else None
    return SearchResult(
        objective="snr",
        names=space.names,
        laser_ids=laser_ids,
        best_point=best.point if best else None,
        best_value=best.snr[col] if best else None,
        evaluations=len(trace),
        trace=trace,
        feasible=best is not None,
        target_destruction=target,
        tolerance=tolerance,
        reference_snr=reference,
        laser=laser,
    )


# --- random schemes ---------------------------------------------------------

TOPOLOGIES = ("chain", "lambda", "loop")


def random_scheme(rng: np.random.Generator, topology: str = None, max_levels: int = 6,
                  max_lasers: int = 4, gamma_ref: float = 1.0) -> LevelScheme:
    """Random closed scheme for property tests.

    Detunings are uniform in [-50, 50] gamma_ref and Rabi frequencies
    log-uniform in [1e-2, 1e2] gamma_ref. ``chain`` is a ladder or zig-zag
    with random orientations, ``lambda`` a common upper level coupled to
    several lower levels (lambda, tripod, ...), ``loop`` the four-level
    diamond in which two lasers each drive two transitions, with up to two
    extra levels attached.
    """
    if topology is None:
        topology = TOPOLOGIES[rng.integers(len(TOPOLOGIES))]
    edges = []  # (laser, lower, upper)
    if topology == "chain":
        n = int(rng.integers(2, max_levels + 1))
        m = int(rng.integers(1, min(max_lasers, n - 1) + 1))
        labels = _labels(rng, n - 1, m)
        for k in range(1, n):
            a, b = (k, k + 1) if rng.random() < 0.5 else (k + 1, k)
            edges.append((labels[k - 1], a, b))
    elif topology == "lambda":
        n = int(rng.integers(3, min(max_levels, max_lasers + 1) + 1))
        m = n - 1
        lowers = [1] + list(range(3, n + 1))
        for j, lv in enumerate(lowers, start=1):
            edges.append((j, lv, 2))
    elif topology == "loop":
        n = int(rng.integers(4, max_levels + 1))
        m = int(rng.integers(2, max_lasers + 1))
        a, b = (int(x) for x in rng.permutation(np.arange(1, m + 1))[:2])
        edges += [(a, 1, 2), (a, 3, 4), (b, 1, 3), (b, 2, 4)]
        for lv in range(5, n + 1):
            other = int(rng.integers(1, lv))
            j = int(rng.integers(1, m + 1))
            edges.append((j, other, lv) if rng.random() < 0.5 else (j, lv, other))
    else:
        raise ValueError(f"unknown topology {topology!r}")
    lasers_used = sorted({e[0] for e in edges})
    relabel = {j: i for i, j in enumerate(lasers_used, start=1)}

    levels = []
    for lv in range(1, n + 1):
        gamma = 0.0
        if lv != 1 and rng.random() < 0.8:
            gamma = float(rng.uniform(0.1, 2.0)) * gamma_ref
        levels.append(Level(lv, float(rng.uniform(-50, 50)) * gamma_ref, gamma))
    lasers = [Laser(j, 2 * math.pi / float(rng.uniform(400e-9, 1100e-9)))
              for j in range(1, len(lasers_used) + 1)]
    transitions = [Transition(relabel[j], lo, up,
                              float(10 ** rng.uniform(-2, 2)) * gamma_ref)
                   for j, lo, up in edges]
    context = MeasurementContext(1e13, 1e-8, 1e6, float(rng.uniform(0.1, 1.0)), 1)
    return LevelScheme(levels, lasers, transitions, context)


def _labels(rng, count, m):
    """``count`` laser labels from 1..m using every label at least once."""
    labels = list(range(1, m + 1)) + [int(x) for x in rng.integers(1, m + 1, size=count - m)]
    return [int(x) for x in rng.permutation(labels)]

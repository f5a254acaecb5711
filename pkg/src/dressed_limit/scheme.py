"""Level schemes: domain model, JSON file format and validation.

A scheme lists atomic levels (rotating-frame energy and decay rate), lasers
(wavenumber, optional power), the transitions each laser drives (lower level,
upper level, resonant Rabi frequency) and the measurement context. Internally
all frequencies and rates are in rad/s and 1/s, lengths in metres.

The dipole coupling and mean photon number of each mode are never stored:
they only enter through the Rabi frequency. Rabi frequencies are real and
non-negative; a complex laser phase can always be absorbed into the phase of
a level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from scipy.constants import c as SPEED_OF_LIGHT

from .exceptions import SchemeSyntaxError, SchemeValidationError


@dataclass(frozen=True)
class Level:
    id: int
    detuning: float
    gamma: float = 0.0


@dataclass(frozen=True)
class Laser:
    id: int
    wavenumber: float
    power: Optional[float] = None

    @property
    def angular_frequency(self) -> float:
        return SPEED_OF_LIGHT * self.wavenumber


@dataclass(frozen=True)
class Transition:
    laser: int
    lower: int
    upper: int
    rabi: float


@dataclass(frozen=True)
class MeasurementContext:
    column_density: float
    area: float
    bandwidth: float
    efficiency: float
    initial_level: int = 1


@dataclass(frozen=True)
class LevelScheme:
    levels: tuple
    lasers: tuple
    transitions: tuple
    context: MeasurementContext
    _level_index: dict = field(init=False, repr=False, compare=False)
    _laser_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "lasers", tuple(self.lasers))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "_level_index", {lv.id: lv for lv in self.levels})
        object.__setattr__(self, "_laser_index", {ls.id: ls for ls in self.lasers})

    def level(self, level_id: int) -> Level:
        return self._level_index[level_id]

    def laser(self, laser_id: int) -> Laser:
        return self._laser_index[laser_id]

    def transitions_of(self, laser_id: int) -> list:
        """Indices into ``transitions`` of the transitions driven by a laser."""
        return [i for i, t in enumerate(self.transitions) if t.laser == laser_id]

    def replace(self, *, levels=None, lasers=None, transitions=None, context=None):
        return LevelScheme(
            levels=self.levels if levels is None else levels,
            lasers=self.lasers if lasers is None else lasers,
            transitions=self.transitions if transitions is None else transitions,
            context=self.context if context is None else context,
        )


def cross_section(laser: Laser) -> float:
    """Resonant single-atom cross-section ``6*pi/k**2`` in m^2."""
    return 6.0 * math.pi / laser.wavenumber**2


def reference_rate(scheme: LevelScheme) -> float:
    """Natural frequency scale of a scheme in rad/s.

    The largest decay rate if any level decays, otherwise the largest
    detuning or Rabi frequency, otherwise 1.
    """
    gammas = [lv.gamma for lv in scheme.levels if lv.gamma > 0]
    if gammas:
        return max(gammas)
    scales = [abs(lv.detuning) for lv in scheme.levels]
    scales += [t.rabi for t in scheme.transitions]
    scale = max(scales, default=0.0)
    return scale if scale > 0 else 1.0


# --- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    """One violated invariant: the owning type, its id, the field and the rule."""

    type: str
    ident: object
    field: str
    rule: str
    detail: str = ""

    def __str__(self):
        owner = self.type if self.ident is None else f"{self.type} {self.ident}"
        text = f"{owner}: {self.field}: {self.rule}"
        return f"{text} ({self.detail})" if self.detail else text


def _positive_finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x) and x > 0


def validate_scheme(s: LevelScheme) -> list:
    """Check every scheme invariant; return the list of violations."""
    out = []
    add = out.append

    ids = [lv.id for lv in s.levels]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        add(Diagnostic("LevelScheme", None, "levels", "ids unique and contiguous from 1",
                       f"got {ids}"))
    for lv in s.levels:
        if not math.isfinite(lv.detuning):
            add(Diagnostic("Level", lv.id, "detuning", "finite"))
        if not (math.isfinite(lv.gamma) and lv.gamma >= 0):
            add(Diagnostic("Level", lv.id, "gamma", "gamma >= 0", f"got {lv.gamma}"))

    laser_ids = [ls.id for ls in s.lasers]
    if sorted(laser_ids) != list(range(1, len(laser_ids) + 1)):
        add(Diagnostic("LevelScheme", None, "lasers", "ids unique and contiguous from 1",
                       f"got {laser_ids}"))
    for ls in s.lasers:
        if not _positive_finite(ls.wavenumber):
            add(Diagnostic("Laser", ls.id, "wavenumber", "k > 0", f"got {ls.wavenumber}"))
        if ls.power is not None and not _positive_finite(ls.power):
            add(Diagnostic("Laser", ls.id, "power", "P > 0", f"got {ls.power}"))

    if not s.transitions:
        add(Diagnostic("LevelScheme", None, "transitions", "at least one transition"))
    level_set, laser_set = set(ids), set(laser_ids)
    seen = {}
    for n, t in enumerate(s.transitions, start=1):
        if t.laser not in laser_set:
            add(Diagnostic("Transition", n, "laser", "unknown laser", f"laser {t.laser}"))
        for name in ("lower", "upper"):
            ref = getattr(t, name)
            if ref not in level_set:
                add(Diagnostic("Transition", n, name, "unknown level",
                               f"level {ref} of {len(level_set)}"))
        if t.lower == t.upper:
            add(Diagnostic("Transition", n, "upper", "lower != upper"))
        if not (math.isfinite(t.rabi) and t.rabi >= 0):
            add(Diagnostic("Transition", n, "rabi", "rabi >= 0", f"got {t.rabi}"))
        # the same laser may not couple one level pair twice, in either orientation
        key = (t.laser, frozenset((t.lower, t.upper)))
        if key in seen:
            add(Diagnostic("Transition", n, "laser",
                           "(laser, lower, upper) unique",
                           f"duplicates transition {seen[key]}"))
        else:
            seen[key] = n

    ctx = s.context
    for name in ("column_density", "area", "bandwidth", "efficiency"):
        value = getattr(ctx, name)
        if not _positive_finite(value):
            add(Diagnostic("MeasurementContext", None, name, "> 0", f"got {value}"))
    if _positive_finite(ctx.efficiency) and ctx.efficiency > 1:
        add(Diagnostic("MeasurementContext", None, "efficiency", "efficiency <= 1",
                       f"got {ctx.efficiency}"))
    if ctx.initial_level not in level_set:
        add(Diagnostic("MeasurementContext", None, "initial_level", "unknown level",
                       f"level {ctx.initial_level}"))
    return out


# --- file format ------------------------------------------------------------

_LEVEL_KEYS = ({"id", "detuning"}, {"gamma"})
_LASER_KEYS = ({"id", "wavenumber"}, {"power"})
_TRANSITION_KEYS = ({"laser", "lower", "upper", "rabi"}, set())
_CONTEXT_KEYS = ({"column_density", "area", "bandwidth", "efficiency"}, {"initial_level"})
_UNITS_KEYS = (set(), {"frequency_scale"})
_TOP_KEYS = ({"levels", "lasers", "transitions", "context"}, {"units"})


def _check_keys(obj, keys, where):
    required, optional = keys
    if not isinstance(obj, dict):
        raise SchemeSyntaxError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - required - optional
    if unknown:
        raise SchemeSyntaxError(f"{where}: unknown field {sorted(unknown)[0]!r}")
    missing = required - set(obj)
    if missing:
        raise SchemeSyntaxError(f"{where}: missing field {sorted(missing)[0]!r}")


def _number(obj, key, where, default=None):
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemeSyntaxError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _integer(obj, key, where, default=None):
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemeSyntaxError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def _array(obj, key):
    value = obj[key]
    if not isinstance(value, list):
        raise SchemeSyntaxError(f"{key}: expected an array")
    return value


def scheme_from_dict(data: dict) -> LevelScheme:
    """Build a scheme from decoded JSON, converting units; no invariant checks."""
    _check_keys(data, _TOP_KEYS, "scheme")
    units = data.get("units", {})
    _check_keys(units, _UNITS_KEYS, "units")
    scale = _number(units, "frequency_scale", "units", 1.0)
    if not _positive_finite(scale):
        raise SchemeSyntaxError(f"units.frequency_scale: must be > 0, got {scale}")

    levels = []
    for i, item in enumerate(_array(data, "levels")):
        where = f"levels[{i}]"
        _check_keys(item, _LEVEL_KEYS, where)
        levels.append(Level(
            id=_integer(item, "id", where),
            detuning=_number(item, "detuning", where) * scale,
            gamma=_number(item, "gamma", where, 0.0) * scale,
        ))
    lasers = []
    for i, item in enumerate(_array(data, "lasers")):
        where = f"lasers[{i}]"
        _check_keys(item, _LASER_KEYS, where)
        lasers.append(Laser(
            id=_integer(item, "id", where),
            wavenumber=_number(item, "wavenumber", where),
            power=_number(item, "power", where),
        ))
    transitions = []
    for i, item in enumerate(_array(data, "transitions")):
        where = f"transitions[{i}]"
        _check_keys(item, _TRANSITION_KEYS, where)
        transitions.append(Transition(
            laser=_integer(item, "laser", where),
            lower=_integer(item, "lower", where),
            upper=_integer(item, "upper", where),
            rabi=_number(item, "rabi", where) * scale,
        ))
    ctx = data["context"]
    _check_keys(ctx, _CONTEXT_KEYS, "context")
    context = MeasurementContext(
        column_density=_number(ctx, "column_density", "context"),
        area=_number(ctx, "area", "context"),
        bandwidth=_number(ctx, "bandwidth", "context"),
        efficiency=_number(ctx, "efficiency", "context"),
        initial_level=_integer(ctx, "initial_level", "context", 1),
    )
    return LevelScheme(levels, lasers, transitions, context)


def parse_scheme(text: str) -> LevelScheme:
    """Parse and validate the contents of a scheme file.

    Raises
    ------
    SchemeSyntaxError
        Malformed JSON (with line and column), unknown or missing fields,
        values of the wrong type.
    SchemeValidationError
        Well-formed input that violates a scheme invariant.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemeSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    scheme = scheme_from_dict(data)
    diagnostics = validate_scheme(scheme)
    if diagnostics:
        raise SchemeValidationError(diagnostics)
    return scheme


def load_scheme(path) -> LevelScheme:
    with open(path, encoding="utf-8") as fh:
        return parse_scheme(fh.read())


def scheme_to_dict(s: LevelScheme) -> dict:
    """Inverse of :func:`scheme_from_dict`, always in SI units."""
    lasers = []
    for ls in s.lasers:
        item = {"id": ls.id, "wavenumber": ls.wavenumber}
        if ls.power is not None:
            item["power"] = ls.power
        lasers.append(item)
    return {
        "levels": [{"id": lv.id, "detuning": lv.detuning, "gamma": lv.gamma}
                   for lv in s.levels],
        "lasers": lasers,
        "transitions": [{"laser": t.laser, "lower": t.lower, "upper": t.upper,
                         "rabi": t.rabi} for t in s.transitions],
        "context": {
            "column_density": s.context.column_density,
            "area": s.context.area,
            "bandwidth": s.context.bandwidth,
            "efficiency": s.context.efficiency,
            "initial_level": s.context.initial_level,
        },
    }


def dump_scheme(s: LevelScheme) -> str:
    return json.dumps(scheme_to_dict(s), indent=2)

"""Closed-manifold analysis of the atom-laser coupling graph.

Driving transition (j, L, U) absorbs one photon from laser j, so the photon
offset vector of U is that of L minus one in component j. A scheme is
admissible only if these offsets are consistent around every loop of the
coupling multigraph; otherwise the atom can return to its starting level
with a different photon (momentum) content.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import OpenManifold, UnreachableLevelsWarning
from .scheme import LevelScheme


@dataclass(frozen=True)
class ManifoldMap:
    """Photon offsets ``b`` (lasers x levels) relative to the initial level.

    Rows follow ``laser_ids`` and columns ``level_ids``. Columns of levels
    outside ``reachable`` are zero and carry no meaning. When ``closed`` is
    false, ``b`` holds the offsets of the BFS spanning tree and ``cycle`` the
    first conflicting loop.
    """

    b: np.ndarray
    laser_ids: tuple
    level_ids: tuple
    reachable: frozenset
    closed: bool
    initial_level: int
    cycle: Optional[tuple] = None
    cycle_transitions: Optional[tuple] = None

    def offset(self, laser: int, level: int) -> int:
        return int(self.b[self.laser_ids.index(laser), self.level_ids.index(level)])

    def offsets(self, level: int) -> tuple:
        return tuple(int(x) for x in self.b[:, self.level_ids.index(level)])

    @property
    def unreachable(self) -> tuple:
        return tuple(lv for lv in self.level_ids if lv not in self.reachable)

    def reachable_levels(self) -> tuple:
        """Reachable level ids in ascending order (the dressed-state basis)."""
        return tuple(lv for lv in self.level_ids if lv in self.reachable)

    def reachable_transitions(self, scheme: LevelScheme) -> list:
        return [i for i, t in enumerate(scheme.transitions) if t.lower in self.reachable]


def _tree_path(parent, node):
    path = [node]
    while parent[node] is not None:
        node = parent[node][0]
        path.append(node)
    return path[::-1]


def _witness(parent, u, v, edge):
    """Loop closed by ``edge`` (u -> v) through the BFS tree."""
    pu, pv = _tree_path(parent, u), _tree_path(parent, v)
    k = 0
    while k < min(len(pu), len(pv)) and pu[k] == pv[k]:
        k += 1
    lca = k - 1
    cycle = pu[lca:] + pv[lca:][::-1]
    edges = [parent[n][1] for n in pu[lca + 1:]] + [edge]
    edges += [parent[n][1] for n in pv[lca + 1:]][::-1]
    return tuple(cycle), tuple(edges)


def analyze_manifold(s: LevelScheme, raise_on_open: bool = True) -> ManifoldMap:
    """Assign photon offsets by breadth-first search from the initial level.

    Levels not connected to the initial level are dropped with an
    :class:`UnreachableLevelsWarning`.

    Raises
    ------
    OpenManifold
        If ``raise_on_open`` and some edge implies two different offset
        vectors for one level. The exception carries the first loop found.
    """
    laser_ids = tuple(sorted(ls.id for ls in s.lasers))
    level_ids = tuple(sorted(lv.id for lv in s.levels))
    row = {j: n for n, j in enumerate(laser_ids)}
    n_lasers = len(laser_ids)

    adjacency = {lv: [] for lv in level_ids}
    for idx, t in enumerate(s.transitions):
        step = np.zeros(n_lasers, dtype=np.int64)
        step[row[t.laser]] = -1
        adjacency[t.lower].append((t.upper, step, idx))
        adjacency[t.upper].append((t.lower, -step, idx))

    start = s.context.initial_level
    offsets = {start: np.zeros(n_lasers, dtype=np.int64)}
    parent = {start: None}
    queue = deque([start])
    conflict = None
    while queue:
        u = queue.popleft()
        for v, step, idx in adjacency[u]:
            implied = offsets[u] + step
            if v not in offsets:
                offsets[v] = implied
                parent[v] = (u, idx)
                queue.append(v)
            elif conflict is None and not np.array_equal(offsets[v], implied):
                conflict = _witness(parent, u, v, idx)

    b = np.zeros((n_lasers, len(level_ids)), dtype=np.int64)
    for col, lv in enumerate(level_ids):
        if lv in offsets:
            b[:, col] = offsets[lv]
    m = ManifoldMap(
        b=b,
        laser_ids=laser_ids,
        level_ids=level_ids,
        reachable=frozenset(offsets),
        closed=conflict is None,
        initial_level=start,
        cycle=conflict[0] if conflict else None,
        cycle_transitions=conflict[1] if conflict else None,
    )
    if m.unreachable:
        warnings.warn(
            f"levels {list(m.unreachable)} are not coupled to initial level "
            f"{start} and are ignored",
            UnreachableLevelsWarning,
            stacklevel=2,
        )
    if conflict is not None and raise_on_open:
        raise OpenManifold(conflict[0], conflict[1], manifold=m)
    return m


def require_closed(m: ManifoldMap) -> None:
    if not m.closed:
        raise OpenManifold(m.cycle, m.cycle_transitions, manifold=m)


@dataclass(frozen=True)
class SharedState:
    """A level used by transitions of more than one laser.

    ``roles`` maps each laser id to the roles ("lower", "upper") the level
    plays in that laser's transitions.
    """

    level: int
    lasers: tuple
    roles: dict


def classify_shared_states(s: LevelScheme, m: ManifoldMap) -> list:
    """Levels that are the upper or lower state of several lasers' transitions."""
    require_closed(m)
    roles = {}
    for t in s.transitions:
        if t.lower not in m.reachable:
            continue
        roles.setdefault(t.lower, {}).setdefault(t.laser, set()).add("lower")
        roles.setdefault(t.upper, {}).setdefault(t.laser, set()).add("upper")
    shared = []
    for level in sorted(roles):
        by_laser = roles[level]
        if len(by_laser) > 1:
            shared.append(SharedState(
                level=level,
                lasers=tuple(sorted(by_laser)),
                roles={j: tuple(sorted(r)) for j, r in sorted(by_laser.items())},
            ))
    return shared


def format_offsets(m: ManifoldMap) -> str:
    """Plain-text table of ``b``: one row per laser, one column per level."""
    cols = [str(lv) for lv in m.level_ids]
    width = max(4, *(len(c) for c in cols))
    lines = ["laser\\level " + " ".join(c.rjust(width) for c in cols)]
    for r, j in enumerate(m.laser_ids):
        cells = []
        for col, lv in enumerate(m.level_ids):
            cells.append(str(m.b[r, col]) if lv in m.reachable else "-")
        lines.append(f"{j:>11} " + " ".join(c.rjust(width) for c in cells))
    return "\n".join(lines)

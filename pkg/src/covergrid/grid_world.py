"""Grid world: occupancy truth, shared team knowledge, coverage, sensing.

Coordinate and heading conventions (used everywhere in this package):

    cell            (x, y) = (column, row); row 0 is the top row
    array indexing  arrays are indexed [y, x]
    NORTH = 0       y - 1   (up the screen)
    EAST  = 1       x + 1
    SOUTH = 2       y + 1
    WEST  = 3       x - 1
    LEFT turn       heading - 1 (mod 4)   e.g. EAST -> NORTH
    RIGHT turn      heading + 1 (mod 4)   e.g. EAST -> SOUTH

Actions:

    STRAIGHT = 0    advance one cell along the current heading
    LEFT     = 1    rotate 90 deg left, then attempt a one-cell advance
    RIGHT    = 2    rotate 90 deg right, then attempt a one-cell advance

A blocked advance never cancels the rotation: turns are instantaneous and
free, only the translation can fail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

# Truth cell states
FREE = 0
OBSTACLE = 1

# Known (team belief) cell states
UNKNOWN = 0
KNOWN_FREE = 1
KNOWN_OBSTACLE = 2

# Headings
NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
HEADING_NAMES = ("N", "E", "S", "W")
DX = (0, 1, 0, -1)
DY = (-1, 0, 1, 0)

# Actions
STRAIGHT, LEFT, RIGHT = 0, 1, 2
ACTION_NAMES = ("S", "L", "R")
ACTIONS = (STRAIGHT, LEFT, RIGHT)

DEFAULT_CELL_SIZE = 0.5


def turn(heading: int, action: int) -> int:
    """Heading after applying an action's rotation (STRAIGHT keeps it)."""
    if action == LEFT:
        return (heading - 1) % 4
    if action == RIGHT:
        return (heading + 1) % 4
    return heading


@dataclass(frozen=True)
class RobotState:
    """Cell position plus heading; the node payload of the search trees."""

    x: int
    y: int
    heading: int

    @property
    def pos(self) -> tuple[int, int]:
        return (self.x, self.y)


class GridMap:
    """Shared world: per-cell truth, team knowledge, and covered set.

    ``truth`` is read-only after construction; ``known`` and ``covered``
    are mutated by the simulation engine only (planners get copies).
    """

    def __init__(self, truth: np.ndarray, cell_size: float = DEFAULT_CELL_SIZE):
        truth = np.ascontiguousarray(truth, dtype=np.uint8)
        if truth.ndim != 2:
            raise ValueError("truth grid must be 2-D")
        self.truth = truth
        self.truth.setflags(write=False)
        self.height, self.width = truth.shape
        self.cell_size = float(cell_size)
        self.known = np.zeros_like(truth, dtype=np.uint8)  # UNKNOWN
        self.covered = np.zeros_like(truth, dtype=bool)

    # -- basic queries ---------------------------------------------------

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and self.truth[y, x] == FREE

    def free_count(self) -> int:
        return int(np.count_nonzero(self.truth == FREE))

    def covered_count(self) -> int:
        return int(np.count_nonzero(self.covered))

    # -- coverage --------------------------------------------------------

    def mark_covered(self, x: int, y: int) -> None:
        """Mark a free cell covered. Idempotent. Marking an obstacle is a
        contract violation (it means the motion model let a robot enter one).
        """
        if not self.in_bounds(x, y) or self.truth[y, x] != FREE:
            raise ValueError(f"mark_covered on non-free cell ({x}, {y})")
        self.covered[y, x] = True

    # -- knowledge -------------------------------------------------------

    def reveal(self, x: int, y: int) -> None:
        self.known[y, x] = KNOWN_OBSTACLE if self.truth[y, x] == OBSTACLE else KNOWN_FREE

    def known_count(self) -> int:
        return int(np.count_nonzero(self.known != UNKNOWN))

    # -- copies ----------------------------------------------------------

    def snapshot_known(self) -> np.ndarray:
        out = self.known.copy()
        out.setflags(write=False)
        return out

    def snapshot_covered(self) -> np.ndarray:
        out = self.covered.copy()
        out.setflags(write=False)
        return out

    # -- file format -----------------------------------------------------

    def to_text(self) -> str:
        """Serialize: header line "W H", then one row per line of . / #."""
        lines = [f"{self.width} {self.height}"]
        for y in range(self.height):
            lines.append("".join("#" if self.truth[y, x] == OBSTACLE else "." for x in range(self.width)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, cell_size: float = DEFAULT_CELL_SIZE) -> "GridMap":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty map file")
        try:
            w, h = (int(tok) for tok in lines[0].split())
        except Exception as exc:
            raise ValueError(f"bad map header {lines[0]!r}") from exc
        if len(lines) < 1 + h:
            raise ValueError("map file truncated")
        truth = np.zeros((h, w), dtype=np.uint8)
        for y in range(h):
            row = lines[1 + y]
            if len(row) != w:
                raise ValueError(f"map row {y} has length {len(row)}, expected {w}")
            for x, ch in enumerate(row):
                if ch == "#":
                    truth[y, x] = OBSTACLE
                elif ch != ".":
                    raise ValueError(f"bad map character {ch!r} at ({x}, {y})")
        return cls(truth, cell_size=cell_size)

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path, cell_size: float = DEFAULT_CELL_SIZE) -> "GridMap":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_text(fh.read(), cell_size=cell_size)


def apply_action(
    state: RobotState,
    action: int,
    width: int,
    height: int,
    blocked: Callable[[int, int], bool],
) -> tuple[RobotState, bool]:
    """Rotate per the action, then advance one cell unless the target is out
    of bounds or blocked. Returns (new state, moved).

    The rotation commits even when the advance fails.
    """
    h = turn(state.heading, action)
    tx, ty = state.x + DX[h], state.y + DY[h]
    if 0 <= tx < width and 0 <= ty < height and not blocked(tx, ty):
        return RobotState(tx, ty, h), True
    return RobotState(state.x, state.y, h), False


# -- line of sight -------------------------------------------------------


def supercover_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Cells whose interior the segment between the two cell centers crosses,
    in traversal order (both endpoints included).

    Exact corner crossings step diagonally: when the segment passes through
    a lattice corner it touches the two side cells only at a point, which
    does not count as crossing their interior. Integer arithmetic only, so
    the traversal is symmetric under endpoint swap.
    """
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    x, y = x0, y0
    cells = [(x, y)]
    ix = iy = 0
    while ix < nx or iy < ny:
        # Compare the segment parameter of the next vertical grid line
        # crossing, (ix + 0.5) / nx, with the next horizontal one.
        if iy >= ny:
            decision = -1
        elif ix >= nx:
            decision = 1
        else:
            decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:  # exact corner: diagonal step
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif decision < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


_VIS_CACHE: dict[int, list[tuple[int, int, tuple[tuple[int, int], ...]]]] = {}


def _visibility_offsets(radius_sq_scaled: int):
    """Precomputed (dx, dy, blocking-prefix offsets) for every offset whose
    center distance satisfies dx^2 + dy^2 <= r^2 (r in cell units, the key is
    r^2 scaled by 2^20 and truncated)."""
    entry = _VIS_CACHE.get(radius_sq_scaled)
    if entry is None:
        r = int(np.floor(np.sqrt(radius_sq_scaled / float(1 << 20)))) + 1
        entry = []
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if (dx * dx + dy * dy) * (1 << 20) > radius_sq_scaled:
                    continue
                path = supercover_line(0, 0, dx, dy)
                entry.append((dx, dy, tuple(path[1:-1])))
        _VIS_CACHE[radius_sq_scaled] = entry
    return entry


def sense(gmap: GridMap, observer: tuple[int, int], range_m: float) -> set[tuple[int, int, int]]:
    """Reveal every cell within line of sight and sensor range.

    A cell is visible when its center lies within ``range_m`` of the
    observer's center (Euclidean, cell centers) and the supercover ray
    between the two centers crosses no obstacle interior before reaching it;
    the first obstacle on a ray is itself visible. Observations are merged
    into ``gmap.known`` and returned as (x, y, truth-state) triples.
    """
    ox, oy = observer
    if gmap.truth[oy, ox] != FREE:
        raise ValueError("observer must stand on a free cell")
    radius_cells_sq = (range_m / gmap.cell_size) ** 2
    key = int(radius_cells_sq * (1 << 20))
    out: set[tuple[int, int, int]] = set()
    truth = gmap.truth
    w, h = gmap.width, gmap.height
    for dx, dy, prefix in _visibility_offsets(key):
        x, y = ox + dx, oy + dy
        if not (0 <= x < w and 0 <= y < h):
            continue
        visible = True
        for px, py in prefix:
            if truth[oy + py, ox + px] == OBSTACLE:
                visible = False
                break
        if visible:
            state = int(truth[y, x])
            out.add((x, y, state))
            gmap.known[y, x] = KNOWN_OBSTACLE if state == OBSTACLE else KNOWN_FREE
    return out


def reachable_free_cells(gmap: GridMap, seeds: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    """4-connected flood fill over free truth cells from the seed cells."""
    seen: set[tuple[int, int]] = set()
    stack = []
    for sx, sy in seeds:
        if gmap.truth[sy, sx] != FREE:
            raise ValueError(f"seed ({sx}, {sy}) is not free")
        if (sx, sy) not in seen:
            seen.add((sx, sy))
            stack.append((sx, sy))
    w, h = gmap.width, gmap.height
    truth = gmap.truth
    while stack:
        x, y = stack.pop()
        for d in range(4):
            nx, ny = x + DX[d], y + DY[d]
            if 0 <= nx < w and 0 <= ny < h and truth[ny, nx] == FREE and (nx, ny) not in seen:
                seen.add((nx, ny))
                stack.append((nx, ny))
    return seen

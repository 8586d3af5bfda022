import numpy as np
import pytest

from covergrid.grid_world import (
    EAST,
    FREE,
    KNOWN_FREE,
    KNOWN_OBSTACLE,
    LEFT,
    NORTH,
    OBSTACLE,
    RIGHT,
    SOUTH,
    STRAIGHT,
    UNKNOWN,
    WEST,
    GridMap,
    RobotState,
    apply_action,
    reachable_free_cells,
    sense,
    supercover_line,
    turn,
)
from covergrid.rng import SplitMix64


def empty_map(w=20, h=20):
    return GridMap(np.zeros((h, w), dtype=np.uint8))


def map_with_obstacles(w, h, cells):
    truth = np.zeros((h, w), dtype=np.uint8)
    for x, y in cells:
        truth[y, x] = OBSTACLE
    return GridMap(truth)


# -- heading table -------------------------------------------------------


@pytest.mark.parametrize(
    "heading,action,expected",
    [
        (EAST, LEFT, NORTH),
        (EAST, RIGHT, SOUTH),
        (NORTH, LEFT, WEST),
        (NORTH, RIGHT, EAST),
        (SOUTH, LEFT, EAST),
        (WEST, RIGHT, NORTH),
        (WEST, STRAIGHT, WEST),
    ],
)
def test_turn_table(heading, action, expected):
    assert turn(heading, action) == expected


# -- apply_action --------------------------------------------------------


def never(x, y):
    return False


def test_apply_action_free_advance():
    state, moved = apply_action(RobotState(5, 5, EAST), STRAIGHT, 20, 20, never)
    assert (state, moved) == (RobotState(6, 5, EAST), True)


def test_apply_action_blocked_turn_commits_rotation():
    # LEFT from EAST faces NORTH (row 0 at top); target (5, 4) blocked.
    blocked = lambda x, y: (x, y) == (5, 4)
    state, moved = apply_action(RobotState(5, 5, EAST), LEFT, 20, 20, blocked)
    assert (state, moved) == (RobotState(5, 5, NORTH), False)


def test_apply_action_out_of_bounds_blocked():
    state, moved = apply_action(RobotState(0, 5, WEST), STRAIGHT, 20, 20, never)
    assert (state, moved) == (RobotState(0, 5, WEST), False)


def test_motion_safety_random_walk():
    # Against truth obstacles, the robot can never end on an obstacle.
    gmap = map_with_obstacles(12, 12, [(3, 3), (4, 3), (7, 8), (5, 5)])
    blocked = lambda x, y: gmap.truth[y, x] == OBSTACLE
    rng = SplitMix64(99)
    state = RobotState(0, 0, SOUTH)
    for _ in range(500):
        state, _ = apply_action(state, rng.randrange(3), 12, 12, blocked)
        assert gmap.truth[state.y, state.x] == FREE


# -- supercover ----------------------------------------------------------


def test_supercover_axis_and_diagonal():
    assert supercover_line(0, 0, 3, 0) == [(0, 0), (1, 0), (2, 0), (3, 0)]
    # Perfect diagonal passes through lattice corners: diagonal steps only.
    assert supercover_line(0, 0, 2, 2) == [(0, 0), (1, 1), (2, 2)]


def test_supercover_symmetry():
    rng = SplitMix64(3)
    for _ in range(200):
        x0, y0, x1, y1 = (rng.randrange(9) - 4 for _ in range(4))
        fwd = supercover_line(0, 0, x1 - x0, y1 - y0)
        rev = supercover_line(x1 - x0, y1 - y0, 0, 0)
        assert set(fwd) == set(rev)


def test_supercover_crosses_interior_cells():
    # 1-over-2 line enters the side cell whose interior it crosses.
    cells = set(supercover_line(0, 0, 1, 2))
    assert cells == {(0, 0), (0, 1), (1, 1), (1, 2)}


# -- sense ---------------------------------------------------------------


def disk_offsets(radius_cells):
    r = int(radius_cells) + 1
    return {
        (dx, dy)
        for dx in range(-r, r + 1)
        for dy in range(-r, r + 1)
        if dx * dx + dy * dy <= radius_cells * radius_cells
    }


def test_sense_empty_map_counts_49():
    # Independent oracle: lattice points with dx^2 + dy^2 <= 16.
    assert len(disk_offsets(4.0)) == 49
    gmap = empty_map()
    seen = sense(gmap, (10, 10), 2.0)
    assert len(seen) == 49
    assert {(x - 10, y - 10) for x, y, _ in seen} == disk_offsets(4.0)
    assert all(state == FREE for _, _, state in seen)


def test_sense_occlusion_behind_adjacent_obstacle():
    gmap = map_with_obstacles(20, 20, [(11, 10)])
    seen = sense(gmap, (10, 10), 2.0)
    states = {(x, y): s for x, y, s in seen}
    assert states[(11, 10)] == OBSTACLE  # the wall itself is visible
    assert (12, 10) not in states  # directly behind it is not
    assert gmap.known[10, 11] == KNOWN_OBSTACLE
    assert gmap.known[10, 12] == UNKNOWN


def test_sense_range_zero_reveals_only_observer():
    gmap = empty_map()
    seen = sense(gmap, (4, 7), 0.0)
    assert seen == {(4, 7, FREE)}


def test_sense_soundness_and_merge():
    gmap = map_with_obstacles(20, 20, [(6, 5), (5, 6), (8, 8)])
    seen = sense(gmap, (5, 5), 2.0)
    for x, y, state in seen:
        assert state == gmap.truth[y, x]
        expect = KNOWN_OBSTACLE if state == OBSTACLE else KNOWN_FREE
        assert gmap.known[y, x] == expect


def test_sense_symmetry_between_free_cells():
    rng = SplitMix64(17)
    for trial in range(30):
        cells = [(rng.randrange(10), rng.randrange(10)) for _ in range(12)]
        gmap = map_with_obstacles(10, 10, cells)
        frees = [(x, y) for y in range(10) for x in range(10) if gmap.truth[y, x] == FREE]
        a = frees[rng.randrange(len(frees))]
        b = frees[rng.randrange(len(frees))]
        seen_a = {(x, y) for x, y, _ in sense(gmap, a, 2.0)}
        seen_b = {(x, y) for x, y, _ in sense(gmap, b, 2.0)}
        assert (b in seen_a) == (a in seen_b)


def test_sense_observer_on_obstacle_rejected():
    gmap = map_with_obstacles(10, 10, [(3, 3)])
    with pytest.raises(ValueError):
        sense(gmap, (3, 3), 2.0)


# -- mark_covered --------------------------------------------------------


def test_mark_covered_idempotent():
    gmap = empty_map(5, 5)
    gmap.mark_covered(3, 3)
    assert gmap.covered_count() == 1
    gmap.mark_covered(3, 3)
    assert gmap.covered_count() == 1


def test_mark_covered_obstacle_is_violation():
    gmap = map_with_obstacles(5, 5, [(2, 2)])
    with pytest.raises(ValueError):
        gmap.mark_covered(2, 2)


def test_mark_all_free_cells():
    gmap = map_with_obstacles(5, 5, [(2, 2)])
    for y in range(5):
        for x in range(5):
            if gmap.truth[y, x] == FREE:
                gmap.mark_covered(x, y)
    assert gmap.covered_count() == gmap.free_count()


# -- reachable_free_cells ------------------------------------------------


def test_reachable_empty_map():
    gmap = empty_map()
    assert len(reachable_free_cells(gmap, [(0, 0)])) == 400


def test_reachable_bisected_map():
    wall = [(10, y) for y in range(20)]
    gmap = map_with_obstacles(20, 20, wall)
    left = reachable_free_cells(gmap, [(0, 0)])
    assert left == {(x, y) for x in range(10) for y in range(20)}


def test_reachable_rejects_obstacle_seed():
    gmap = map_with_obstacles(5, 5, [(1, 1)])
    with pytest.raises(ValueError):
        reachable_free_cells(gmap, [(1, 1)])


# -- map file format -----------------------------------------------------


def test_map_roundtrip_bit_exact():
    rng = SplitMix64(8)
    for _ in range(20):
        truth = np.zeros((7, 9), dtype=np.uint8)
        for _ in range(12):
            truth[rng.randrange(7), rng.randrange(9)] = OBSTACLE
        gmap = GridMap(truth)
        text = gmap.to_text()
        again = GridMap.from_text(text)
        assert again.to_text() == text
        assert np.array_equal(again.truth, gmap.truth)


def test_map_text_layout():
    gmap = map_with_obstacles(3, 2, [(1, 0)])
    assert gmap.to_text() == "3 2\n.#.\n...\n"


def test_truth_is_readonly():
    gmap = empty_map(4, 4)
    with pytest.raises(ValueError):
        gmap.truth[0, 0] = OBSTACLE

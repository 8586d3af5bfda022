"""Random obstacle map generation with enclosed-pocket removal.

Density is defined over interior cells (the border ring never holds an
obstacle), so a 20x20 map at density 0.10 samples round(0.10 * 18 * 18) = 32
obstacle cells. After sampling, every free region that is not 4-connected to
the largest free component is filled in, which guarantees a single free
component on every generated map.

Sampling is a partial Fisher-Yates shuffle over interior cells in row-major
order, driven by the splitmix64 stream of the config seed; identical configs
produce byte-identical maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid_world import DEFAULT_CELL_SIZE, FREE, OBSTACLE, GridMap
from .rng import SplitMix64

PAPER_DENSITIES = (0.05, 0.10, 0.15, 0.20)


@dataclass(frozen=True)
class MapGenConfig:
    width: int = 20
    height: int = 20
    density: float = 0.10
    seed: int = 0
    cell_size: float = DEFAULT_CELL_SIZE

    def validate(self) -> None:
        if self.width < 3 or self.height < 3:
            raise ValueError("map must be at least 3x3")
        if not (0.0 <= self.density < 1.0):
            raise ValueError("density must be in [0, 1)")


def interior_cells(width: int, height: int) -> list[tuple[int, int]]:
    """Interior cells in row-major order (everything off the border ring)."""
    return [(x, y) for y in range(1, height - 1) for x in range(1, width - 1)]


def sample_obstacles(cfg: MapGenConfig) -> list[tuple[int, int]]:
    """The seeded obstacle sample before pocket filling.

    Exactly round-half-up(density * interior cell count) cells, drawn
    without replacement.
    """
    cfg.validate()
    cells = interior_cells(cfg.width, cfg.height)
    n = int(math.floor(cfg.density * len(cells) + 0.5))
    rng = SplitMix64(cfg.seed)
    return rng.shuffle_prefix(cells, n)


def fill_enclosed(truth: np.ndarray) -> int:
    """Convert free cells outside the largest free component to obstacles.

    Returns the number of filled cells. Component tie-break: the component
    containing the earliest cell in row-major scan order wins among equals.
    """
    h, w = truth.shape
    labels = np.full((h, w), -1, dtype=np.int32)
    sizes: list[int] = []
    for sy in range(h):
        for sx in range(w):
            if truth[sy, sx] != FREE or labels[sy, sx] != -1:
                continue
            label = len(sizes)
            stack = [(sx, sy)]
            labels[sy, sx] = label
            count = 0
            while stack:
                x, y = stack.pop()
                count += 1
                for nx, ny in ((x, y - 1), (x + 1, y), (x, y + 1), (x - 1, y)):
                    if 0 <= nx < w and 0 <= ny < h and truth[ny, nx] == FREE and labels[ny, nx] == -1:
                        labels[ny, nx] = label
                        stack.append((nx, ny))
            sizes.append(count)
    if not sizes:
        raise ValueError("map has no free cells")
    keep = max(range(len(sizes)), key=lambda i: (sizes[i], -i))
    fill_mask = (truth == FREE) & (labels != keep)
    truth[fill_mask] = OBSTACLE
    return int(np.count_nonzero(fill_mask))


def generate(cfg: MapGenConfig) -> GridMap:
    """Generate one map: seeded interior sample, then pocket fill."""
    cfg.validate()
    truth = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
    for x, y in sample_obstacles(cfg):
        truth[y, x] = OBSTACLE
    fill_enclosed(truth)
    # The border ring is never sampled and always connects to the kept
    # component, so it must survive the fill.
    if truth[0, :].any() or truth[-1, :].any() or truth[:, 0].any() or truth[:, -1].any():
        raise AssertionError("border cell became an obstacle during fill")
    return GridMap(truth, cell_size=cfg.cell_size)


def generate_with_info(cfg: MapGenConfig) -> tuple[GridMap, dict]:
    """Generate plus the bookkeeping a manifest wants."""
    sampled = len(sample_obstacles(cfg))
    gmap = generate(cfg)
    final = int(np.count_nonzero(gmap.truth == OBSTACLE))
    info = {
        "width": cfg.width,
        "height": cfg.height,
        "density": cfg.density,
        "seed": cfg.seed,
        "obstacles_sampled": sampled,
        "obstacles_filled": final - sampled,
        "obstacles_final": final,
    }
    return gmap, info

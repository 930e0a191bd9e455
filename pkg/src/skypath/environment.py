"""Physical scene model: square region, ground base stations, cuboid obstacles.

All geometry is metric.  The region is a [0, L] x [0, L] square discretized
into a D x D grid of cells with spacing ``granularity_m``; grid indices are
1-based and cell (i, j) is centered at ((i - 1/2) * delta, (j - 1/2) * delta).
Obstacles are axis-aligned cuboids standing on the ground; line-of-sight
between a base station antenna and a flying receiver is blocked when the
open segment between them passes through any cuboid interior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

ENV_SCHEMA_VERSION = 1

# Rejection-sampling cap for truncated Rayleigh height draws; after this many
# tries the draw is clamped to the truncation bound.
_MAX_HEIGHT_DRAWS = 1_000_000


@dataclass(frozen=True)
class Region:
    """Square planning region with grid spacing and the fixed flight altitude."""

    edge_length_m: float
    granularity_m: float
    altitude_m: float

    def __post_init__(self):
        if self.edge_length_m <= 0 or self.granularity_m <= 0 or self.altitude_m <= 0:
            raise ConfigurationError("region dimensions must be positive")
        d = self.edge_length_m / self.granularity_m
        if abs(d - round(d)) > 1e-9 or round(d) < 2:
            raise ConfigurationError(
                f"edge length {self.edge_length_m} must be an integer multiple "
                f">= 2 of the granularity {self.granularity_m}"
            )

    @property
    def grid_size(self) -> int:
        """Number of cells per side (D)."""
        return int(round(self.edge_length_m / self.granularity_m))


@dataclass(frozen=True)
class Gbs:
    """Ground base station with a 1-based id and a fixed antenna position."""

    id: int
    position: tuple[float, float, float]  # (x, y, antenna height), meters


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned cuboid standing on the ground.

    The footprint is centered at (center_x, center_y) with the given side
    lengths; the solid spans z in [0, height_m].
    """

    center_x: float
    center_y: float
    length_m: float
    width_m: float
    height_m: float

    @property
    def bounds(self) -> tuple[float, float, float, float, float, float]:
        """(xmin, xmax, ymin, ymax, zmin, zmax)."""
        hx, hy = self.length_m / 2.0, self.width_m / 2.0
        return (
            self.center_x - hx,
            self.center_x + hx,
            self.center_y - hy,
            self.center_y + hy,
            0.0,
            self.height_m,
        )


@dataclass(frozen=True)
class Environment:
    """Immutable scene: region, base stations, obstacles, and the generating seed.

    All queries are pure, so a single instance can be shared across threads.
    """

    region: Region
    gbss: tuple[Gbs, ...]
    obstacles: tuple[Obstacle, ...]
    seed: int
    # Allowed overshoot of GBS positions past the region footprint, meters.
    gbs_margin_m: float = 0.0

    def __post_init__(self):
        if not self.gbss:
            raise ConfigurationError("environment needs at least one GBS")
        ids = sorted(g.id for g in self.gbss)
        if ids != list(range(1, len(self.gbss) + 1)):
            raise ConfigurationError("GBS ids must be 1..M with no gaps")
        heights = {g.position[2] for g in self.gbss}
        if len(heights) != 1:
            raise ConfigurationError("all GBSs must share one antenna height")
        lo, hi = -self.gbs_margin_m, self.region.edge_length_m + self.gbs_margin_m
        for g in self.gbss:
            if not (lo <= g.position[0] <= hi and lo <= g.position[1] <= hi):
                raise ConfigurationError(f"GBS {g.id} lies outside the region footprint")
        for k, ob in enumerate(self.obstacles):
            if ob.height_m > self.region.altitude_m:
                raise ConfigurationError(
                    f"obstacle {k} is taller ({ob.height_m} m) than the flight altitude"
                )
            xmin, xmax, ymin, ymax, _, _ = ob.bounds
            if xmax < 0 or xmin > self.region.edge_length_m or ymax < 0 or ymin > self.region.edge_length_m:
                raise ConfigurationError(f"obstacle {k} does not intersect the region")

    # Cached obstacle bounds as a (K, 6) array for the vectorized LoS test.
    def _bounds_array(self) -> np.ndarray:
        cached = getattr(self, "_bounds_cache", None)
        if cached is None:
            if self.obstacles:
                cached = np.array([ob.bounds for ob in self.obstacles], dtype=np.float64)
            else:
                cached = np.zeros((0, 6), dtype=np.float64)
            object.__setattr__(self, "_bounds_cache", cached)
        return cached


@dataclass(frozen=True)
class EnvConfig:
    """Scenario-generation parameters."""

    edge_length_m: float
    granularity_m: float
    altitude_m: float
    gbs_count: int
    gbs_height_m: float
    obstacle_count: int = 0
    obstacle_side_range_m: tuple[float, float] = (50.0, 70.0)
    obstacle_height_mean_m: float = 40.0

    def __post_init__(self):
        if self.gbs_count < 1:
            raise ConfigurationError("gbs_count must be >= 1")
        if self.obstacle_count < 0:
            raise ConfigurationError("obstacle_count must be >= 0")
        lo, hi = self.obstacle_side_range_m
        if not (0 < lo <= hi):
            raise ConfigurationError("obstacle side range must satisfy 0 < low <= high")
        if self.obstacle_height_mean_m <= 0 or self.gbs_height_m <= 0:
            raise ConfigurationError("heights must be positive")


def generate_environment(config: EnvConfig, seed: int) -> Environment:
    """Draw a random scene from ``config``, reproducibly for a fixed seed.

    GBS positions are uniform over the region at the shared antenna height.
    Obstacle footprints are squares with side uniform in the configured range
    and centers uniform over the region; heights follow a Rayleigh law with
    the configured mean, truncated to the flight altitude by rejection
    (clamped after ``_MAX_HEIGHT_DRAWS`` tries).  The draw order below is part
    of the determinism contract: GBSs first, then per obstacle
    side -> center -> height.
    """
    region = Region(config.edge_length_m, config.granularity_m, config.altitude_m)
    rng = np.random.default_rng(seed)
    L = config.edge_length_m

    gbss = []
    for m in range(1, config.gbs_count + 1):
        x = rng.uniform(0.0, L)
        y = rng.uniform(0.0, L)
        gbss.append(Gbs(id=m, position=(x, y, config.gbs_height_m)))

    # Rayleigh scale from mean: E[X] = scale * sqrt(pi / 2).
    scale = config.obstacle_height_mean_m / math.sqrt(math.pi / 2.0)
    lo, hi = config.obstacle_side_range_m
    obstacles = []
    for _ in range(config.obstacle_count):
        side = rng.uniform(lo, hi)
        cx = rng.uniform(0.0, L)
        cy = rng.uniform(0.0, L)
        height = config.altitude_m
        for _ in range(_MAX_HEIGHT_DRAWS):
            draw = rng.rayleigh(scale)
            if draw <= config.altitude_m:
                height = draw
                break
        obstacles.append(Obstacle(cx, cy, side, side, height))

    return Environment(region=region, gbss=tuple(gbss), obstacles=tuple(obstacles), seed=seed)


def grid_point(i: int, j: int, region: Region) -> tuple[float, float]:
    """Location of the (i, j)-th grid point, 1-based: ((i - 1/2)d, (j - 1/2)d)."""
    d = region.grid_size
    if not (1 <= i <= d and 1 <= j <= d):
        raise IndexError(f"grid index ({i}, {j}) outside 1..{d}")
    delta = region.granularity_m
    return ((i - 0.5) * delta, (j - 0.5) * delta)


def cell_of(u: Sequence[float], region: Region) -> tuple[int, int]:
    """Grid cell containing point ``u``.

    Cells overlap on their shared boundaries; boundary points resolve to the
    lexicographically smallest qualifying (i, j), which keeps the assignment
    deterministic and order-stable.
    """
    x, y = float(u[0]), float(u[1])
    L = region.edge_length_m
    if not (0.0 <= x <= L and 0.0 <= y <= L):
        raise ValueError(f"point ({x}, {y}) outside the region [0, {L}]^2")
    delta = region.granularity_m
    i = max(1, math.ceil(x / delta))
    j = max(1, math.ceil(y / delta))
    return (min(i, region.grid_size), min(j, region.grid_size))


def los_blocked_many(a: Sequence[float], pts: np.ndarray, env: Environment) -> np.ndarray:
    """Vectorized blockage test from one point ``a`` to many points ``pts`` (N x 3).

    True where the open segment (a, p) crosses the interior of any obstacle
    cuboid.  Grazing contact with a face or edge does not count (slab test
    with strict inequalities), so verdicts do not flip on exact face contact.
    """
    pts = np.asarray(pts, dtype=np.float64)
    n = pts.shape[0]
    blocked = np.zeros(n, dtype=bool)
    boxes = env._bounds_array()
    if boxes.shape[0] == 0 or n == 0:
        return blocked

    a = np.asarray(a, dtype=np.float64)
    d = pts - a  # per-target direction; parameter t runs over (0, 1)
    for xmin, xmax, ymin, ymax, zmin, zmax in boxes:
        t_enter = np.full(n, -np.inf)
        t_exit = np.full(n, np.inf)
        for axis, (lo, hi) in enumerate(((xmin, xmax), (ymin, ymax), (zmin, zmax))):
            d_ax = d[:, axis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = (lo - a[axis]) / d_ax
                t1 = (hi - a[axis]) / d_ax
            tmin = np.minimum(t0, t1)
            tmax = np.maximum(t0, t1)
            parallel = d_ax == 0.0
            if parallel.any():
                inside = lo < a[axis] < hi
                tmin[parallel] = -np.inf if inside else np.inf
                tmax[parallel] = np.inf if inside else -np.inf
            t_enter = np.maximum(t_enter, tmin)
            t_exit = np.minimum(t_exit, tmax)
        blocked |= (t_enter < t_exit) & (t_enter < 1.0) & (t_exit > 0.0)
    return blocked


def los_blocked(a: Sequence[float], b: Sequence[float], env: Environment) -> bool:
    """True iff the open segment (a, b) crosses any obstacle interior."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints must differ")
    return bool(los_blocked_many(a, b[None, :], env)[0])


# --- JSON round trip --------------------------------------------------------


def environment_to_json(env: Environment) -> str:
    """Serialize to the documented JSON schema (lossless for 64-bit floats)."""
    doc = {
        "schema_version": ENV_SCHEMA_VERSION,
        "seed": env.seed,
        "region": {
            "L": env.region.edge_length_m,
            "delta_d": env.region.granularity_m,
            "H": env.region.altitude_m,
        },
        "gbss": [
            {"id": g.id, "x": g.position[0], "y": g.position[1], "h": g.position[2]}
            for g in env.gbss
        ],
        "obstacles": [
            {"cx": ob.center_x, "cy": ob.center_y, "len": ob.length_m, "wid": ob.width_m, "h": ob.height_m}
            for ob in env.obstacles
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def environment_from_json(text: str) -> Environment:
    doc = json.loads(text)
    if doc.get("schema_version") != ENV_SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported environment schema: {doc.get('schema_version')!r}")
    region = Region(doc["region"]["L"], doc["region"]["delta_d"], doc["region"]["H"])
    gbss = tuple(Gbs(id=g["id"], position=(g["x"], g["y"], g["h"])) for g in doc["gbss"])
    obstacles = tuple(
        Obstacle(ob["cx"], ob["cy"], ob["len"], ob["wid"], ob["h"]) for ob in doc["obstacles"]
    )
    return Environment(region=region, gbss=gbss, obstacles=obstacles, seed=doc["seed"])

"""Large-scale channel gain maps at a fixed flight altitude.

Gains are stored on the amplitude-dB convention: the stored value is
10*log10 of the amplitude gain, so the POWER gain in dB is exactly twice
the stored value.  This bookkeeping is easy to get silently wrong; the
link-budget mapping in :func:`expected_sinr` is the one place the factor
of two is applied.

Entries below the truncation threshold ``epsilon_db`` are negligible and
stored as ``-inf`` (the ``NEGLIGIBLE`` sentinel), which preserves
max-semantics when superposing maps and serializes naturally to binary
float32 and to the literal string ``-inf`` in CSV.

Path loss follows the urban-macro aerial-vehicle expressions for rotor
heights above rooftops, with the LoS/NLoS branch decided geometrically by
obstacle blockage (not probabilistically), so a map is a pure function of
the environment:

    PL_LoS  = 28.0 + 22 log10(d3d) + 20 log10(fc_ghz)
    PL_NLoS = -17.5 + (46 - 7 log10(h_ut)) log10(d3d) + 20 log10(40 pi fc_ghz / 3)

Log-normal shadowing uses sigma_LoS = 4.64 exp(-0.0066 h_ut) dB and
sigma_NLoS = 6 dB, drawn once per (GBS, grid cell) from a counter-based
generator keyed by (environment seed, GBS id, cell index); draws are
independent of evaluation order, so map construction may be parallelized
freely.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .environment import Environment, Gbs, Region, cell_of, grid_point, los_blocked_many
from .errors import ConfigurationError

NEGLIGIBLE = float("-inf")

DEFAULT_CARRIER_GHZ = 2.0

RMAP_MAGIC = b"RMAP"
RMAP_VERSION = 1
_RMAP_HEADER = struct.Struct("<4sHHIddd")  # magic, version, gbs_id, D, delta_d, altitude, epsilon


@dataclass(frozen=True)
class LinkBudget:
    """Link-budget terms for mapping a channel gain to an expected SINR."""

    tx_power_dbm: float
    noise_density_dbm_hz: float
    noise_figure_db: float
    bandwidth_hz: float

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("bandwidth must be positive")

    @property
    def noise_power_dbm(self) -> float:
        return self.noise_density_dbm_hz + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db


@dataclass(frozen=True)
class RadioMap:
    """Per-GBS D x D matrix of amplitude-dB gains at the flight altitude.

    ``gains[i-1, j-1]`` is the gain at grid point (i, j); entries below
    ``epsilon_db`` are ``-inf``.  Stored as float32, matching the on-disk
    layout bit for bit.
    """

    gbs_id: int
    region: Region
    epsilon_db: float
    gains: np.ndarray

    def __post_init__(self):
        d = self.region.grid_size
        if self.gains.shape != (d, d) or self.gains.dtype != np.float32:
            raise ConfigurationError(f"gains must be float32 of shape ({d}, {d})")
        finite = np.isfinite(self.gains)
        if finite.any() and float(self.gains[finite].min()) < self.epsilon_db:
            raise ConfigurationError("map holds finite entries below the truncation threshold")
        self.gains.setflags(write=False)


@dataclass(frozen=True)
class RadioMapSet:
    """One map per GBS over a shared region, ids 1..M each exactly once."""

    maps: tuple[RadioMap, ...]

    def __post_init__(self):
        if not self.maps:
            raise ConfigurationError("map set must not be empty")
        ids = sorted(m.gbs_id for m in self.maps)
        if ids != list(range(1, len(self.maps) + 1)):
            raise ConfigurationError("map set must cover GBS ids 1..M exactly once")
        first = self.maps[0].region
        if any(m.region != first for m in self.maps):
            raise ConfigurationError("all maps must share one region")

    @property
    def region(self) -> Region:
        return self.maps[0].region

    def by_id(self, gbs_id: int) -> RadioMap:
        for m in self.maps:
            if m.gbs_id == gbs_id:
                return m
        raise KeyError(gbs_id)


# --- counter-based shadowing -------------------------------------------------

_MIX_1 = np.uint64(0x9E3779B97F4A7C15)
_MIX_2 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_3 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0 ** -53


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; a bijective avalanche on uint64 (wraps mod 2^64)."""
    with np.errstate(over="ignore"):
        x = (x + _MIX_1).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(30))) * _MIX_2).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(27))) * _MIX_3).astype(np.uint64)
        return x ^ (x >> np.uint64(31))


def _shadow_normals(seed: int, gbs_id: int, cell_flat: np.ndarray) -> np.ndarray:
    """Standard normal per cell, a pure function of (seed, gbs_id, cell index)."""
    base = _mix64(_mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) ^ np.uint64(gbs_id))
    idx = cell_flat.astype(np.uint64)
    with np.errstate(over="ignore"):
        h1 = _mix64(base ^ (idx * np.uint64(2)))
        h2 = _mix64(base ^ (idx * np.uint64(2) + np.uint64(1)))
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * _U53  # (0, 1]
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * _U53  # [0, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


# --- gain computation ---------------------------------------------------------


def _gain_db_core(
    gbs: Gbs,
    pts: np.ndarray,
    cell_flat: np.ndarray,
    env: Environment,
    carrier_ghz: float,
    shadowing: bool,
) -> np.ndarray:
    """Amplitude-dB gain from ``gbs`` to each 3D point (shared by scalar and map paths)."""
    g = np.asarray(gbs.position, dtype=np.float64)
    delta = pts - g
    d3d = np.sqrt(delta[:, 0] ** 2 + delta[:, 1] ** 2 + delta[:, 2] ** 2)
    if np.any(d3d == 0.0):
        raise ValueError("gain undefined at the GBS antenna position")

    blocked = los_blocked_many(g, pts, env)
    h_ut = pts[:, 2]
    log_d = np.log10(d3d)
    pl_los = 28.0 + 22.0 * log_d + 20.0 * math.log10(carrier_ghz)
    pl_nlos = (
        -17.5
        + (46.0 - 7.0 * np.log10(h_ut)) * log_d
        + 20.0 * math.log10(40.0 * math.pi * carrier_ghz / 3.0)
    )
    pl = np.where(blocked, pl_nlos, pl_los)

    if shadowing:
        sigma = np.where(blocked, 6.0, 4.64 * np.exp(-0.0066 * h_ut))
        shadow = sigma * _shadow_normals(env.seed, gbs.id, cell_flat)
    else:
        shadow = 0.0
    return -pl / 2.0 + shadow / 2.0


def channel_gain(
    gbs: Gbs,
    u,
    env: Environment,
    *,
    carrier_ghz: float = DEFAULT_CARRIER_GHZ,
    shadowing: bool = True,
) -> float:
    """Amplitude-dB gain between ``gbs`` and the 3D point ``u``.

    The shadowing draw is keyed by the grid cell containing ``u``, so the
    value is static for a given environment (recomputing always returns the
    same number).
    """
    pts = np.asarray(u, dtype=np.float64)[None, :]
    i, j = cell_of(pts[0, :2], env.region)
    flat = np.array([(i - 1) * env.region.grid_size + (j - 1)], dtype=np.int64)
    return float(_gain_db_core(gbs, pts, flat, env, carrier_ghz, shadowing)[0])


def build_radio_map(
    gbs: Gbs,
    env: Environment,
    epsilon_db: float,
    *,
    carrier_ghz: float = DEFAULT_CARRIER_GHZ,
    shadowing: bool = True,
) -> RadioMap:
    """Evaluate the gain at every grid point at altitude H and truncate at epsilon.

    Truncation compares the stored float32 values against the threshold, so
    the constructed map never holds a finite entry below ``epsilon_db``.
    """
    if not math.isfinite(epsilon_db) and epsilon_db != float("inf"):
        raise ConfigurationError("epsilon must be finite or +inf")
    region = env.region
    d = region.grid_size
    delta = region.granularity_m
    centers = (np.arange(1, d + 1, dtype=np.float64) - 0.5) * delta
    xs = np.repeat(centers, d)  # i outer
    ys = np.tile(centers, d)  # j inner
    pts = np.column_stack([xs, ys, np.full(d * d, region.altitude_m)])
    cell_flat = np.arange(d * d, dtype=np.int64)

    g64 = _gain_db_core(gbs, pts, cell_flat, env, carrier_ghz, shadowing)
    g32 = g64.astype(np.float32)
    g32[g32 < epsilon_db] = np.float32(NEGLIGIBLE)
    return RadioMap(gbs_id=gbs.id, region=region, epsilon_db=epsilon_db, gains=g32.reshape(d, d))


def build_radio_map_set(
    env: Environment,
    epsilon_db: float,
    *,
    carrier_ghz: float = DEFAULT_CARRIER_GHZ,
    shadowing: bool = True,
    max_workers: int | None = 1,
) -> RadioMapSet:
    """Build one map per GBS; optionally spread GBSs over a thread pool."""
    if max_workers is not None and max_workers <= 1:
        maps = [
            build_radio_map(g, env, epsilon_db, carrier_ghz=carrier_ghz, shadowing=shadowing)
            for g in env.gbss
        ]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            maps = list(
                pool.map(
                    lambda g: build_radio_map(
                        g, env, epsilon_db, carrier_ghz=carrier_ghz, shadowing=shadowing
                    ),
                    env.gbss,
                )
            )
    return RadioMapSet(maps=tuple(maps))


def superpose(maps: RadioMapSet) -> np.ndarray:
    """Elementwise maximum gain over all GBSs; -inf only where every map is -inf."""
    stack = np.stack([m.gains for m in maps.maps])
    return stack.max(axis=0)


def serving_gbs_ids(maps: RadioMapSet) -> np.ndarray:
    """Per-cell id of the strongest GBS, ties resolved to the lowest id."""
    stack = np.stack([m.gains for m in sorted(maps.maps, key=lambda m: m.gbs_id)])
    return stack.argmax(axis=0).astype(np.int32) + 1


def expected_sinr(gain_db: float, budget: LinkBudget) -> float:
    """Expected SINR in dB for an amplitude-dB gain (power gain = 2 x gain_db)."""
    if gain_db == NEGLIGIBLE:
        return float("-inf")
    return budget.tx_power_dbm + 2.0 * gain_db - budget.noise_power_dbm


# --- persistence --------------------------------------------------------------


def write_radio_map(m: RadioMap, path) -> None:
    """Fixed-layout binary container; payload is row-major little-endian float32."""
    header = _RMAP_HEADER.pack(
        RMAP_MAGIC,
        RMAP_VERSION,
        m.gbs_id,
        m.region.grid_size,
        m.region.granularity_m,
        m.region.altitude_m,
        m.epsilon_db,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(m.gains, dtype="<f4").tobytes())


def read_radio_map(path) -> RadioMap:
    with open(path, "rb") as fh:
        raw = fh.read(_RMAP_HEADER.size)
        magic, version, gbs_id, d, delta_d, altitude, epsilon = _RMAP_HEADER.unpack(raw)
        if magic != RMAP_MAGIC or version != RMAP_VERSION:
            raise ConfigurationError(f"not a supported radio-map file: {path}")
        payload = fh.read(4 * d * d)
    gains = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(d, d)
    region = Region(edge_length_m=d * delta_d, granularity_m=delta_d, altitude_m=altitude)
    return RadioMap(gbs_id=gbs_id, region=region, epsilon_db=epsilon, gains=gains)


def radio_map_to_csv(gains: np.ndarray) -> str:
    """One row per i, comma-separated; negligible entries as the literal -inf."""
    lines = [",".join(str(float(v)) for v in row) for row in gains]
    return "\n".join(lines) + "\n"


def render_pgm(gains: np.ndarray) -> bytes:
    """Binary PGM heatmap: finite range mapped linearly to 1..255, -inf to black.

    Column = first grid index (x), row = second index (y) with north up, so
    the image matches the metric axes.
    """
    d0, d1 = gains.shape
    finite = np.isfinite(gains)
    pixels = np.zeros((d0, d1), dtype=np.uint8)
    if finite.any():
        lo = float(gains[finite].min())
        hi = float(gains[finite].max())
        if hi > lo:
            scaled = 1.0 + 254.0 * (gains[finite].astype(np.float64) - lo) / (hi - lo)
        else:
            scaled = np.full(int(finite.sum()), 255.0)
        pixels[finite] = np.rint(scaled).astype(np.uint8)
    raster = pixels.T[::-1, :]  # x -> column, y -> row, north up
    header = f"P5\n{d1} {d0}\n255\n".encode("ascii")
    return header + raster.tobytes()


def maps_from_files(paths: Iterable) -> RadioMapSet:
    """Load a map set from per-GBS RMAP files (any order)."""
    return RadioMapSet(maps=tuple(sorted((read_radio_map(p) for p in paths), key=lambda m: m.gbs_id)))

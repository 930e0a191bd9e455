"""Binary feasibility masks over the fine grid and its quantized coarsening.

A grid point is feasible when the best gain over all GBSs meets the target.
The quantized mask coarsens the grid by an odd factor ``kappa``: a coarse
cell is feasible only when every one of its kappa^2 underlying fine points
is, which is what makes any segment between adjacent feasible coarse
centers safe to fly.

Masks are packed 64 cells to a word; at D = 2e4 the fine mask is ~50 MB
instead of ~400 MB as one byte per cell, and the planner reads adjacency
straight from the words.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .environment import Region
from .errors import ConfigurationError
from .radiomap import RadioMapSet, superpose

FMSK_MAGIC = b"FMSK"
_FMSK_HEADER = struct.Struct("<4sIHdI")  # magic, side, kappa, target_db, run count


class BitGrid:
    """Immutable side x side bitmap packed row-major, 64 cells per uint64 word.

    Bit (i, j) (1-based) lives at flat index (i-1)*side + (j-1); within the
    word array that is bit ``flat % 64`` of word ``flat // 64`` (little bit
    order, matching ``np.packbits(bitorder="little")`` viewed as uint64).
    """

    __slots__ = ("side", "words")

    def __init__(self, side: int, words: np.ndarray):
        self.side = side
        self.words = words
        words.setflags(write=False)

    @classmethod
    def from_bool(cls, mask: np.ndarray) -> "BitGrid":
        side = mask.shape[0]
        if mask.shape != (side, side):
            raise ConfigurationError("mask must be square")
        packed = np.packbits(mask.reshape(-1).astype(np.uint8), bitorder="little")
        pad = (-packed.size) % 8
        if pad:
            packed = np.concatenate([packed, np.zeros(pad, dtype=np.uint8)])
        return cls(side, packed.view(np.uint64))

    def to_bool(self) -> np.ndarray:
        flat = np.unpackbits(self.words.view(np.uint8), count=self.side * self.side, bitorder="little")
        return flat.astype(bool).reshape(self.side, self.side)

    def get(self, i: int, j: int) -> bool:
        """1-based lookup."""
        flat = (i - 1) * self.side + (j - 1)
        return bool((int(self.words[flat >> 6]) >> (flat & 63)) & 1)

    def popcount(self) -> int:
        return int(
            np.unpackbits(
                self.words.view(np.uint8), count=self.side * self.side, bitorder="little"
            ).sum()
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitGrid)
            and self.side == other.side
            and np.array_equal(self.words, other.words)
        )


@dataclass(frozen=True)
class FeasibleMap:
    """Fine-grid mask: bit (i, j) set iff max-over-GBS gain at (i, j) >= target."""

    region: Region
    target_db: float
    mask: BitGrid

    def __post_init__(self):
        if self.mask.side != self.region.grid_size:
            raise ConfigurationError("mask size does not match the region grid")


@dataclass(frozen=True)
class QuantizedFeasibleMap:
    """Coarse-grid mask at ratio kappa: set iff every covered fine point is feasible."""

    region: Region
    target_db: float
    kappa: int
    mask: BitGrid

    def __post_init__(self):
        _check_kappa(self.kappa, self.region.grid_size)
        if self.mask.side != self.region.grid_size // self.kappa:
            raise ConfigurationError("quantized mask size does not match D / kappa")

    @property
    def coarse_granularity_m(self) -> float:
        return self.kappa * self.region.granularity_m


def _check_kappa(kappa: int, d: int) -> None:
    if kappa < 1 or kappa % 2 == 0:
        raise ConfigurationError(f"quantization ratio must be odd and >= 1, got {kappa}")
    if d % kappa != 0:
        raise ConfigurationError(
            f"quantization ratio {kappa} must divide the grid size {d} "
            "(no padding or cropping is applied)"
        )


def build_feasible_map(maps: RadioMapSet, target_db: float) -> FeasibleMap:
    """Threshold the superposed map; negligible cells never pass a finite target."""
    if not math.isfinite(target_db):
        raise ConfigurationError("gain target must be finite")
    # Compare in float64 so the target is not rounded to the map's float32.
    mask = superpose(maps).astype(np.float64) >= float(target_db)
    return FeasibleMap(region=maps.region, target_db=target_db, mask=BitGrid.from_bool(mask))


def neighbor_set(i: int, j: int, kappa: int, d: int) -> set[tuple[int, int]]:
    """Fine indices covered by coarse cell (i, j): the kappa x kappa block."""
    _check_kappa(kappa, d)
    dq = d // kappa
    if not (1 <= i <= dq and 1 <= j <= dq):
        raise IndexError(f"quantized index ({i}, {j}) outside 1..{dq}")
    return {
        (p, q)
        for p in range((i - 1) * kappa + 1, i * kappa + 1)
        for q in range((j - 1) * kappa + 1, j * kappa + 1)
    }


def build_quantized_feasible_map(feasible: FeasibleMap, kappa: int) -> QuantizedFeasibleMap:
    """AND-reduce each kappa x kappa block of the fine mask."""
    d = feasible.region.grid_size
    _check_kappa(kappa, d)
    dq = d // kappa
    fine = feasible.mask.to_bool()
    coarse = fine.reshape(dq, kappa, dq, kappa).all(axis=(1, 3))
    return QuantizedFeasibleMap(
        region=feasible.region,
        target_db=feasible.target_db,
        kappa=kappa,
        mask=BitGrid.from_bool(coarse),
    )


def quantized_grid_point(i: int, j: int, kappa: int, region: Region) -> tuple[float, float]:
    """Center of coarse cell (i, j); for odd kappa this is also a fine grid point."""
    d = region.grid_size
    _check_kappa(kappa, d)
    dq = d // kappa
    if not (1 <= i <= dq and 1 <= j <= dq):
        raise IndexError(f"quantized index ({i}, {j}) outside 1..{dq}")
    coarse_delta = kappa * region.granularity_m
    return ((i - 0.5) * coarse_delta, (j - 0.5) * coarse_delta)


# --- persistence ---------------------------------------------------------------


def mask_to_pbm(grid: BitGrid) -> bytes:
    """Binary PBM (P4); bit 1 = feasible = black.  Row r is grid row i = r + 1."""
    bits = grid.to_bool().astype(np.uint8)
    packed = np.packbits(bits, axis=1)  # MSB-first per PBM spec, rows byte-padded
    header = f"P4\n{grid.side} {grid.side}\n".encode("ascii")
    return header + packed.tobytes()


def mask_from_pbm(data: bytes) -> BitGrid:
    if not data.startswith(b"P4"):
        raise ConfigurationError("not a binary PBM")
    parts = data.split(b"\n", 2)
    width, height = (int(t) for t in parts[1].split())
    if width != height:
        raise ConfigurationError("expected a square mask")
    raster = np.frombuffer(parts[2], dtype=np.uint8).reshape(height, -1)
    bits = np.unpackbits(raster, axis=1)[:, :width]
    return BitGrid.from_bool(bits.astype(bool))


def _run_lengths(flat: np.ndarray) -> np.ndarray:
    """Alternating run lengths starting with a (possibly empty) run of zeros."""
    if flat.size == 0:
        return np.zeros(0, dtype=np.uint32)
    changes = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], changes])
    ends = np.concatenate([changes, [flat.size]])
    runs = (ends - starts).astype(np.uint32)
    if flat[0]:  # leading run must describe zeros
        runs = np.concatenate([np.zeros(1, dtype=np.uint32), runs])
    return runs


def write_mask(path, grid: BitGrid, kappa: int, target_db: float) -> None:
    """Run-length-encoded sidecar for caching masks between CLI invocations."""
    flat = np.unpackbits(grid.words.view(np.uint8), count=grid.side * grid.side, bitorder="little")
    runs = _run_lengths(flat)
    with open(path, "wb") as fh:
        fh.write(_FMSK_HEADER.pack(FMSK_MAGIC, grid.side, kappa, target_db, runs.size))
        fh.write(runs.astype("<u4").tobytes())


def read_mask(path) -> tuple[BitGrid, int, float]:
    """Returns (grid, kappa, target_db)."""
    with open(path, "rb") as fh:
        magic, side, kappa, target_db, nruns = _FMSK_HEADER.unpack(fh.read(_FMSK_HEADER.size))
        if magic != FMSK_MAGIC:
            raise ConfigurationError(f"not a mask sidecar: {path}")
        runs = np.frombuffer(fh.read(4 * nruns), dtype="<u4")
    flat = np.zeros(side * side, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if value:
            flat[pos : pos + int(run)] = 1
        pos += int(run)
        value ^= 1
    if pos != side * side:
        raise ConfigurationError("corrupt mask sidecar: run lengths do not cover the grid")
    return BitGrid.from_bool(flat.astype(bool).reshape(side, side)), kappa, target_db

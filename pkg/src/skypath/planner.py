"""Shortest-path planning over feasibility masks.

The graph is implicit: vertices are the set bits of a feasibility mask and
edges connect 8-neighbors (step length delta straight, sqrt(2) delta
diagonal, i.e. the Euclidean distance between the cell centers).  Adjacency
is read from the packed bitmap during the search instead of materializing
edge lists, which keeps memory at the bitmap size even for very large
grids.

Dijkstra runs on a compiled kernel with an indexed binary heap.  A binary
heap instead of a Fibonacci heap costs only a constant factor on grid
graphs (|E| <= 4|V|) and is simpler to make deterministic: ties pop the
lexicographically smallest (i, j), and among equal-length predecessors the
lexicographically smallest wins, so identical inputs always produce
identical paths.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .environment import Region, cell_of, grid_point
from .errors import ConfigurationError, EndpointInfeasibleError, ProblemInfeasibleError
from .feasibility import BitGrid, FeasibleMap, QuantizedFeasibleMap, build_feasible_map, build_quantized_feasible_map
from .radiomap import RadioMapSet, superpose

# Neighbor offsets in row-major order; the order does not affect results
# (tie-breaks are by index), it is fixed only for reproducibility.
_OFF_I = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_OFF_J = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)


@numba.njit(cache=True, inline="always")
def _bit_set(words, flat):
    return (words[flat >> 6] >> np.uint64(flat & 63)) & np.uint64(1) != np.uint64(0)


@numba.njit(cache=True, inline="always")
def _heap_less(dist, a, b):
    da = dist[a]
    db = dist[b]
    return da < db or (da == db and a < b)


@numba.njit(cache=True)
def _sift_up(dist, heap, pos, k):
    while k > 0:
        parent = (k - 1) >> 1
        if _heap_less(dist, heap[k], heap[parent]):
            heap[k], heap[parent] = heap[parent], heap[k]
            pos[heap[k]] = k
            pos[heap[parent]] = parent
            k = parent
        else:
            break


@numba.njit(cache=True)
def _sift_down(dist, heap, pos, size, k):
    while True:
        c = 2 * k + 1
        if c >= size:
            break
        if c + 1 < size and _heap_less(dist, heap[c + 1], heap[c]):
            c += 1
        if _heap_less(dist, heap[c], heap[k]):
            heap[k], heap[c] = heap[c], heap[k]
            pos[heap[k]] = k
            pos[heap[c]] = c
            k = c
        else:
            break


@numba.njit(cache=True)
def _dijkstra_kernel(words, side, step, s, t):
    """Single-source search to target ``t`` over the implicit 8-connected grid.

    Returns (dist, pred) flat arrays; dist[t] is inf when t is unreachable.
    """
    n = side * side
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, np.int64)
    heap = np.empty(n, np.int64)
    pos = np.full(n, -1, np.int64)
    diag = math.sqrt(2.0 * step * step)

    dist[s] = 0.0
    heap[0] = s
    pos[s] = 0
    size = 1
    while size > 0:
        v = heap[0]
        pos[v] = -1
        size -= 1
        if size > 0:
            heap[0] = heap[size]
            pos[heap[0]] = 0
            _sift_down(dist, heap, pos, size, 0)
        if v == t:
            break
        dv = dist[v]
        i = v // side
        j = v - i * side
        for k in range(8):
            ni = i + _OFF_I[k]
            nj = j + _OFF_J[k]
            if ni < 0 or ni >= side or nj < 0 or nj >= side:
                continue
            u = ni * side + nj
            if not _bit_set(words, u):
                continue
            nd = dv + (step if (_OFF_I[k] == 0 or _OFF_J[k] == 0) else diag)
            du = dist[u]
            if nd < du:
                dist[u] = nd
                pred[u] = v
                if pos[u] == -1:
                    heap[size] = u
                    pos[u] = size
                    size += 1
                    _sift_up(dist, heap, pos, size - 1)
                else:
                    _sift_up(dist, heap, pos, pos[u])
            elif nd == du and v < pred[u]:
                pred[u] = v
    return dist, pred


def _seg_len(p: Sequence[float], q: Sequence[float]) -> float:
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    return math.sqrt(dx * dx + dy * dy)


def _cell_of_delta(x: float, y: float, delta: float, side: int) -> tuple[int, int]:
    """cell_of generalized to an arbitrary spacing (used for the coarse grid)."""
    i = max(1, math.ceil(x / delta))
    j = max(1, math.ceil(y / delta))
    return (min(i, side), min(j, side))


@dataclass(frozen=True)
class PlanGraph:
    """Implicit 8-connected graph over the set bits of a feasibility mask."""

    level: str  # "fine" or "quantized"
    kappa: int
    region: Region
    target_db: float
    step_m: float
    mask: BitGrid

    @property
    def side(self) -> int:
        return self.mask.side

    def has_vertex(self, i: int, j: int) -> bool:
        return 1 <= i <= self.side and 1 <= j <= self.side and self.mask.get(i, j)

    def vertex_count(self) -> int:
        return self.mask.popcount()

    def edge_count(self) -> int:
        b = self.mask.to_bool()
        horiz = int((b[:, :-1] & b[:, 1:]).sum())
        vert = int((b[:-1, :] & b[1:, :]).sum())
        diag = int((b[:-1, :-1] & b[1:, 1:]).sum())
        anti = int((b[:-1, 1:] & b[1:, :-1]).sum())
        return horiz + vert + diag + anti

    def point_of(self, i: int, j: int) -> tuple[float, float]:
        return ((i - 0.5) * self.step_m, (j - 0.5) * self.step_m)


def build_graph_fine(f: FeasibleMap) -> PlanGraph:
    return PlanGraph(
        level="fine",
        kappa=1,
        region=f.region,
        target_db=f.target_db,
        step_m=f.region.granularity_m,
        mask=f.mask,
    )


def build_graph_quantized(fq: QuantizedFeasibleMap) -> PlanGraph:
    return PlanGraph(
        level="quantized",
        kappa=fq.kappa,
        region=fq.region,
        target_db=fq.target_db,
        step_m=fq.coarse_granularity_m,
        mask=fq.mask,
    )


def dijkstra(
    g: PlanGraph, s: tuple[int, int], t: tuple[int, int]
) -> Optional[tuple[list[tuple[int, int]], float]]:
    """Minimum-distance vertex sequence from s to t, or None when disconnected.

    Endpoints that are not graph vertices raise EndpointInfeasibleError,
    which callers must distinguish from plain disconnection.
    """
    for name, (i, j) in (("start", s), ("end", t)):
        if not g.has_vertex(i, j):
            raise EndpointInfeasibleError(f"{name} point ({i}, {j}) is not a feasible grid point")
    side = g.side
    s_flat = (s[0] - 1) * side + (s[1] - 1)
    t_flat = (t[0] - 1) * side + (t[1] - 1)
    dist, pred = _dijkstra_kernel(g.mask.words, side, g.step_m, s_flat, t_flat)
    length = float(dist[t_flat])
    if math.isinf(length):
        return None
    seq = []
    v = t_flat
    while v != -1:
        seq.append((v // side + 1, v % side + 1))
        v = int(pred[v])
    seq.reverse()
    return seq, length


@dataclass(frozen=True)
class Path:
    """Validated flight path: grid waypoints plus quantized stitch segments."""

    level: str
    kappa: int
    target_db: float
    waypoints: tuple[tuple[float, float], ...]
    total_length_m: float
    serving_gbs: tuple[int, ...]
    waypoint_gains_db: tuple[float, ...]
    snap_start_m: float = 0.0  # distance from the requested start to the grid
    snap_end_m: float = 0.0
    stitch_start_m: float = 0.0  # straight run from the start into the coarse center
    stitch_end_m: float = 0.0


@dataclass
class ValidationReport:
    passed: bool
    failures: list[str] = field(default_factory=list)

    @property
    def first_violation(self) -> Optional[str]:
        return self.failures[0] if self.failures else None


def _snap(u, region: Region) -> tuple[tuple[float, float], tuple[int, int], float]:
    """Nearest-cell grid point for an endpoint, with the snap distance."""
    cell = cell_of(u, region)
    point = grid_point(cell[0], cell[1], region)
    return point, cell, _seg_len(u, point)


def _waypoint_annotations(
    points: Sequence[tuple[float, float]], maps: RadioMapSet
) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Serving GBS (argmax gain, ties to lowest id) and best gain per waypoint."""
    region = maps.region
    stack = np.stack([m.gains for m in sorted(maps.maps, key=lambda m: m.gbs_id)])
    ids = []
    gains = []
    for p in points:
        i, j = cell_of(p, region)
        column = stack[:, i - 1, j - 1]
        best = int(column.argmax())
        ids.append(best + 1)
        gains.append(float(column[best]))
    return tuple(ids), tuple(gains)


def _fold_length(points: Sequence[tuple[float, float]]) -> float:
    total = 0.0
    for a, b in zip(points, points[1:]):
        total += _seg_len(a, b)
    return total


def plan_optimal(
    maps: RadioMapSet, target_db: float, u0: Sequence[float], uF: Sequence[float]
) -> Path:
    """Minimum-distance fine-grid path meeting the gain target at every point.

    Raises ProblemInfeasibleError when no feasible cells exist at all or when
    the endpoints are disconnected, EndpointInfeasibleError when an endpoint
    cell fails the target while other cells pass.
    """
    f = build_feasible_map(maps, target_db)
    g = build_graph_fine(f)
    if g.vertex_count() == 0:
        raise ProblemInfeasibleError(f"no grid point meets the target {target_db} dB")
    start, s_cell, snap_start = _snap(u0, maps.region)
    end, t_cell, snap_end = _snap(uF, maps.region)
    result = dijkstra(g, s_cell, t_cell)
    if result is None:
        raise ProblemInfeasibleError("feasible grid points do not connect the endpoints")
    seq, _ = result
    points = [g.point_of(i, j) for i, j in seq]
    ids, gains = _waypoint_annotations(points, maps)
    return Path(
        level="fine",
        kappa=1,
        target_db=target_db,
        waypoints=tuple(points),
        total_length_m=_fold_length(points),
        serving_gbs=ids,
        waypoint_gains_db=gains,
        snap_start_m=snap_start,
        snap_end_m=snap_end,
    )


def plan_quantized(
    maps: RadioMapSet,
    target_db: float,
    kappa: int,
    u0: Sequence[float],
    uF: Sequence[float],
) -> Path:
    """Suboptimal plan on the kappa-coarsened grid with straight stitch segments.

    Interior waypoints are coarse-cell centers on a shortest path of the
    coarse graph; the path starts with a straight run from the (snapped)
    start into its coarse center and ends symmetrically.  With kappa = 1
    this reproduces plan_optimal exactly.
    """
    f = build_feasible_map(maps, target_db)
    fq = build_quantized_feasible_map(f, kappa)
    g = build_graph_quantized(fq)
    if g.vertex_count() == 0:
        raise ProblemInfeasibleError(f"no quantized cell meets the target {target_db} dB")
    region = maps.region
    start, _, snap_start = _snap(u0, region)
    end, _, snap_end = _snap(uF, region)
    coarse_delta = g.step_m
    s_cell = _cell_of_delta(start[0], start[1], coarse_delta, g.side)
    t_cell = _cell_of_delta(end[0], end[1], coarse_delta, g.side)
    result = dijkstra(g, s_cell, t_cell)
    if result is None:
        raise ProblemInfeasibleError("feasible quantized cells do not connect the endpoints")
    seq, _ = result
    points = [start] + [g.point_of(i, j) for i, j in seq] + [end]
    stitch_start = _seg_len(points[0], points[1])
    stitch_end = _seg_len(points[-2], points[-1])
    deduped = [points[0]]
    for p in points[1:]:
        if p != deduped[-1]:
            deduped.append(p)
    ids, gains = _waypoint_annotations(deduped, maps)
    return Path(
        level="quantized",
        kappa=kappa,
        target_db=target_db,
        waypoints=tuple(deduped),
        total_length_m=_fold_length(deduped),
        serving_gbs=ids,
        waypoint_gains_db=gains,
        snap_start_m=snap_start,
        snap_end_m=snap_end,
        stitch_start_m=stitch_start,
        stitch_end_m=stitch_end,
    )


def validate_path(p: Path, maps: RadioMapSet, samples_per_segment: int = 100) -> ValidationReport:
    """Independent certificate check for a returned path.

    Re-derives every path invariant from the maps: step-length legality
    (with the stitch exception for quantized paths), the length bookkeeping,
    the per-waypoint gain constraint, and a dense sweep of sample points per
    segment, each mapped through its containing cell.
    """
    failures: list[str] = []
    region = maps.region
    best = superpose(maps).astype(np.float64)
    delta_level = p.kappa * region.granularity_m
    step_bound = math.sqrt(2.0 * delta_level * delta_level) * (1.0 + 1e-12)
    stitch_bound = math.sqrt(2.0 * (delta_level / 2.0) ** 2) * (1.0 + 1e-12)

    if len(p.waypoints) == 0:
        return ValidationReport(False, ["path has no waypoints"])

    seg_lens = [_seg_len(a, b) for a, b in zip(p.waypoints, p.waypoints[1:])]
    for k, seg in enumerate(seg_lens):
        is_stitch = p.level == "quantized" and (
            (k == 0 and p.stitch_start_m > 0.0) or (k == len(seg_lens) - 1 and p.stitch_end_m > 0.0)
        )
        bound = stitch_bound if is_stitch else step_bound
        if seg > bound:
            failures.append(f"segment {k} length {seg:.6f} exceeds bound {bound:.6f}")

    total = sum(seg_lens)
    if abs(total - p.total_length_m) > 1e-9 * max(1.0, abs(total)):
        failures.append(f"stored length {p.total_length_m!r} != recomputed {total!r}")

    for k, wp in enumerate(p.waypoints):
        i, j = cell_of(wp, region)
        if best[i - 1, j - 1] < p.target_db:
            failures.append(f"waypoint {k} at cell ({i}, {j}) violates the gain target")
            break

    ts = np.linspace(0.0, 1.0, samples_per_segment)
    for k, (a, b) in enumerate(zip(p.waypoints, p.waypoints[1:])):
        xs = a[0] + ts * (b[0] - a[0])
        ys = a[1] + ts * (b[1] - a[1])
        for x, y in zip(xs, ys):
            i, j = cell_of((x, y), region)
            if best[i - 1, j - 1] < p.target_db:
                failures.append(
                    f"segment {k} sample ({x:.3f}, {y:.3f}) lands in infeasible cell ({i}, {j})"
                )
                break
        if failures and failures[-1].startswith(f"segment {k} sample"):
            break

    return ValidationReport(passed=not failures, failures=failures)


def path_metrics(p: Path, speed_mps: Optional[float] = None) -> dict:
    """Length plus optional flight duration at a constant speed."""
    if speed_mps is not None and speed_mps <= 0:
        raise ConfigurationError("speed must be positive")
    metrics = {
        "length_m": p.total_length_m,
        "snap_start_m": p.snap_start_m,
        "snap_end_m": p.snap_end_m,
    }
    if speed_mps is not None:
        metrics["duration_s"] = p.total_length_m / speed_mps
    return metrics


# --- export -------------------------------------------------------------------


def path_to_json(p: Path) -> str:
    doc = {
        "level": p.level,
        "kappa": p.kappa,
        "target_db": p.target_db,
        "total_length_m": p.total_length_m,
        "waypoints": [
            {"x": x, "y": y, "gain_db": g, "gbs_id": m}
            for (x, y), g, m in zip(p.waypoints, p.waypoint_gains_db, p.serving_gbs)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def path_to_csv(p: Path) -> str:
    lines = ["x,y,gain_db,gbs_id"]
    for (x, y), g, m in zip(p.waypoints, p.waypoint_gains_db, p.serving_gbs):
        lines.append(f"{x!r},{y!r},{g!r},{m}")
    return "\n".join(lines) + "\n"


def render_path_svg(
    p: Path, region: Region, infeasible: Optional[np.ndarray] = None
) -> str:
    """Path polyline over the region, optionally shading infeasible cells.

    Coordinates are meters with y flipped so north is up; output is a pure
    function of the inputs (fixed float formatting).
    """
    L = region.edge_length_m
    delta = region.granularity_m

    def fx(v: float) -> str:
        return f"{v:.3f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {fx(L)} {fx(L)}" '
        f'width="640" height="640">',
        f'<rect x="0" y="0" width="{fx(L)}" height="{fx(L)}" fill="white"/>',
    ]
    if infeasible is not None:
        side = infeasible.shape[0]
        cell = L / side
        for i in range(side):
            for j in range(side):
                if infeasible[i, j]:
                    x = i * cell
                    y = L - (j + 1) * cell
                    parts.append(
                        f'<rect x="{fx(x)}" y="{fx(y)}" width="{fx(cell)}" '
                        f'height="{fx(cell)}" fill="#c8c8c8"/>'
                    )
    pts = " ".join(f"{fx(x)},{fx(L - y)}" for x, y in p.waypoints)
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="{fx(delta / 2)}"/>'
    )
    x0, y0 = p.waypoints[0]
    xf, yf = p.waypoints[-1]
    parts.append(f'<circle cx="{fx(x0)}" cy="{fx(L - y0)}" r="{fx(delta)}" fill="#2ca02c"/>')
    parts.append(f'<circle cx="{fx(xf)}" cy="{fx(L - yf)}" r="{fx(delta)}" fill="#1f77b4"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
